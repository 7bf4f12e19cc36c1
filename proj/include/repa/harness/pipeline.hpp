#pragma once
// Pipeline stages: dataset files, model training with cached checkpoints, and
// loading trained models for evaluation.

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "repa/harness/config.hpp"
#include "repa/nets/velocity_model.hpp"

namespace repa::harness {

using diffcore::Tensor;
using Log = std::function<void(const std::string&)>;

// Writes img_NNNNN.pgm (16-bit), img_NNNNN.f64 (exact values) and
// manifest.json (seed, count, generator version, file hashes). Returns the
// manifest path.
std::filesystem::path gen_dataset(const std::filesystem::path& dir, std::uint64_t seed, std::size_t count);

// Image sets of a config. Rows [M, H*W] for training; [H, W] images otherwise.
Tensor training_rows(const ExperimentConfig& config);
Tensor heldout_rows(const ExperimentConfig& config);
std::vector<Tensor> heldout_images(const ExperimentConfig& config);
std::vector<Tensor> eval_images(const ExperimentConfig& config);
std::vector<Tensor> tuning_images(const ExperimentConfig& config);

// Hash of the settings a checkpoint depends on; stored in its metadata.
std::string autoencoder_training_hash(const ExperimentConfig& config);
std::string flow_training_hash(const ExperimentConfig& config, double w_repa);

std::filesystem::path autoencoder_stem(const ExperimentConfig& config);
std::filesystem::path flow_stem(const ExperimentConfig& config, double w_repa);
std::filesystem::path head_stem(const ExperimentConfig& config, double w_repa);
// Wall time of the stage that wrote a checkpoint; -1 if not recorded.
double training_seconds(const std::filesystem::path& stem);

struct Models {
  nets::Autoencoder ae;
  nets::VelocityModel flow;
  nets::ProjectionHead head;
  nets::FeatureEncoder encoder;
  double w_repa = 0.0;
  std::string schedule = "linear";  // interpolant the flow was trained with
  std::string ae_hash, flow_hash, head_hash;  // manifest hashes

  nets::ModelPrior prior() const;
  std::string provenance() const;  // "autoencoder=<h> flow=<h> head=<h>"
};

// Trains and saves; returns the manifest hash. The flow stage needs the
// trained autoencoder on disk.
std::string train_autoencoder_stage(const ExperimentConfig& config, const Log& log = {});
std::string train_flow_stage(const ExperimentConfig& config, double w_repa, const Log& log = {});

// Loads checkpoints, requiring their training hash to match the config.
nets::Autoencoder load_autoencoder(const ExperimentConfig& config, std::string* hash = nullptr);
Models load_models(const ExperimentConfig& config, double w_repa);
// Trains whatever is missing or stale, then loads.
Models ensure_models(const ExperimentConfig& config, double w_repa, const Log& log = {});

// Mean MisREPA at t over images (clean images, [H, W]).
double mean_mis_repa(const Models& models, const std::vector<Tensor>& images, double t = 0.0);

}  // namespace repa::harness
