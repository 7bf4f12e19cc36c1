#pragma once
// Training loops for the autoencoder and the velocity model (+ head).

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "repa/nets/autoencoder.hpp"
#include "repa/nets/projection_head.hpp"
#include "repa/nets/velocity_model.hpp"

namespace repa::train {

using diffcore::Tensor;

struct TrainConfig {
  std::uint64_t seed = 1;
  std::size_t batch = 32;
  std::size_t steps = 3000;
  double lr = 1e-3;
  // 0 disables alignment training; the head is then fitted as a probe on
  // stopped-gradient tokens so that MisREPA is still measurable.
  double w_repa = 0.5;
  std::size_t tap = 3;
  std::string schedule = "linear";
  std::string optimizer = "adam";

  void validate() const;
};

struct StepRecord {
  std::size_t step = 0;
  double flow = 0.0;
  double repa = 0.0;
  double total = 0.0;
};

struct TrainLog {
  std::vector<StepRecord> steps;
  double heldout_initial = 0.0;
  double heldout_final = 0.0;

  void write_csv(const std::filesystem::path& path) const;
};

struct FlowData {
  Tensor train;           // [M, dim] clean states (images or latents)
  Tensor train_features;  // [M, N * D1] encoder features of the clean images
  Tensor heldout;         // [K, dim]
};

struct FlowModels {
  nets::VelocityModel model;
  nets::ProjectionHead head;
  TrainLog log;
};

using Progress = std::function<void(const StepRecord&)>;

FlowModels train_flow(const TrainConfig& config, nets::VelocityConfig model_config,
                      const nets::HeadConfig& head_config, const FlowData& data, const Progress& progress = {});

// Flow loss over a held-out set with t and eps fixed by `seed`.
double heldout_flow_loss(const nets::VelocityModel& model, const Tensor& heldout,
                         const schedule::InterpolantSchedule& schedule, std::uint64_t seed);

struct AeTrainConfig {
  std::uint64_t seed = 1;
  std::size_t batch = 64;
  std::size_t steps = 3000;
  double lr = 1e-3;
};

struct AeModels {
  nets::Autoencoder ae;
  TrainLog log;
  double median_psnr = 0.0;  // held-out reconstruction
};

AeModels train_autoencoder(const AeTrainConfig& config, const nets::AutoencoderConfig& ae_config,
                           const Tensor& train, const Tensor& heldout, const Progress& progress = {});

// Per-image reconstruction MSE of decode(encode(x)) for rows of `images`.
std::vector<double> reconstruction_mse(const nets::Autoencoder& ae, const Tensor& images);
// Latent codes of all rows: [M, d].
Tensor encode_rows(const nets::Autoencoder& ae, const Tensor& images);

}  // namespace repa::train
