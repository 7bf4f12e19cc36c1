#pragma once
// Paired evaluation of solvers on degraded images: per-image metrics,
// task x method aggregates, and a sweep over discretization steps.

#include <filesystem>
#include <string>
#include <vector>

#include "repa/harness/config.hpp"
#include "repa/harness/pipeline.hpp"

namespace repa::harness {

struct ImageResult {
  std::size_t image = 0;
  bool ok = false;
  std::string error;  // set when the solver aborted
  double psnr = 0.0;
  double ssim = 0.0;
  double feature_mmd = 0.0;  // ||mu_f(x) - mu_f(x_hat)||^2
  double approx_err = 0.0;   // of the initial proxy
  std::string reconstruction_hash;
  Tensor reconstruction;  // [H, W]; empty on failure
};

// Degrades image `index` of a task (noise seeded by (noise_seed, task, index),
// identical across methods) and solves it.
ImageResult solve_image(const ExperimentConfig& config, const Models& models, degrade::Kind task,
                        const Method& method, std::size_t steps, const Tensor& image, std::size_t index);
// Measurement of image `index`; also its operator.
degrade::DegradationOp task_operator(const ExperimentConfig& config, degrade::Kind task);
Tensor measure(const ExperimentConfig& config, degrade::Kind task, const Tensor& image, std::size_t index);

struct Stat {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for fewer than two values
};
Stat summarize(const std::vector<double>& values);

struct MethodSummary {
  degrade::Kind task = degrade::Kind::gaussblur;
  Method method;
  std::size_t steps = 0;
  std::size_t images = 0;
  std::size_t failures = 0;
  Stat psnr, ssim, feature_mmd;
  double frechet = 0.0;  // pooled-patch Frechet proxy vs clean images; NaN if < 2 successes
  double mmd = 0.0;      // set-level mean-embedding MMD; NaN if no successes
  std::vector<ImageResult> per_image;
};

MethodSummary evaluate_method(const ExperimentConfig& config, const Models& models, degrade::Kind task,
                              const Method& method, std::size_t steps, const std::vector<Tensor>& images);

struct Provenance {
  std::string config_hash;
  std::string checkpoints;
};

// One row per (task, method), in config order, failures counted.
void write_table_csv(const std::filesystem::path& path, const std::vector<MethodSummary>& rows,
                     const Provenance& provenance);
void write_per_image_csv(const std::filesystem::path& path, const std::vector<MethodSummary>& rows,
                         const Provenance& provenance);
// Step sweep rows, one per (method, steps).
void write_sweep_csv(const std::filesystem::path& path, const std::vector<MethodSummary>& rows,
                     const Provenance& provenance);

struct ExperimentResult {
  std::vector<MethodSummary> table;
  std::vector<MethodSummary> sweep;
  std::filesystem::path table_csv, per_image_csv, sweep_csv, summary_json;
};

struct ExperimentOptions {
  bool table = true;
  bool sweep = true;
  bool dump_images = false;  // reconstructions as PGM + raw float64 sidecars
};

// Runs the configured table and step sweep on the evaluation images and
// writes CSV/JSON outputs into config.output.
ExperimentResult run_experiment(const ExperimentConfig& config, const Models& models,
                                const ExperimentOptions& options = {}, const Log& log = {});

}  // namespace repa::harness
