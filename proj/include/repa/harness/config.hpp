#pragma once
// Experiment configuration: an INI file with sections. Every key has a
// default; unknown sections or keys are errors.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "repa/degrade/degrade.hpp"
#include "repa/nets/autoencoder.hpp"
#include "repa/nets/feature_encoder.hpp"
#include "repa/nets/projection_head.hpp"
#include "repa/nets/velocity_model.hpp"
#include "repa/solve/solvers.hpp"
#include "repa/train/trainer.hpp"

namespace repa::harness {

// A solver with an optional alignment regularizer, written
// "<solver>[+repa|+feature]", e.g. "latent-dps+repa".
struct Method {
  solve::SolverKind kind = solve::SolverKind::latent_dps;
  std::optional<solve::Regularizer> regularizer;

  std::string name() const;
  static Method parse(std::string_view text);  // throws ConfigError
  friend bool operator==(const Method&, const Method&) = default;
};

struct TaskParams {
  double kappa = 1.0;
  double lambda = 0.0;  // used by methods with a regularizer
  double noise = 0.01;
};

struct ExperimentConfig {
  // [data]
  std::uint64_t data_seed = 2024;
  std::size_t train_images = 4096;
  std::size_t heldout_images = 512;
  std::uint64_t eval_seed = 7;
  std::size_t images = 100;
  std::uint64_t tuning_seed = 11;
  std::size_t tuning_images = 20;
  // [encoder]
  nets::EncoderConfig encoder;
  // [autoencoder]
  nets::AutoencoderConfig autoencoder;
  train::AeTrainConfig ae_train;
  // [flow]
  nets::VelocityConfig flow = nets::VelocityConfig::latent();
  std::size_t head_hidden = 128;
  train::TrainConfig flow_train;
  // [checkpoints]
  std::filesystem::path checkpoint_dir = "checkpoints";
  // [solver]
  std::size_t solver_steps = 50;
  solve::StepSchedule step_schedule = solve::StepSchedule::snr;
  solve::ProxyRule proxy = solve::ProxyRule::measurement;
  double gamma = 0.4;
  std::size_t inner_iterations = 30;
  double inner_step = 0.1;
  bool reevaluate = false;
  std::uint64_t solver_seed = 0;
  // [experiment]
  std::vector<degrade::Kind> tasks{degrade::Kind::gaussblur, degrade::Kind::superres};
  std::vector<Method> methods;
  std::uint64_t noise_seed = 5;
  std::size_t threads = 1;
  std::filesystem::path output = "results";
  std::vector<std::size_t> sweep_steps{10, 20, 40, 80, 160};
  std::size_t sweep_images = 50;
  degrade::Kind sweep_task = degrade::Kind::gaussblur;
  solve::SolverKind sweep_solver = solve::SolverKind::latent_dps;
  // [task.<kind>]
  std::map<degrade::Kind, TaskParams> task_params;

  ExperimentConfig();

  const TaskParams& task(degrade::Kind kind) const;
  // Solver settings for one method on one task (seed left to the caller).
  solve::SolverConfig solver(const Method& method, degrade::Kind task, std::size_t steps) const;
  nets::HeadConfig head() const;
  void validate() const;  // throws ConfigError
};

ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Every key with its resolved value, one "section.key = value" line each in a
// fixed order; the config hash is taken over this text.
std::string canonical_config(const ExperimentConfig& config);
// A complete INI file with comments documenting every key.
std::string config_template(const ExperimentConfig& config = {});

}  // namespace repa::harness
