#pragma once
// Theory checks against trained checkpoints: the alignment bound on sampled
// triples, the contraction bound on linear fixtures plus empirical ratios of
// the trained model, and the robustness ladder.

#include <nlohmann/json.hpp>

#include "repa/harness/pipeline.hpp"
#include "repa/theory/prop1.hpp"
#include "repa/theory/prop2.hpp"
#include "repa/theory/robustness.hpp"

namespace repa::harness {

// Pre-registered floor for the mean patch similarity at the default task
// severities (SR x4, blur sigma 1.5), fixed from the noiseless oracle run on
// the sprite set before any evaluation.
inline constexpr double kRobustnessFloor = 0.9;

struct TheoryOptions {
  std::size_t triples = 200;
  std::size_t fixtures = 100;
  std::size_t nonlinear_images = 4;
  std::uint64_t seed = 0;
};

// (x, x_bar, x_hat): x a held-out image, x_bar the image-shaped measurement
// of x under an alternating task, x_hat an autoencoder decode of a perturbed
// latent of x.
std::vector<theory::AlignmentTriple> sample_triples(const ExperimentConfig& config, const Models& models,
                                                    std::size_t count, std::uint64_t seed);

struct FixtureSummary {
  std::size_t instances = 0;
  std::size_t holds = 0;
  std::size_t contracting = 0;  // C1 < 1
  double max_c1 = 0.0;
  std::vector<double> c1, c2, ratio, threshold;
  std::size_t expanding_at_10x = 0;
};

struct TheoryResult {
  theory::AlignmentReport prop1;
  FixtureSummary fixture;
  std::vector<theory::Prop2Report> nonlinear;
  bool prop1_ok = false;
  bool prop2_ok = false;
  nlohmann::json to_json() const;
};

FixtureSummary check_fixtures(std::size_t count, std::uint64_t seed);
TheoryResult verify_theory(const ExperimentConfig& config, const Models& models, const TheoryOptions& options = {});

struct RobustnessResult {
  theory::RobustnessCurve curve;
  bool monotone = false;
  double sr_default = 0.0;
  double blur_default = 0.0;
  bool above_floor = false;
};
RobustnessResult robustness(const ExperimentConfig& config, std::size_t images);

}  // namespace repa::harness
