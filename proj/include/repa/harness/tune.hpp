#pragma once
// Regularizer weight selection on the tuning split. For each task, every
// lambda on the grid is scored by the mean relative change in per-image
// feature MMD over the configured solvers, among lambdas keeping every
// solver's mean PSNR within the tolerance of its base; the lowest wins.

#include <filesystem>
#include <map>
#include <vector>

#include "repa/harness/config.hpp"
#include "repa/harness/pipeline.hpp"

namespace repa::harness {

inline constexpr double kDefaultLambdaGrid[] = {0.03, 0.1, 0.3, 1.0, 3.0, 10.0};

struct TuneRow {
  degrade::Kind task = degrade::Kind::gaussblur;
  solve::SolverKind solver = solve::SolverKind::latent_dps;
  double lambda = 0.0;
  double mmd_base = 0.0, mmd = 0.0;
  double frechet_base = 0.0, frechet = 0.0;
  double psnr_base = 0.0, psnr = 0.0;
};

struct TuneResult {
  std::vector<TuneRow> rows;
  std::map<degrade::Kind, double> chosen;
  std::map<degrade::Kind, double> objective;  // mean relative MMD change at the chosen lambda

  void write_csv(const std::filesystem::path& path, const std::string& config_hash) const;
};

TuneResult tune_lambda(const ExperimentConfig& config, const Models& models, std::span<const double> grid,
                       double psnr_tolerance = 0.5, const Log& log = {});

}  // namespace repa::harness
