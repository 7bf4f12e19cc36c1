#include "repa/harness/tune.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

#include "repa/errors.hpp"
#include "repa/harness/experiment.hpp"

namespace repa::harness {

namespace {

std::vector<solve::SolverKind> solvers_of(const ExperimentConfig& c) {
  std::vector<solve::SolverKind> out;
  for (const auto& m : c.methods)
    if (std::find(out.begin(), out.end(), m.kind) == out.end()) out.push_back(m.kind);
  return out;
}

}  // namespace

TuneResult tune_lambda(const ExperimentConfig& config, const Models& models, std::span<const double> grid,
                       double psnr_tolerance, const Log& log) {
  if (grid.empty()) throw ConfigError("tune: empty lambda grid");
  const auto images = tuning_images(config);
  TuneResult result;
  for (degrade::Kind task : config.tasks) {
    double best = std::numeric_limits<double>::infinity();
    for (solve::SolverKind solver : solvers_of(config)) {
      if (log) log("tune: " + std::string(degrade::kind_name(task)) + " / " + std::string(solve::solver_name(solver)));
      const auto base = evaluate_method(config, models, task, Method{solver, std::nullopt}, config.solver_steps, images);
      for (double lambda : grid) {
        ExperimentConfig c = config;
        c.task_params[task].lambda = lambda;
        const auto reg = evaluate_method(c, models, task, Method{solver, solve::Regularizer::repa}, c.solver_steps, images);
        result.rows.push_back({task, solver, lambda, base.feature_mmd.mean, reg.feature_mmd.mean, base.frechet,
                               reg.frechet, base.psnr.mean, reg.psnr.mean});
      }
    }
    for (double lambda : grid) {
      double total = 0.0;
      std::size_t count = 0;
      bool feasible = true;
      for (const auto& r : result.rows) {
        if (r.task != task || r.lambda != lambda) continue;
        total += (r.mmd - r.mmd_base) / r.mmd_base;
        ++count;
        feasible = feasible && std::abs(r.psnr - r.psnr_base) <= psnr_tolerance;
      }
      const double objective = total / static_cast<double>(count);
      if (feasible && objective < best) {
        best = objective;
        result.chosen[task] = lambda;
        result.objective[task] = objective;
      }
    }
    if (!result.chosen.count(task)) {
      throw NumericalError("tune: no lambda keeps PSNR within tolerance for " + std::string(degrade::kind_name(task)));
    }
  }
  return result;
}

void TuneResult::write_csv(const std::filesystem::path& path, const std::string& config_hash) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  out << "# config_hash=" << config_hash << '\n' << std::setprecision(12);
  out << "task,solver,lambda,feature_mmd_base,feature_mmd,frechet_base,frechet,psnr_base,psnr,chosen\n";
  for (const auto& r : rows) {
    out << degrade::kind_name(r.task) << ',' << solve::solver_name(r.solver) << ',' << r.lambda << ',' << r.mmd_base
        << ',' << r.mmd << ',' << r.frechet_base << ',' << r.frechet << ',' << r.psnr_base << ',' << r.psnr << ','
        << (chosen.at(r.task) == r.lambda ? 1 : 0) << '\n';
  }
  if (!out) throw ConfigError("cannot write " + path.string());
}

}  // namespace repa::harness
