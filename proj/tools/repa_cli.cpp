// repa: command-line driver for the experiment pipeline.
//
// Exit codes: 0 success, 1 configuration/shape/usage error, 2 numerical
// failure, 3 a verification stage ran but its check failed.

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "repa/errors.hpp"
#include "repa/harness/config.hpp"
#include "repa/harness/experiment.hpp"
#include "repa/harness/hashing.hpp"
#include "repa/harness/pipeline.hpp"
#include "repa/harness/tune.hpp"
#include "repa/harness/verify.hpp"

namespace fs = std::filesystem;
using namespace repa::harness;

namespace {

constexpr int kCheckFailed = 3;

struct Common {
  std::string config_path;
  std::optional<double> w;
  std::size_t threads = 0;
  bool quiet = false;

  ExperimentConfig load() const {
    ExperimentConfig c = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    if (threads > 0) c.threads = threads;
    c.validate();
    return c;
  }
  double weight(const ExperimentConfig& c) const { return w.value_or(c.flow_train.w_repa); }
  Log log() const {
    if (quiet) return {};
    return [](const std::string& s) { std::cerr << s << '\n'; };
  }
};

void add_common(CLI::App* cmd, Common& o, bool with_weight) {
  cmd->add_option("-c,--config", o.config_path, "INI config (defaults when omitted)")->check(CLI::ExistingFile);
  cmd->add_option("-j,--threads", o.threads, "override experiment.threads");
  cmd->add_flag("-q,--quiet", o.quiet, "no progress on stderr");
  if (with_weight) cmd->add_option("-w,--w-repa", o.w, "alignment weight of the flow checkpoint to use");
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw repa::ConfigError("cannot write " + path.string());
}

void print_table(const std::vector<MethodSummary>& rows) {
  std::printf("%-11s %-18s %5s %6s %4s %8s %7s %10s %10s\n", "task", "method", "T", "images", "fail", "psnr",
              "ssim", "feat_mmd", "frechet");
  for (const auto& s : rows) {
    std::printf("%-11s %-18s %5zu %6zu %4zu %8.3f %7.4f %10.5f %10.5f\n",
                std::string(repa::degrade::kind_name(s.task)).c_str(), s.method.name().c_str(), s.steps, s.images,
                s.failures, s.psnr.mean, s.ssim.mean, s.feature_mmd.mean, s.frechet);
  }
}

int run(int argc, char** argv) {
  CLI::App app{"REPA-regularized latent flow solvers for image inverse problems"};
  app.require_subcommand(1);
  Common common;

  auto* config_cmd = app.add_subcommand("config", "print the config template or a resolved config");
  bool as_template = false;
  config_cmd->add_flag("--template", as_template, "documented INI with every key at its default");
  add_common(config_cmd, common, false);

  auto* gen = app.add_subcommand("gen-data", "write a sprite dataset as PGM + float64 files");
  fs::path gen_dir;
  std::uint64_t gen_seed = 2024;
  std::size_t gen_count = 16;
  gen->add_option("-o,--out", gen_dir, "output directory")->required();
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("-n,--count", gen_count, "images");

  auto* train_ae = app.add_subcommand("train-ae", "train the autoencoder");
  add_common(train_ae, common, false);
  auto* train_flow = app.add_subcommand("train-flow", "train the latent flow and projection head");
  add_common(train_flow, common, true);

  ExperimentOptions eopts;
  auto* solve = app.add_subcommand("solve", "evaluate the configured methods on every task");
  add_common(solve, common, true);
  solve->add_flag("--dump-images", eopts.dump_images, "write reconstructions as PGM + raw float64");
  bool with_sweep = false;
  solve->add_flag("--with-sweep", with_sweep, "also run the step sweep");

  auto* sweep = app.add_subcommand("sweep-steps", "base vs +repa across discretization step counts");
  add_common(sweep, common, true);

  auto* theory = app.add_subcommand("verify-theory", "check the alignment and contraction bounds");
  add_common(theory, common, true);
  TheoryOptions topts;
  fs::path theory_out;
  theory->add_option("--triples", topts.triples, "sampled (x, x_bar, x_hat) triples");
  theory->add_option("--fixtures", topts.fixtures, "random linear fixtures");
  theory->add_option("--seed", topts.seed, "sampling seed");
  theory->add_option("-o,--out", theory_out, "JSON report (default <output>/theory.json)");

  auto* robust = app.add_subcommand("robustness", "patch-feature similarity along degradation ladders");
  add_common(robust, common, false);
  std::size_t robust_images = 50;
  fs::path robust_out;
  robust->add_option("-n,--images", robust_images, "evaluation images");
  robust->add_option("-o,--out", robust_out, "CSV (default <output>/robustness.csv)");

  auto* tune = app.add_subcommand("tune", "choose each task's lambda on the tuning images");
  add_common(tune, common, true);
  std::vector<double> grid(std::begin(kDefaultLambdaGrid), std::end(kDefaultLambdaGrid));
  double tolerance = 0.5;
  tune->add_option("--grid", grid, "candidate lambdas")->delimiter(',');
  tune->add_option("--psnr-tolerance", tolerance, "allowed |PSNR change| in dB");

  auto* report = app.add_subcommand("report", "print the table and sweep from summary.json");
  add_common(report, common, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (config_cmd->parsed()) {
    if (as_template) {
      std::cout << config_template();
    } else {
      const auto c = common.load();
      std::cout << "# config_hash=" << config_hash(c) << '\n' << canonical_config(c);
    }
    return 0;
  }
  if (gen->parsed()) {
    std::cout << gen_dataset(gen_dir, gen_seed, gen_count).string() << '\n';
    return 0;
  }
  const auto c = common.load();
  if (train_ae->parsed()) {
    std::cout << "autoencoder " << train_autoencoder_stage(c, common.log()) << '\n';
    return 0;
  }
  if (train_flow->parsed()) {
    std::cout << "flow " << train_flow_stage(c, common.weight(c), common.log()) << '\n';
    return 0;
  }
  if (solve->parsed() || sweep->parsed()) {
    const Models m = load_models(c, common.weight(c));
    eopts.table = solve->parsed();
    eopts.sweep = sweep->parsed() || with_sweep;
    const auto r = run_experiment(c, m, eopts, common.log());
    print_table(r.table);
    print_table(r.sweep);
    std::cout << "wrote " << r.summary_json.string() << '\n';
    return 0;
  }
  if (theory->parsed()) {
    const Models m = load_models(c, common.weight(c));
    const auto r = verify_theory(c, m, topts);
    const fs::path out = theory_out.empty() ? c.output / "theory.json" : theory_out;
    write_json(out, r.to_json());
    std::printf("alignment bound: %zu samples, %zu violations, min residual %.3e, %s\n", r.prop1.samples.size(),
                r.prop1.violations, r.prop1.min_residual, r.prop1_ok ? "ok" : "FAILED");
    std::printf("contraction: %zu/%zu fixtures hold, max C1 %.4f, %s\n", r.fixture.holds, r.fixture.instances,
                r.fixture.max_c1, r.prop2_ok ? "ok" : "FAILED");
    for (const auto& n : r.nonlinear) {
      std::printf("trained model, threshold %.3e:", n.threshold);
      for (const auto& ch : n.checks) std::printf(" ratio(%.2e)=%.4f", ch.lambda, ch.ratio);
      std::printf("\n");
    }
    std::cout << "wrote " << out.string() << '\n';
    return r.prop1_ok && r.prop2_ok ? 0 : kCheckFailed;
  }
  if (robust->parsed()) {
    const auto r = robustness(c, robust_images);
    const fs::path out = robust_out.empty() ? c.output / "robustness.csv" : robust_out;
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    r.curve.write_csv(out);
    for (const auto& p : r.curve.points) {
      std::printf("%-9s %5.2f %.6f\n", std::string(repa::theory::family_name(p.family)).c_str(), p.severity,
                  p.similarity);
    }
    std::printf("monotone %s, default severities %.4f / %.4f vs floor %.2f\n", r.monotone ? "yes" : "no",
                r.sr_default, r.blur_default, kRobustnessFloor);
    return r.monotone && r.above_floor ? 0 : kCheckFailed;
  }
  if (tune->parsed()) {
    const Models m = load_models(c, common.weight(c));
    const auto r = tune_lambda(c, m, grid, tolerance, common.log());
    const fs::path out = c.output / "tune.csv";
    r.write_csv(out, config_hash(c));
    for (const auto& row : r.rows) {
      std::printf("%-10s %-11s lambda %-6g mmd %.6f -> %.6f  frechet %.7f -> %.7f  dPSNR %+.3f\n",
                  std::string(repa::degrade::kind_name(row.task)).c_str(),
                  std::string(repa::solve::solver_name(row.solver)).c_str(), row.lambda, row.mmd_base, row.mmd,
                  row.frechet_base, row.frechet, row.psnr - row.psnr_base);
    }
    for (const auto& [task, lambda] : r.chosen) {
      std::printf("[task.%s]\nlambda = %g  ; mean relative MMD change %+.4f\n",
                  std::string(repa::degrade::kind_name(task)).c_str(), lambda, r.objective.at(task));
    }
    std::cout << "wrote " << out.string() << '\n';
    return 0;
  }
  if (report->parsed()) {
    const fs::path path = c.output / "summary.json";
    std::ifstream in(path);
    if (!in) throw repa::ConfigError("no results at " + path.string() + "; run solve first");
    const auto j = nlohmann::json::parse(in);
    std::cout << "config " << short_hash(j.at("config_hash").get<std::string>()) << '\n';
    for (const char* part : {"table", "sweep"}) {
      for (const auto& row : j.at(part)) {
        const auto num = [&](const char* k) { return row.at(k).is_null() ? NAN : row.at(k).get<double>(); };
        std::printf("%-6s %-11s %-18s %5zu %4zu/%-4zu psnr %7.3f +- %6.3f  ssim %.4f  feat_mmd %.5f\n", part,
                    row.at("task").get<std::string>().c_str(), row.at("method").get<std::string>().c_str(),
                    row.at("steps").get<std::size_t>(), row.at("failures").get<std::size_t>(),
                    row.at("images").get<std::size_t>(), num("psnr_mean"), num("psnr_std"), num("ssim_mean"),
                    num("feature_mmd_mean"));
      }
    }
    return 0;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const repa::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 2;
  } catch (const repa::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const repa::ShapeError& e) {
    std::cerr << "shape error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
