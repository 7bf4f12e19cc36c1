#include "repa/harness/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <nlohmann/json.hpp>

#include "repa/errors.hpp"
#include "repa/harness/hashing.hpp"
#include "repa/harness/image_io.hpp"
#include "repa/harness/metrics.hpp"
#include "repa/harness/parallel.hpp"
#include "repa/rng.hpp"
#include "repa/solve/decoder.hpp"
#include "repa/theory/divergence.hpp"

namespace repa::harness {

namespace fs = std::filesystem;
using degrade::Kind;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t task_stream(Kind k) { return static_cast<std::uint64_t>(k) + 1; }

std::ofstream open_csv(const fs::path& path, const Provenance& p) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "# config_hash=" << p.config_hash << "\n# checkpoints " << p.checkpoints << "\n";
  out << std::setprecision(12);
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw ConfigError("write failed: " + path.string());
}

nlohmann::json number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

nlohmann::json summary_json(const MethodSummary& s) {
  return {{"task", degrade::kind_name(s.task)},
          {"method", s.method.name()},
          {"steps", s.steps},
          {"images", s.images},
          {"failures", s.failures},
          {"psnr_mean", number(s.psnr.mean)},
          {"psnr_std", number(s.psnr.std)},
          {"ssim_mean", number(s.ssim.mean)},
          {"ssim_std", number(s.ssim.std)},
          {"feature_mmd_mean", number(s.feature_mmd.mean)},
          {"feature_mmd_std", number(s.feature_mmd.std)},
          {"frechet", number(s.frechet)},
          {"mmd", number(s.mmd)}};
}

}  // namespace

degrade::DegradationOp task_operator(const ExperimentConfig& config, Kind task) {
  return degrade::DegradationOp::desk(task, config.encoder.height, config.encoder.width, config.noise_seed,
                                      config.task(task).noise);
}

Tensor measure(const ExperimentConfig& config, Kind task, const Tensor& image, std::size_t index) {
  Rng rng(Rng::derive(Rng::derive(config.noise_seed, task_stream(task)), index));
  return task_operator(config, task).apply(image, rng);
}

ImageResult solve_image(const ExperimentConfig& config, const Models& models, Kind task, const Method& method,
                        std::size_t steps, const Tensor& image, std::size_t index) {
  const auto op = task_operator(config, task);
  const Tensor x = image.reshaped({config.encoder.height, config.encoder.width});
  const auto prior = models.prior();
  const solve::AutoencoderDecoder decoder(models.ae);
  solve::Problem problem{&prior, &decoder, &op, measure(config, task, x, index), &models.head, &models.encoder, &x};
  solve::SolverConfig sc = config.solver(method, task, steps);
  sc.seed = Rng::derive(config.solver_seed, index);

  ImageResult r;
  r.image = index;
  try {
    const auto trace = solve::run_solver(sc, problem);
    r.reconstruction = trace.reconstruction.reshaped(x.shape());
    r.ok = true;
    r.psnr = psnr(x, r.reconstruction);
    r.ssim = ssim(x, r.reconstruction);
    r.feature_mmd = theory::pair_feature_mmd(x, r.reconstruction, models.encoder);
    r.approx_err = trace.approx_err;
    r.reconstruction_hash = tensor_hash(r.reconstruction);
  } catch (const NumericalError& e) {
    r.ok = false;
    r.error = e.what();
    r.reconstruction = Tensor();
  }
  return r;
}

Stat summarize(const std::vector<double>& v) {
  Stat s;
  if (v.empty()) return {kNaN, kNaN};
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

MethodSummary evaluate_method(const ExperimentConfig& config, const Models& models, Kind task, const Method& method,
                              std::size_t steps, const std::vector<Tensor>& images) {
  MethodSummary s;
  s.task = task;
  s.method = method;
  s.steps = steps;
  s.images = images.size();
  s.per_image = parallel_map(images.size(), config.threads, [&](std::size_t i) {
    return solve_image(config, models, task, method, steps, images[i], i);
  });
  std::vector<double> p, q, m;
  std::vector<Tensor> clean, recon;
  for (const auto& r : s.per_image) {
    if (!r.ok) {
      ++s.failures;
      continue;
    }
    p.push_back(r.psnr);
    q.push_back(r.ssim);
    m.push_back(r.feature_mmd);
    clean.push_back(images[r.image]);
    recon.push_back(r.reconstruction);
  }
  s.psnr = summarize(p);
  s.ssim = summarize(q);
  s.feature_mmd = summarize(m);
  s.frechet = recon.size() >= 2 ? theory::frechet_proxy(clean, recon, models.encoder) : kNaN;
  s.mmd = recon.empty() ? kNaN : theory::mmd_dino(clean, recon, models.encoder);
  return s;
}

void write_table_csv(const fs::path& path, const std::vector<MethodSummary>& rows, const Provenance& prov) {
  auto out = open_csv(path, prov);
  out << "task,method,steps,images,failures,psnr_mean,psnr_std,ssim_mean,ssim_std,feature_mmd_mean,"
         "feature_mmd_std,frechet_proxy,mmd\n";
  for (const auto& s : rows) {
    out << degrade::kind_name(s.task) << ',' << s.method.name() << ',' << s.steps << ',' << s.images << ','
        << s.failures << ',' << s.psnr.mean << ',' << s.psnr.std << ',' << s.ssim.mean << ',' << s.ssim.std << ','
        << s.feature_mmd.mean << ',' << s.feature_mmd.std << ',' << s.frechet << ',' << s.mmd << '\n';
  }
  finish(out, path);
}

void write_per_image_csv(const fs::path& path, const std::vector<MethodSummary>& rows, const Provenance& prov) {
  auto out = open_csv(path, prov);
  out << "task,method,steps,image,status,psnr,ssim,feature_mmd,approx_err,reconstruction_hash\n";
  for (const auto& s : rows) {
    for (const auto& r : s.per_image) {
      out << degrade::kind_name(s.task) << ',' << s.method.name() << ',' << s.steps << ',' << r.image << ','
          << (r.ok ? "ok" : "failed") << ',';
      if (r.ok) {
        out << r.psnr << ',' << r.ssim << ',' << r.feature_mmd << ',' << r.approx_err << ','
            << short_hash(r.reconstruction_hash) << '\n';
      } else {
        out << ",,,,\n";
      }
    }
  }
  finish(out, path);
}

void write_sweep_csv(const fs::path& path, const std::vector<MethodSummary>& rows, const Provenance& prov) {
  auto out = open_csv(path, prov);
  out << "task,method,steps,images,failures,feature_mmd_mean,feature_mmd_std,psnr_mean,frechet_proxy\n";
  for (const auto& s : rows) {
    out << degrade::kind_name(s.task) << ',' << s.method.name() << ',' << s.steps << ',' << s.images << ','
        << s.failures << ',' << s.feature_mmd.mean << ',' << s.feature_mmd.std << ',' << s.psnr.mean << ','
        << s.frechet << '\n';
  }
  finish(out, path);
}

ExperimentResult run_experiment(const ExperimentConfig& config, const Models& models,
                                const ExperimentOptions& options, const Log& log) {
  config.validate();
  const Provenance prov{config_hash(config), models.provenance()};
  const auto images = eval_images(config);
  fs::create_directories(config.output);
  ExperimentResult result;

  if (options.table) {
    for (Kind task : config.tasks) {
      for (const auto& method : config.methods) {
        if (log) log("table: " + std::string(degrade::kind_name(task)) + " / " + method.name());
        result.table.push_back(evaluate_method(config, models, task, method, config.solver_steps, images));
        if (options.dump_images) {
          const fs::path dir =
              config.output / "reconstructions" / std::string(degrade::kind_name(task)) / method.name();
          for (const auto& r : result.table.back().per_image) {
            if (!r.ok) continue;
            char name[32];
            std::snprintf(name, sizeof name, "img_%05zu", r.image);
            write_pgm(dir / (std::string(name) + ".pgm"), r.reconstruction);
            write_raw(dir / (std::string(name) + ".f64"), r.reconstruction);
          }
        }
      }
    }
    result.table_csv = config.output / "table.csv";
    result.per_image_csv = config.output / "per_image.csv";
    write_table_csv(result.table_csv, result.table, prov);
    write_per_image_csv(result.per_image_csv, result.table, prov);
  }

  if (options.sweep) {
    const std::vector<Tensor> subset(images.begin(),
                                     images.begin() + static_cast<std::ptrdiff_t>(std::min(config.sweep_images,
                                                                                            images.size())));
    for (std::size_t steps : config.sweep_steps) {
      for (const auto& method : {Method{config.sweep_solver, std::nullopt},
                                 Method{config.sweep_solver, solve::Regularizer::repa}}) {
        if (log) log("sweep: T=" + std::to_string(steps) + " / " + method.name());
        result.sweep.push_back(evaluate_method(config, models, config.sweep_task, method, steps, subset));
      }
    }
    result.sweep_csv = config.output / "sweep.csv";
    write_sweep_csv(result.sweep_csv, result.sweep, prov);
  }

  nlohmann::json summary{{"config_hash", prov.config_hash},
                         {"checkpoints",
                          {{"autoencoder", models.ae_hash}, {"flow", models.flow_hash}, {"head", models.head_hash}}},
                         {"config", canonical_config(config)},
                         {"table", nlohmann::json::array()},
                         {"sweep", nlohmann::json::array()}};
  for (const auto& s : result.table) summary["table"].push_back(summary_json(s));
  for (const auto& s : result.sweep) summary["sweep"].push_back(summary_json(s));
  result.summary_json = config.output / "summary.json";
  std::ofstream out(result.summary_json);
  out << summary.dump(2) << '\n';
  if (!out) throw ConfigError("write failed: " + result.summary_json.string());
  return result;
}

}  // namespace repa::harness
