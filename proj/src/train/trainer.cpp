#include "repa/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "repa/diffcore/ops.hpp"
#include "repa/errors.hpp"
#include "repa/train/adam.hpp"
#include "repa/train/losses.hpp"

namespace repa::train {

namespace d = repa::diffcore;
using nets::Binding;
using nets::ParameterSet;

namespace {

enum Stream : std::uint64_t { kModelInit = 10, kHeadInit = 11, kBatches = 12, kHeldout = 13, kAeInit = 20, kAeBatches = 21 };

// Trainable inputs of a binding, for Graph::gradient.
std::vector<d::Var> trainable_vars(const Binding& b, const ParameterSet& p) {
  std::vector<d::Var> out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.trainable(i)) out.push_back(b[i]);
  }
  return out;
}

// Scatter gradients of trainable arrays back to full parameter order.
std::vector<Tensor> scatter(const ParameterSet& p, std::vector<Tensor>::const_iterator& it) {
  std::vector<Tensor> full(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.trainable(i)) full[i] = *it++;
  }
  return full;
}

Tensor gather_rows(const Tensor& m, std::span<const std::size_t> idx) {
  const std::size_t k = m.dim(1);
  Tensor out({idx.size(), k});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    std::copy(m.ptr() + idx[r] * k, m.ptr() + (idx[r] + 1) * k, out.ptr() + r * k);
  }
  return out;
}

void check_finite(double v, const char* what, std::size_t step) {
  if (!std::isfinite(v)) {
    throw NumericalError(std::string("training diverged: ") + what + " is non-finite at step " + std::to_string(step));
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (batch == 0 || steps == 0) throw ConfigError("train: batch and steps must be positive");
  if (!(lr > 0.0)) throw ConfigError("train: lr must be positive");
  if (!(w_repa >= 0.0)) throw ConfigError("train: w_repa must be >= 0");
  if (tap == 0) throw ConfigError("train: tap must be >= 1");
  if (optimizer != "adam") throw ConfigError("train: unsupported optimizer '" + optimizer + "' (expected adam)");
  schedule::InterpolantSchedule::by_name(schedule);
}

void TrainLog::write_csv(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "step,flow_loss,repa_loss,total_loss\n" << std::setprecision(10);
  for (const auto& s : steps) out << s.step << ',' << s.flow << ',' << s.repa << ',' << s.total << '\n';
}

double heldout_flow_loss(const nets::VelocityModel& model, const Tensor& heldout,
                         const schedule::InterpolantSchedule& schedule, std::uint64_t seed) {
  if (heldout.rank() != 2 || heldout.dim(0) == 0) throw ShapeError("heldout_flow_loss: empty set");
  Rng rng(Rng::derive(seed, kHeldout));
  const std::size_t n = heldout.dim(0), chunk = 128;
  double total = 0.0;
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t len = std::min(chunk, n - start);
    std::vector<std::size_t> idx(len);
    for (std::size_t i = 0; i < len; ++i) idx[i] = start + i;
    total += flow_matching_loss(model, gather_rows(heldout, idx), schedule, rng) * static_cast<double>(len);
  }
  return total / static_cast<double>(n);
}

FlowModels train_flow(const TrainConfig& config, nets::VelocityConfig model_config,
                      const nets::HeadConfig& head_config, const FlowData& data, const Progress& progress) {
  config.validate();
  model_config.tap = config.tap;
  const auto sched = schedule::InterpolantSchedule::by_name(config.schedule);
  const std::size_t m = data.train.dim(0), n = model_config.tokens(), d1 = head_config.output_dim;
  if (data.train.dim(1) != model_config.state_size()) throw ShapeError("train_flow: data dim != model state size");
  if (data.train_features.dim(0) != m || data.train_features.dim(1) != n * d1) {
    throw ShapeError("train_flow: features must be [M, N*D1] matching the model's patch grid");
  }
  if (head_config.input_dim != model_config.token_dim) throw ShapeError("train_flow: head input != token dim");

  FlowModels out{nets::VelocityModel(model_config, Rng::derive(config.seed, kModelInit)),
                 nets::ProjectionHead(head_config, Rng::derive(config.seed, kHeadInit)), {}};
  Adam opt_model(out.model.params(), {config.lr});
  Adam opt_head(out.head.params(), {config.lr});
  Rng rng(Rng::derive(config.seed, kBatches));
  out.log.heldout_initial = heldout_flow_loss(out.model, data.heldout, sched, config.seed);

  std::vector<std::size_t> idx(config.batch);
  for (std::size_t step = 1; step <= config.steps; ++step) {
    for (auto& i : idx) i = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(m) - 1));
    const Tensor x0 = gather_rows(data.train, idx);
    const Tensor feats = gather_rows(data.train_features, idx).reshaped({config.batch * n, d1});
    const FlowBatch b = sample_batch(sched, x0, rng);

    d::Graph g;
    Binding pm(g, out.model.params(), true);
    Binding ph(g, out.head.params(), true);
    auto fwd = out.model.forward(pm, g.constant(b.x_t), b.t);
    d::Var fm = flow_matching_loss(fwd.velocity, b.target);
    d::Var tokens = config.w_repa > 0.0 ? fwd.tap : g.constant(fwd.tap.value(), "stopped_tap");
    d::Var rl = repa_loss(out.head.forward(ph, tokens), feats);
    d::Var objective = config.w_repa > 0.0 ? d::add(fm, d::scale(rl, config.w_repa)) : d::add(fm, rl);

    StepRecord rec{step, fm.value().item(), rl.value().item(), 0.0};
    rec.total = rec.flow + config.w_repa * rec.repa;
    check_finite(rec.total, "loss", step);

    auto wrt = trainable_vars(pm, out.model.params());
    const auto head_vars = trainable_vars(ph, out.head.params());
    wrt.insert(wrt.end(), head_vars.begin(), head_vars.end());
    const auto grads = g.gradient(objective, wrt);
    auto it = grads.cbegin();
    const auto gm = scatter(out.model.params(), it);
    const auto gh = scatter(out.head.params(), it);
    opt_model.step(out.model.params(), gm);
    opt_head.step(out.head.params(), gh);

    out.log.steps.push_back(rec);
    if (progress) progress(rec);
  }
  out.model.params().round_to_float();
  out.head.params().round_to_float();
  out.log.heldout_final = heldout_flow_loss(out.model, data.heldout, sched, config.seed);
  return out;
}

Tensor encode_rows(const nets::Autoencoder& ae, const Tensor& images) {
  const std::size_t n = images.dim(0), chunk = 256;
  Tensor out({n, ae.config().latent});
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t len = std::min(chunk, n - start);
    std::vector<std::size_t> idx(len);
    for (std::size_t i = 0; i < len; ++i) idx[i] = start + i;
    d::Graph g;
    Binding b(g, ae.params(), false);
    const Tensor z = ae.encode(b, g.constant(gather_rows(images, idx))).value();
    std::copy(z.data().begin(), z.data().end(), out.ptr() + start * ae.config().latent);
  }
  return out;
}

std::vector<double> reconstruction_mse(const nets::Autoencoder& ae, const Tensor& images) {
  const std::size_t n = images.dim(0), k = images.dim(1);
  const Tensor z = encode_rows(ae, images);
  d::Graph g;
  Binding b(g, ae.params(), false);
  const Tensor rec = ae.decode(b, g.constant(z)).value();
  std::vector<double> mse(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double e = rec.at(i, j) - images.at(i, j);
      s += e * e;
    }
    mse[i] = s / static_cast<double>(k);
  }
  return mse;
}

AeModels train_autoencoder(const AeTrainConfig& config, const nets::AutoencoderConfig& ae_config,
                           const Tensor& train, const Tensor& heldout, const Progress& progress) {
  if (config.batch == 0 || config.steps == 0 || !(config.lr > 0.0)) throw ConfigError("train-ae: invalid config");
  if (train.rank() != 2 || train.dim(1) != ae_config.image_size()) throw ShapeError("train-ae: data shape mismatch");
  AeModels out{nets::Autoencoder(ae_config, Rng::derive(config.seed, kAeInit)), {}, 0.0};
  Adam opt(out.ae.params(), {config.lr});
  Rng rng(Rng::derive(config.seed, kAeBatches));
  std::vector<std::size_t> idx(config.batch);
  const auto m = static_cast<std::int64_t>(train.dim(0));
  for (std::size_t step = 1; step <= config.steps; ++step) {
    for (auto& i : idx) i = static_cast<std::size_t>(rng.integer(0, m - 1));
    const Tensor x = gather_rows(train, idx);
    d::Graph g;
    Binding b(g, out.ae.params(), true);
    d::Var rec = out.ae.decode_raw(b, out.ae.encode_raw(b, g.constant(x)));
    d::Var loss = d::mean(d::square(d::sub(rec, g.constant(x))));
    StepRecord r{step, loss.value().item(), 0.0, loss.value().item()};
    check_finite(r.total, "reconstruction loss", step);
    const auto grads = g.gradient(loss, trainable_vars(b, out.ae.params()));
    auto it = grads.cbegin();
    opt.step(out.ae.params(), scatter(out.ae.params(), it));
    out.log.steps.push_back(r);
    if (progress) progress(r);
  }

  // standardize latents with training-set statistics
  out.ae.set_latent_stats(Tensor::full({ae_config.latent}, 0.0), Tensor::full({ae_config.latent}, 1.0));
  const Tensor codes = encode_rows(out.ae, train);
  const std::size_t n = codes.dim(0), dim = codes.dim(1);
  Tensor mean({dim}), sd({dim});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j) mean[j] += codes.at(i, j);
  }
  for (double& v : mean.data()) v /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j) sd[j] += (codes.at(i, j) - mean[j]) * (codes.at(i, j) - mean[j]);
  }
  for (double& v : sd.data()) v = std::max(std::sqrt(v / static_cast<double>(n > 1 ? n - 1 : 1)), 1e-6);
  out.ae.set_latent_stats(mean, sd);
  out.ae.params().round_to_float();

  auto mse = reconstruction_mse(out.ae, heldout);
  std::vector<double> psnr(mse.size());
  for (std::size_t i = 0; i < mse.size(); ++i) psnr[i] = mse[i] > 0.0 ? std::min(99.0, -10.0 * std::log10(mse[i])) : 99.0;
  std::nth_element(psnr.begin(), psnr.begin() + psnr.size() / 2, psnr.end());
  out.median_psnr = psnr[psnr.size() / 2];
  double mean_mse = 0.0;
  for (double v : mse) mean_mse += v / static_cast<double>(mse.size());
  out.log.heldout_final = mean_mse;
  return out;
}

}  // namespace repa::train
