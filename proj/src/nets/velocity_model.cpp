#include "repa/nets/velocity_model.hpp"

#include <cmath>
#include <string>

#include "repa/diffcore/ops.hpp"
#include "repa/errors.hpp"

namespace repa::nets {

namespace d = repa::diffcore;

VelocityConfig VelocityConfig::pixel() { return {}; }

VelocityConfig VelocityConfig::latent() {
  VelocityConfig c;
  c.height = 8;
  c.width = 8;
  c.patch = 2;
  return c;
}

void VelocityConfig::validate() const {
  if (patch == 0 || height % patch || width % patch) throw ShapeError("velocity model: patch must divide grid");
  if (token_dim == 0 || hidden == 0 || blocks == 0) throw ShapeError("velocity model: zero-sized layer");
  if (tap < 1 || tap > blocks) throw ShapeError("velocity model: tap layer outside 1..blocks");
  if (time_features < 2 || time_features % 2) throw ShapeError("velocity model: time_features must be even");
}

VelocityModel::VelocityModel(const VelocityConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const std::size_t k = config_.patch * config_.patch, n = config_.tokens(), dim = config_.token_dim;
  {
    const Dense e = add_dense(params_, "embed", k, dim, rng);
    embed_weight_ = e.weight;
    embed_bias_ = e.bias;
  }
  Tensor pos({n, dim});
  for (double& v : pos.data()) v = 0.02 * rng.normal();
  position_ = params_.add("position", std::move(pos));
  time1_ = add_dense(params_, "time.0", config_.time_features, dim, rng);
  time2_ = add_dense(params_, "time.1", dim, dim, rng);
  for (std::size_t l = 0; l < config_.blocks; ++l) {
    const std::string p = "block" + std::to_string(l);
    Block b;
    b.time = add_dense(params_, p + ".time", dim, dim, rng);
    b.mix = params_.add(p + ".mix", Tensor({n, n}));
    b.mlp1 = add_dense(params_, p + ".mlp.0", dim, config_.hidden, rng);
    b.mlp2 = add_dense(params_, p + ".mlp.1", config_.hidden, dim, rng, 0.3);
    blocks_.push_back(b);
  }
  out_ = add_dense(params_, "out", dim, k, rng, 0.0);
}

Tensor VelocityModel::time_features(std::span<const double> t) const {
  const std::size_t half = config_.time_features / 2;
  Tensor f({t.size(), config_.time_features});
  for (std::size_t b = 0; b < t.size(); ++b) {
    for (std::size_t i = 0; i < half; ++i) {
      const double freq = std::exp(-std::log(1000.0) * static_cast<double>(i) / static_cast<double>(half));
      const double a = 1000.0 * t[b] * freq;
      f.at(b, i) = std::sin(a);
      f.at(b, half + i) = std::cos(a);
    }
  }
  return f;
}

Var VelocityModel::embed(const Binding& binding, Var x) const {
  if (x.shape().size() != 2 || x.shape()[1] != config_.state_size()) {
    throw ShapeError("velocity model: expected [B, " + std::to_string(config_.state_size()) + "], got " +
                     d::shape_string(x.shape()));
  }
  Var tokens = d::patchify(x, config_.height, config_.width, config_.patch);
  Var h = d::add_tiled(d::matmul(tokens, binding[embed_weight_]), binding[embed_bias_]);
  return d::add_tiled(h, binding[position_]);
}

VelocityOutput VelocityModel::forward(const Binding& binding, Var x, std::span<const double> t) const {
  Var h = embed(binding, x);
  if (t.size() != x.shape()[0]) throw ShapeError("velocity model: one time per batch row required");
  Graph& g = binding.graph();
  Var te = g.constant(time_features(t), "time_features");
  te = d::gelu(apply(binding, time2_, d::gelu(apply(binding, time1_, te))));
  Var tap;
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const Block& b = blocks_[l];
    h = d::add_grouped(h, apply(binding, b.time, te));
    h = d::add(h, d::token_mix(binding[b.mix], h));
    h = d::add(h, apply(binding, b.mlp2, d::gelu(apply(binding, b.mlp1, h))));
    if (l + 1 == config_.tap) tap = h;
  }
  Var v = d::unpatchify(apply(binding, out_, h), config_.height, config_.width, config_.patch);
  return {v, tap};
}

std::pair<Tensor, Tensor> VelocityModel::velocity_and_tap(const Tensor& x, double t) const {
  if (x.size() != config_.state_size()) throw ShapeError("velocity_and_tap: state size mismatch");
  Graph g;
  Binding b(g, params_, false);
  const double ts[1] = {t};
  auto out = forward(b, g.constant(x.reshaped({1, x.size()})), ts);
  return {out.velocity.value().reshaped(x.shape()), out.tap.value()};
}

ModelPrior::ModelPrior(const VelocityModel& model, schedule::InterpolantSchedule schedule, Shape state_shape)
    : model_(&model), schedule_(schedule), shape_(std::move(state_shape)) {
  if (d::shape_size(shape_) != model.config().state_size()) throw ShapeError("ModelPrior: state shape mismatch");
}

schedule::PriorOutput ModelPrior::evaluate(Graph& graph, Var state, double t) const {
  if (state.shape() != shape_) throw ShapeError("ModelPrior: state shape mismatch");
  Binding b(graph, model_->params(), false);
  const double ts[1] = {t};
  auto out = model_->forward(b, d::reshape(state, {1, d::shape_size(shape_)}), ts);
  return {d::reshape(out.velocity, shape_), out.tap};
}

}  // namespace repa::nets
