#pragma once
// Patch-token velocity network u = G1(G2(x, t)). The state is viewed as an
// H x W grid, cut into side x side patches (N tokens of dimension D2), and
// passed through residual blocks of token mixing and per-token perceptrons.
// The activation after block `tap` is the internal representation h_t.

#include <span>
#include <utility>
#include <vector>

#include "repa/nets/params.hpp"
#include "repa/schedule/prior.hpp"

namespace repa::nets {

struct VelocityConfig {
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t patch = 8;
  std::size_t token_dim = 64;
  std::size_t blocks = 6;
  std::size_t tap = 3;
  std::size_t hidden = 128;
  std::size_t time_features = 32;

  // 32x32 images, 8x8 patches.
  static VelocityConfig pixel();
  // 64-dim latents viewed as 8x8, 2x2 patches.
  static VelocityConfig latent();

  std::size_t tokens() const { return (height / patch) * (width / patch); }
  std::size_t state_size() const { return height * width; }
  void validate() const;
};

struct VelocityOutput {
  Var velocity;  // [B, H*W]
  Var tap;       // [B*N, D2]
};

class VelocityModel {
 public:
  VelocityModel(const VelocityConfig& config, std::uint64_t seed);

  const VelocityConfig& config() const noexcept { return config_; }
  ParameterSet& params() noexcept { return params_; }
  const ParameterSet& params() const noexcept { return params_; }

  // x: [B, H*W]; t: one time per batch row.
  VelocityOutput forward(const Binding& binding, Var x, std::span<const double> t) const;
  // Tokens after the per-patch embedding, before any mixing.
  Var embed(const Binding& binding, Var x) const;

  // Single state of any shape with H*W elements: (v with x's shape, h_t [N, D2]).
  std::pair<Tensor, Tensor> velocity_and_tap(const Tensor& x, double t) const;

 private:
  Tensor time_features(std::span<const double> t) const;

  VelocityConfig config_;
  ParameterSet params_;
  std::size_t embed_weight_ = 0, embed_bias_ = 0, position_ = 0;
  Dense time1_, time2_;
  struct Block {
    Dense time;
    std::size_t mix = 0;
    Dense mlp1, mlp2;
  };
  std::vector<Block> blocks_;
  Dense out_;
};

// Adapter exposing a velocity model as a flow prior over states of a fixed
// shape. Parameters are bound as constants: gradients flow to the state only.
class ModelPrior final : public schedule::FlowPrior {
 public:
  ModelPrior(const VelocityModel& model, schedule::InterpolantSchedule schedule, Shape state_shape);

  const schedule::InterpolantSchedule& schedule() const override { return schedule_; }
  Shape state_shape() const override { return shape_; }
  schedule::PriorOutput evaluate(Graph& graph, Var state, double t) const override;
  const VelocityModel& model() const noexcept { return *model_; }

 private:
  const VelocityModel* model_;
  schedule::InterpolantSchedule schedule_;
  Shape shape_;
};

}  // namespace repa::nets
