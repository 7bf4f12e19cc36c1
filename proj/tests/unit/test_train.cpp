#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "doctest.h"
#include "repa/diffcore/ops.hpp"
#include "repa/errors.hpp"
#include "repa/nets/checkpoint.hpp"
#include "repa/train/adam.hpp"
#include "repa/train/dataset.hpp"
#include "repa/train/losses.hpp"
#include "repa/train/trainer.hpp"

using namespace repa::train;
using repa::Rng;
namespace d = repa::diffcore;
namespace n = repa::nets;
namespace fs = std::filesystem;

namespace {

n::VelocityConfig small_latent() {
  n::VelocityConfig c = n::VelocityConfig::latent();
  c.token_dim = 8;
  c.hidden = 12;
  c.blocks = 3;
  c.tap = 2;
  c.time_features = 8;
  return c;
}

n::HeadConfig small_head() {
  n::HeadConfig h;
  h.input_dim = 8;
  h.hidden = 10;
  h.output_dim = 6;
  return h;
}

// Latent-sized toy data with unit-norm per-patch "features".
FlowData toy_data(std::size_t m, std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  FlowData data{rng.normal({m, 64}), rng.normal({m, 16 * 6}), rng.normal({k, 64})};
  for (double& v : data.train.data()) v = 0.5 * v + 0.3;
  for (double& v : data.heldout.data()) v = 0.5 * v + 0.3;
  for (std::size_t r = 0; r < m * 16; ++r) {
    double* f = data.train_features.ptr() + r * 6;
    double s = 0.0;
    for (int j = 0; j < 6; ++j) s += f[j] * f[j];
    for (int j = 0; j < 6; ++j) f[j] /= std::sqrt(s);
  }
  return data;
}

void randomize(n::ParameterSet& p, std::uint64_t seed, double sd = 0.3) {
  Rng rng(seed);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!p.trainable(i)) continue;
    for (double& v : p.value(i).data()) v = sd * rng.normal();
  }
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("sprites are deterministic, prefix stable and in range") {
  const auto a = make_sprites(7, 6);
  const auto b = make_sprites(7, 6);
  const auto tail = make_sprites(7, 3, {}, 3);
  for (std::size_t i = 0; i < 6; ++i) {
    REQUIRE(a[i].shape() == d::Shape{32, 32});
    CHECK(a[i] == b[i]);
    double lo = 1.0, hi = 0.0;
    for (double v : a[i].data()) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    CHECK(lo >= 0.0);
    CHECK(hi <= 1.0);
    CHECK(hi - lo > 0.1);  // not flat
  }
  for (std::size_t i = 0; i < 3; ++i) CHECK(tail[i] == a[i + 3]);
  CHECK(make_sprite(8, 0) != a[0]);
  CHECK(heldout_seed(7) != 7);

  const Tensor m = stack_rows(a);
  CHECK(m.shape() == d::Shape{6, 1024});
  CHECK(row(m, 4, {32, 32}) == a[4]);
}

TEST_CASE("flow matching loss") {
  const auto sched = repa::schedule::InterpolantSchedule::linear();
  Rng rng(3);
  const Tensor x0 = rng.normal({5, 64});

  SUBCASE("exact target gives zero") {
    const FlowBatch b = sample_batch(sched, x0, rng);
    d::Graph g;
    CHECK(flow_matching_loss(g.constant(b.target), b.target).value().item() == 0.0);
  }

  SUBCASE("zero model equals the mean of (eps - x)^2 on the same draws") {
    n::VelocityModel model(small_latent(), 11);  // zero-initialized output layer
    Rng a(99), b(99);
    const double loss = flow_matching_loss(model, x0, sched, a);
    // replay the draws: t per row, then eps
    for (std::size_t r = 0; r < 5; ++r) b.uniform();
    const Tensor eps = b.normal({5, 64});
    double direct = 0.0;
    for (std::size_t i = 0; i < x0.size(); ++i) direct += (eps[i] - x0[i]) * (eps[i] - x0[i]);
    direct /= static_cast<double>(x0.size());
    CHECK(loss == doctest::Approx(direct).epsilon(1e-12));

    // and matches E||eps - x||^2 / dim = 1 + mean x^2 to sampling error
    double mc = 0.0;
    const int reps = 400;
    for (int k = 0; k < reps; ++k) mc += flow_matching_loss(model, x0, sched, a) / reps;
    double x2 = 0.0;
    for (double v : x0.data()) x2 += v * v;
    x2 /= static_cast<double>(x0.size());
    CHECK(std::abs(mc - (1.0 + x2)) < 0.03);
  }

  SUBCASE("non-negative and empty batch rejected") {
    n::VelocityModel model(small_latent(), 12);
    randomize(model.params(), 4);
    for (int k = 0; k < 5; ++k) CHECK(flow_matching_loss(model, x0, sched, rng) >= 0.0);
    CHECK_THROWS_AS(sample_batch(sched, Tensor({0, 64}), rng), repa::ShapeError);
  }
}

TEST_CASE("repa loss range and extremes") {
  Rng rng(5);
  Tensor f = rng.normal({12, 6});
  d::Graph g;
  CHECK(repa_loss(g.constant(f), f).value().item() == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(repa_loss(g.constant(-2.5 * f), f).value().item() == doctest::Approx(1.0).epsilon(1e-12));

  Tensor e1({4, 3}), e2({4, 3});
  for (std::size_t r = 0; r < 4; ++r) {
    e1.at(r, r % 3) = 1.0;
    e2.at(r, (r + 1) % 3) = 2.0;
  }
  CHECK(std::abs(repa_loss(g.constant(e2), e1).value().item()) < 1e-15);

  for (int k = 0; k < 20; ++k) {
    const double v = repa_loss(g.constant(rng.normal({12, 6})), f).value().item();
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
  CHECK_THROWS_AS(repa_loss(g.constant(rng.normal({12, 5})), f), repa::ShapeError);
}

TEST_CASE("total loss gradient matches finite differences") {
  const auto sched = repa::schedule::InterpolantSchedule::linear();
  n::VelocityModel model(small_latent(), 21);
  n::ProjectionHead head(small_head(), 22);
  randomize(model.params(), 23, 0.2);
  randomize(head.params(), 24, 0.3);
  const FlowData data = toy_data(3, 1, 25);
  Rng rng(26);
  const FlowBatch b = sample_batch(sched, data.train, rng);
  const Tensor feats = data.train_features.reshaped({3 * 16, 6});
  const double w = 0.5;

  auto objective = [&](d::Graph& g, const n::Binding& pm, const n::Binding& ph) {
    auto fwd = model.forward(pm, g.constant(b.x_t), b.t);
    return d::add(flow_matching_loss(fwd.velocity, b.target),
                  d::scale(repa_loss(head.forward(ph, fwd.tap), feats), w));
  };
  auto value = [&] {
    d::Graph g;
    n::Binding pm(g, model.params(), false), ph(g, head.params(), false);
    return objective(g, pm, ph).value().item();
  };

  d::Graph g;
  n::Binding pm(g, model.params(), true), ph(g, head.params(), true);
  std::vector<d::Var> wrt(pm.vars());
  wrt.insert(wrt.end(), ph.vars().begin(), ph.vars().end());
  const auto grads = g.gradient(objective(g, pm, ph), wrt);

  Rng pick(27);
  int checked = 0;
  while (checked < 10) {
    const bool in_head = pick.uniform() < 0.3;
    n::ParameterSet& p = in_head ? head.params() : model.params();
    const std::size_t arr = static_cast<std::size_t>(pick.integer(0, static_cast<std::int64_t>(p.size()) - 1));
    if (!p.trainable(arr)) continue;
    Tensor& t = p.value(arr);
    const std::size_t j = static_cast<std::size_t>(pick.integer(0, static_cast<std::int64_t>(t.size()) - 1));
    const double analytic = grads[(in_head ? model.params().size() : 0) + arr][j];
    const double h = 1e-5, keep = t[j];
    t[j] = keep + h;
    const double up = value();
    t[j] = keep - h;
    const double down = value();
    t[j] = keep;
    const double fd = (up - down) / (2 * h);
    INFO(p.name(arr), "[", j, "] analytic ", analytic, " fd ", fd);
    CHECK(std::abs(analytic - fd) <= 1e-3 * std::max(std::abs(fd), 1e-4));
    ++checked;
  }
}

TEST_CASE("adam step matches the bias-corrected update") {
  n::ParameterSet p;
  p.add("w", Tensor({2}, {1.0, -2.0}));
  p.add("fixed", Tensor({1}, {5.0}), false);
  Adam opt(p, {0.1, 0.9, 0.999, 1e-8});
  opt.step(p, {Tensor({2}, {0.5, -3.0}), Tensor({1}, {100.0})});
  // first step: m_hat = g, v_hat = g^2, so the update is lr * g / (|g| + eps)
  CHECK(p.value(0)[0] == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8)).epsilon(1e-14));
  CHECK(p.value(0)[1] == doctest::Approx(-2.0 + 0.1 * 3.0 / (3.0 + 1e-8)).epsilon(1e-14));
  CHECK(p.value(1)[0] == 5.0);
  opt.step(p, {Tensor({2}, {0.5, -3.0}), Tensor({1})});
  CHECK(p.value(0)[0] == doctest::Approx(1.0 - 0.2 * 0.5 / (0.5 + 1e-8)).epsilon(1e-12));
  CHECK(opt.steps() == 2);
}

TEST_CASE("flow training is deterministic and makes progress") {
  const FlowData data = toy_data(96, 48, 31);
  TrainConfig cfg;
  cfg.steps = 150;
  cfg.batch = 16;
  cfg.lr = 3e-3;
  cfg.tap = 2;
  auto a = train_flow(cfg, small_latent(), small_head(), data);
  auto b = train_flow(cfg, small_latent(), small_head(), data);
  CHECK(a.log.heldout_final < a.log.heldout_initial);
  REQUIRE(a.log.steps.size() == 150);

  const fs::path dir = fs::temp_directory_path() / "repa_test_train";
  fs::remove_all(dir);
  n::save_model(dir / "a", a.model);
  n::save_model(dir / "b", b.model);
  n::save_model(dir / "ha", a.head);
  n::save_model(dir / "hb", b.head);
  CHECK(file_bytes(dir / "a.f32") == file_bytes(dir / "b.f32"));
  CHECK(file_bytes(dir / "ha.f32") == file_bytes(dir / "hb.f32"));
  a.log.write_csv(dir / "log.csv");
  std::ifstream csv(dir / "log.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "step,flow_loss,repa_loss,total_loss");
  fs::remove_all(dir);
}

TEST_CASE("w_repa only changes the path after the first optimizer step") {
  const FlowData data = toy_data(32, 16, 41);
  TrainConfig cfg;
  cfg.steps = 1;
  cfg.batch = 8;
  cfg.tap = 2;
  cfg.w_repa = 0.0;
  auto base = train_flow(cfg, small_latent(), small_head(), data);
  cfg.w_repa = 0.5;
  auto aligned = train_flow(cfg, small_latent(), small_head(), data);

  CHECK(base.log.heldout_initial == aligned.log.heldout_initial);
  CHECK(base.log.steps[0].flow == aligned.log.steps[0].flow);
  CHECK(base.log.steps[0].repa == aligned.log.steps[0].repa);
  bool differs = false;
  for (std::size_t i = 0; i < base.model.params().size(); ++i) {
    differs = differs || base.model.params().value(i) != aligned.model.params().value(i);
  }
  CHECK(differs);

  cfg.steps = 2;
  auto a2 = train_flow(cfg, small_latent(), small_head(), data);
  cfg.w_repa = 0.0;
  auto b2 = train_flow(cfg, small_latent(), small_head(), data);
  CHECK(a2.log.steps[1].flow != b2.log.steps[1].flow);
}

TEST_CASE("train config validation and divergence") {
  TrainConfig cfg;
  cfg.w_repa = -0.1;
  CHECK_THROWS_AS(cfg.validate(), repa::ConfigError);
  cfg = {};
  cfg.optimizer = "sgd";
  CHECK_THROWS_AS(cfg.validate(), repa::ConfigError);
  cfg = {};
  cfg.schedule = "nope";
  CHECK_THROWS(cfg.validate());

  FlowData data = toy_data(8, 4, 51);
  data.train[3] = std::nan("");
  cfg = {};
  cfg.steps = 5;
  cfg.batch = 8;
  cfg.tap = 2;
  CHECK_THROWS_AS(train_flow(cfg, small_latent(), small_head(), data), repa::NumericalError);
}

TEST_CASE("autoencoder training reduces reconstruction error") {
  const Tensor train = stack_rows(make_sprites(61, 128));
  const Tensor held = stack_rows(make_sprites(heldout_seed(61), 32));
  AeTrainConfig cfg;
  cfg.steps = 120;
  cfg.batch = 16;
  auto out = train_autoencoder(cfg, {}, train, held);
  CHECK(out.ae.trained());
  CHECK(out.log.steps.back().flow < out.log.steps.front().flow);
  CHECK(out.median_psnr > 15.0);

  // standardized training latents: per-dimension mean 0, sd 1 (to float rounding)
  const Tensor z = encode_rows(out.ae, train);
  for (std::size_t j = 0; j < 4; ++j) {
    double m = 0.0, s = 0.0;
    for (std::size_t i = 0; i < 128; ++i) m += z.at(i, j) / 128.0;
    for (std::size_t i = 0; i < 128; ++i) s += (z.at(i, j) - m) * (z.at(i, j) - m) / 127.0;
    CHECK(std::abs(m) < 1e-5);
    CHECK(std::sqrt(s) == doctest::Approx(1.0).epsilon(1e-4));
  }
}
