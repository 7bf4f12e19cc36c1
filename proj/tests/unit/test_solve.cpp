#include <Eigen/Dense>
#include <cmath>

#include "doctest.h"
#include "repa/diffcore/ops.hpp"
#include "repa/errors.hpp"
#include "repa/nets/velocity_model.hpp"
#include "repa/schedule/integrate.hpp"
#include "repa/solve/solvers.hpp"

using namespace repa::solve;
using repa::Rng;
namespace d = repa::diffcore;
namespace n = repa::nets;
namespace s = repa::schedule;
namespace deg = repa::degrade;

namespace {

const auto kLinear = s::InterpolantSchedule::linear();

void randomize(n::ParameterSet& p, std::uint64_t seed, double sd) {
  Rng rng(seed);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!p.trainable(i)) continue;
    for (double& v : p.value(i).data()) v = sd * rng.normal();
  }
}

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
  h.output_dim = 32;
  return h;
}

deg::DegradationOp identity_op(std::size_t h, std::size_t w) {
  return deg::DegradationOp::blur(deg::Kind::gaussblur, h, w, d::Tensor({1, 1}, {1.0}), 0.0);
}

Eigen::MatrixXd dense_operator(const deg::DegradationOp& op) {
  const std::size_t in = op.height() * op.width();
  const std::size_t out = d::shape_size(op.output_shape());
  Eigen::MatrixXd a(out, in);
  for (std::size_t j = 0; j < in; ++j) {
    d::Tensor e(op.input_shape());
    e[j] = 1.0;
    const d::Tensor col = op.forward(e);
    for (std::size_t i = 0; i < out; ++i) a(i, j) = col[i];
  }
  return a;
}

Eigen::VectorXd vec(const d::Tensor& t) { return Eigen::Map<const Eigen::VectorXd>(t.ptr(), t.size()); }

d::Tensor measure(const deg::DegradationOp& op, const d::Tensor& x, double noise, Rng& rng) {
  d::Tensor y = op.forward(x);
  for (double& v : y.data()) v += noise * rng.normal();
  return y;
}

// A latent model with trained-looking random weights, a small autoencoder and a head.
struct LatentFixture {
  n::VelocityModel model{small_latent(), 3};
  n::ProjectionHead head{small_head(), 4};
  n::Autoencoder ae{{32, 32, 24, 64}, 5};
  n::FeatureEncoder encoder;
  deg::DegradationOp op = deg::DegradationOp::desk(deg::Kind::gaussblur);
  n::ModelPrior prior{model, kLinear, {64}};
  LatentFixture() {
    randomize(model.params(), 6, 0.25);
    randomize(head.params(), 7, 0.3);
    ae.set_latent_stats(d::Tensor::full({64}, 0.0), d::Tensor::full({64}, 1.0));
    for (std::size_t i = 0; i < ae.params().size(); ++i) {
      if (!ae.params().trainable(i)) continue;
      Rng rng(100 + i);
      auto& t = ae.params().value(i);
      const double sd = t.dim(0) == 1 ? 0.1 : 1.0 / std::sqrt(static_cast<double>(t.dim(0)));
      for (double& v : t.data()) v = sd * rng.normal();
    }
  }
};

}  // namespace

TEST_CASE("step sizes") {
  CHECK(step_size(StepSchedule::snr, 2.0, 0.5, 0.0) == 2.0);
  CHECK(step_size(StepSchedule::snr, 2.0, 0.8, 0.0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(step_size(StepSchedule::snr, 2.0, 0.1, 0.0) == 2.0);
  CHECK(step_size(StepSchedule::inverse_norm, 7.75, 0.3, 7.75) == 1.0);
  CHECK(step_size(StepSchedule::inverse_norm, 1.0, 0.3, 0.0) == doctest::Approx(1e8));
  CHECK_THROWS_AS(step_size(StepSchedule::snr, 2.0, 1.0, 0.0), repa::ShapeError);
  CHECK_THROWS_AS(step_size(StepSchedule::snr, 0.0, 0.5, 0.0), repa::ConfigError);
  CHECK_THROWS_AS(step_size(StepSchedule::inverse_norm, 1.0, 0.5, -1.0), repa::ShapeError);
  CHECK(parse_schedule("inverse-norm") == StepSchedule::inverse_norm);
  CHECK(schedule_name(parse_schedule("snr")) == "snr");
  CHECK_THROWS_AS(parse_schedule("cosine"), repa::ConfigError);
}

TEST_CASE("proxy features") {
  n::FeatureEncoder enc;
  Rng rng(1);
  d::Tensor x({32, 32});
  for (double& v : x.data()) v = rng.uniform();

  const auto id = identity_op(32, 32);
  CHECK(proxy_features(ProxyRule::measurement, id, id.forward(x), nullptr, enc).rows == enc.encode(x).rows);

  const auto sr = deg::DegradationOp::desk(deg::Kind::superres);
  const d::Tensor y = sr.forward(x);
  CHECK(proxy_features(ProxyRule::measurement, sr, y, nullptr, enc).rows ==
        enc.encode(sr.measurement_image(y)).rows);
  CHECK_THROWS_AS(proxy_features(ProxyRule::measurement, sr, x, nullptr, enc), repa::ShapeError);

  CHECK(proxy_features(ProxyRule::denoised, sr, y, &x, enc).rows == enc.encode(x).rows);
  CHECK_THROWS_AS(proxy_features(ProxyRule::denoised, sr, y, nullptr, enc), repa::ShapeError);
  CHECK(parse_proxy("denoised") == ProxyRule::denoised);
}

TEST_CASE("decoders") {
  Rng rng(2);
  const d::Tensor m = rng.normal({6, 3}), b = rng.normal({6});
  LinearDecoder dec(m, b, {2, 3});
  const d::Tensor z = rng.normal({3});
  const d::Tensor x = dec.decode(z);
  REQUIRE(x.shape() == d::Shape{2, 3});
  for (std::size_t i = 0; i < 6; ++i) {
    double e = b[i];
    for (std::size_t j = 0; j < 3; ++j) e += m.at(i, j) * z[j];
    CHECK(x[i] == doctest::Approx(e).epsilon(1e-14));
  }
  IdentityDecoder idd({2, 3});
  CHECK(idd.decode(x) == x);
  CHECK_THROWS_AS(idd.decode(z), repa::ShapeError);
  n::Autoencoder untrained({32, 32, 16, 8}, 1);
  CHECK_THROWS_AS(AutoencoderDecoder{untrained}, repa::NumericalError);
}

TEST_CASE("latent DPS step without guidance is the prior ODE step") {
  LatentFixture f;
  Rng rng(3);
  const d::Tensor z = rng.normal({64});
  const d::Tensor y = f.op.forward(AutoencoderDecoder(f.ae).decode(z));
  AutoencoderDecoder dec(f.ae);
  Problem p{&f.prior, &dec, &f.op, y};
  CHECK(latent_dps_step(p, z, 0.6, 0.02, 0.0) == s::ode_step(f.prior, z, 0.6, 0.02));
  CHECK(latent_dps_step(p, z, 0.6, 0.02, 0.5) != s::ode_step(f.prior, z, 0.6, 0.02));
  CHECK_THROWS_AS(latent_dps_step(p, z, 0.6, 0.02, -1.0), repa::ConfigError);
}

TEST_CASE("guidance gradients match finite differences along a run") {
  LatentFixture f;
  AutoencoderDecoder dec(f.ae);
  Rng rng(4);
  d::Tensor x({32, 32});
  for (double& v : x.data()) v = rng.uniform();
  const d::Tensor y = measure(f.op, x, 0.01, rng);
  const d::Tensor proxy = proxy_features(ProxyRule::measurement, f.op, y, nullptr, f.encoder).rows;
  Problem p{&f.prior, &dec, &f.op, y, &f.head, &f.encoder};

  d::Tensor z = Rng(5).normal({64});
  const std::size_t T = 12;
  for (std::size_t k = T; k >= 1; --k) {
    const double t = static_cast<double>(k) / T;
    if (k == 11 || k == 7 || k == 2) {
      for (Regularizer kind : {Regularizer::repa, Regularizer::feature_space}) {
        AlignmentTarget a{kind, &proxy, &f.head, &f.encoder};
        const GuidanceEval ev = evaluate_guidance(p, z, t, true, &a);
        for (int dir = 0; dir < 3; ++dir) {
          const d::Tensor u = rng.normal({64});
          const double h = 1e-5;
          const GuidanceEval up = evaluate_guidance(p, z + h * u, t, false, &a);
          const GuidanceEval dn = evaluate_guidance(p, z - h * u, t, false, &a);
          const double fd_data = (up.residual * up.residual - dn.residual * dn.residual) / (2 * h);
          const double fd_score = (up.score - dn.score) / (2 * h);
          const double an_data = d::inner(ev.data_grad, u), an_score = d::inner(ev.score_grad, u);
          INFO("t=", t, " regularizer ", regularizer_name(kind));
          CHECK(std::abs(an_data - fd_data) <= 1e-3 * std::abs(fd_data));
          CHECK(std::abs(an_score - fd_score) <= 1e-3 * std::max(std::abs(fd_score), 1e-6));
        }
      }
    }
    z = latent_dps_step(p, z, t, 1.0 / T, 0.05);
  }
}

TEST_CASE("repa step") {
  LatentFixture f;
  Rng rng(6);
  const d::Tensor z = rng.normal({64});
  const d::Tensor proxy = n::FeatureEncoder().encode(AutoencoderDecoder(f.ae).decode(z)).rows;

  SUBCASE("lambda 0 is the identity") {
    CHECK(repa_step(f.prior, f.head, proxy, z, 0.5, 0.0) == z);
    CHECK_THROWS_AS(repa_step(f.prior, f.head, proxy, z, 0.5, -0.1), repa::ConfigError);
  }

  SUBCASE("perfect alignment is stationary") {
    d::Graph g;
    auto out = f.prior.evaluate(g, g.constant(z), 0.4);
    const d::Tensor aligned = f.head.project(out.tap->value());
    const d::Tensor moved = repa_step(f.prior, f.head, aligned, z, 0.4, 0.7);
    CHECK(d::max_abs_diff(moved, z) < 1e-9);
  }

  SUBCASE("small steps increase the alignment score") {
    auto score = [&](const d::Tensor& state, double t, const d::Tensor& c) {
      d::Graph g;
      auto out = f.prior.evaluate(g, g.constant(state), t);
      const d::Tensor proj = f.head.project(out.tap->value());
      return d::cosine_rows(g.constant(c), g.constant(proj)).value();
    };
    int up = 0;
    for (int i = 0; i < 200; ++i) {
      const d::Tensor zi = rng.normal({64});
      const double t = rng.uniform(0.05, 0.95);
      const d::Tensor c = rng.normal({16, 32});
      const double before = d::sum(d::Graph().constant(score(zi, t, c))).value().item();
      (void)before;
      d::Tensor sb = score(zi, t, c), sa = score(repa_step(f.prior, f.head, c, zi, t, 1e-3), t, c);
      double b = 0, a = 0;
      for (double v : sb.data()) b += v;
      for (double v : sa.data()) a += v;
      up += a > b;
    }
    CHECK(up >= 198);
  }
}

TEST_CASE("feature-space variant uses a distinct mechanism") {
  LatentFixture f;
  AutoencoderDecoder dec(f.ae);
  Rng rng(7);
  const d::Tensor z = rng.normal({64});
  const double t = 0.5;
  d::Graph g;
  auto out = f.prior.evaluate(g, g.constant(z), t);
  const d::Tensor aligned = f.head.project(out.tap->value());

  const d::Tensor yfeat = rng.normal({16, 32});
  CHECK(feature_space_variant_step(f.prior, dec, f.encoder, yfeat, z, t, 0.0) == z);
  // At a state where the REPA gradient vanishes the feature-space one does not.
  CHECK(d::max_abs_diff(repa_step(f.prior, f.head, aligned, z, t, 1.0), z) < 1e-9);
  const d::Tensor moved = feature_space_variant_step(f.prior, dec, f.encoder, yfeat, z, t, 1.0);
  CHECK(d::max_abs_diff(moved, z) > 1e-6);
}

TEST_CASE("pixel and latent DPS approach the Gaussian posterior mean") {
  // Prior N(mu, s^2 I) on 16x16 images (pixel) or N(0, I) on 16 latents with an
  // affine decoder (latent); blur with noise. Oracle: normal equations.
  const std::size_t h = 16, w = 16, dim = h * w;
  const auto op = deg::DegradationOp::blur(deg::Kind::gaussblur, h, w, deg::gaussian_kernel(5, 1.0), 0.05);
  const Eigen::MatrixXd A = dense_operator(op);
  const double sd = 0.15, noise = 0.05;
  d::Tensor mu({h, w});
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j) mu.at(i, j) = 0.5 + 0.2 * std::sin(0.4 * i) * std::cos(0.3 * j);

  SUBCASE("pixel") {
    // Noise-dominated regime. With prior spread above the noise level even an
    // exact posterior sample lies farther from the mean than y does.
    const double sd = 0.05, noise = 0.1;
    s::GaussianPrior prior(kLinear, mu, sd);
    IdentityDecoder dec({h, w});
    const Eigen::MatrixXd K = sd * sd * A * A.transpose() + noise * noise * Eigen::MatrixXd::Identity(dim, dim);
    const Eigen::LDLT<Eigen::MatrixXd> solver(K);
    int wins = 0;
    for (int r = 0; r < 100; ++r) {
      Rng rng(1000 + r);
      const d::Tensor x = mu + sd * rng.normal({h, w});
      const d::Tensor y = measure(op, x, noise, rng);
      const Eigen::VectorXd post = vec(mu) + sd * sd * A.transpose() * solver.solve(vec(y) - A * vec(mu));
      SolverConfig cfg;
      cfg.kind = SolverKind::pixel_dps;
      cfg.steps = 50;
      cfg.kappa = 0.25;
      cfg.seed = r;
      const SolverTrace tr = pixel_dps(cfg, {&prior, &dec, &op, y});
      const double d_sol = (vec(tr.final_state) - post).norm(), d_y = (vec(y) - post).norm();
      wins += d_sol < d_y;
    }
    CHECK(wins >= 95);
  }

  SUBCASE("latent") {
    const std::size_t ld = 16;
    Rng mr(77);
    const d::Tensor M = (sd / std::sqrt(double(ld))) * mr.normal({dim, ld});
    LinearDecoder dec(M, mu.reshaped({dim}), {h, w});
    s::GaussianPrior prior(kLinear, d::Tensor({ld}), 1.0);
    const Eigen::MatrixXd Me = Eigen::Map<const Eigen::Matrix<double, -1, -1, Eigen::RowMajor>>(M.ptr(), dim, ld);
    const Eigen::MatrixXd B = A * Me;
    const Eigen::LDLT<Eigen::MatrixXd> normal(B.transpose() * B + noise * noise * Eigen::MatrixXd::Identity(ld, ld));
    int wins = 0;
    for (int r = 0; r < 100; ++r) {
      Rng rng(2000 + r);
      const d::Tensor zt = rng.normal({ld});
      const d::Tensor y = measure(op, dec.decode(zt), noise, rng);
      const Eigen::VectorXd zpost = normal.solve(B.transpose() * (vec(y) - A * vec(mu)));
      const Eigen::VectorXd post = Me * zpost + vec(mu);
      SolverConfig cfg;
      cfg.steps = 50;
      cfg.kappa = 1.0;
      cfg.seed = r;
      const SolverTrace tr = latent_dps(cfg, {&prior, &dec, &op, y});
      const double d_sol = (vec(dec.decode(tr.final_state)) - post).norm(), d_y = (vec(y) - post).norm();
      wins += d_sol < d_y;
    }
    CHECK(wins >= 95);
  }
}

TEST_CASE("identity operator: residual settles over the final quarter") {
  const std::size_t ld = 8, h = 8, w = 8;
  Rng mr(9);
  LinearDecoder dec(0.2 * mr.normal({h * w, ld}), d::Tensor::full({h * w}, 0.5), {h, w});
  s::GaussianPrior prior(kLinear, d::Tensor({ld}), 1.0);
  const auto op = identity_op(h, w);
  int ok = 0;
  for (int r = 0; r < 50; ++r) {
    Rng rng(300 + r);
    const d::Tensor y = dec.decode(rng.normal({ld}));
    SolverConfig cfg;
    cfg.steps = 40;
    cfg.kappa = 0.05;  // ||M||^2 is about 4.7
    cfg.seed = r;
    const SolverTrace tr = latent_dps(cfg, {&prior, &dec, &op, y});
    bool mono = true;
    for (std::size_t i = 30; i + 1 < tr.steps.size(); ++i) mono = mono && tr.steps[i + 1].residual <= tr.steps[i].residual;
    ok += mono;
  }
  CHECK(ok >= 45);
}

TEST_CASE("solver reductions, determinism and resampling") {
  LatentFixture f;
  AutoencoderDecoder dec(f.ae);
  Rng rng(10);
  d::Tensor x({32, 32});
  for (double& v : x.data()) v = rng.uniform();
  const d::Tensor y = measure(f.op, x, 0.01, rng);
  Problem base{&f.prior, &dec, &f.op, y};
  Problem full{&f.prior, &dec, &f.op, y, &f.head, &f.encoder, &x};

  SolverConfig cfg;
  cfg.steps = 20;
  cfg.kappa = 0.1;
  cfg.seed = 3;
  auto hashes = [](const SolverTrace& t) {
    std::vector<std::string> h;
    for (const auto& s : t.steps) h.push_back(s.state_hash);
    return h;
  };
  const SolverTrace plain = latent_dps(cfg, base);
  REQUIRE(plain.steps.size() == 20);
  CHECK(std::isnan(plain.steps[0].repa_score));
  CHECK(plain.reconstruction.shape() == d::Shape{32, 32});
  for (double v : plain.reconstruction.data()) CHECK((v >= 0.0 && v <= 1.0));

  SUBCASE("lambda 0 with a head is bitwise the base solver") {
    const SolverTrace scored = latent_dps(cfg, full);
    CHECK(hashes(scored) == hashes(plain));
    CHECK(scored.final_state == plain.final_state);
    CHECK(std::abs(scored.steps[5].repa_score) <= 1.0);
    CHECK(scored.approx_err > 0.0);
    cfg.proxy = ProxyRule::denoised;
    CHECK(hashes(latent_dps(cfg, full)) == hashes(plain));
  }

  SUBCASE("resample without steps and lambda 0 is latent DPS") {
    CHECK(hashes(resample_repa(cfg, base)) == hashes(plain));
  }

  SUBCASE("deterministic, and lambda changes the path") {
    cfg.lambda = 0.05;
    const SolverTrace a = latent_dps(cfg, full), b = latent_dps(cfg, full);
    CHECK(hashes(a) == hashes(b));
    CHECK(hashes(a) != hashes(plain));
    cfg.reevaluate_regularizer = true;
    CHECK(hashes(latent_dps(cfg, full)) != hashes(a));
    cfg.reevaluate_regularizer = false;
    cfg.regularizer = Regularizer::feature_space;
    CHECK(hashes(latent_dps(cfg, full)) != hashes(a));
  }

  SUBCASE("consistency solves never increase the residual") {
    cfg.resample_steps = default_resample_steps(cfg.steps);
    cfg.lambda = 0.02;
    const SolverTrace tr = resample_repa(cfg, full);
    CHECK(tr.consistency.size() == cfg.resample_steps.size());
    for (const auto& c : tr.consistency) CHECK(c.residual_after <= c.residual_before);
    CHECK(hashes(resample_repa(cfg, full)) == hashes(tr));
  }

  SUBCASE("seed changes the initial noise") {
    cfg.seed = 4;
    CHECK(hashes(latent_dps(cfg, base)) != hashes(plain));
  }
}

TEST_CASE("stochastic resample and default step set") {
  CHECK(default_resample_steps(50) == std::vector<std::size_t>{5, 10, 15, 20, 25});
  CHECK(default_resample_steps(10) == std::vector<std::size_t>{1, 2, 3, 4, 5});
  CHECK(default_resample_steps(1).empty());

  Rng rng(11);
  const d::Tensor z0 = rng.normal({5}), anchor = rng.normal({5});
  const double t = 0.3, a = kLinear.alpha(t), sg = kLinear.sigma(t);
  const d::Tensor eps = rng.normal({5});
  d::Tensor prev(z0.shape());
  for (std::size_t i = 0; i < 5; ++i) prev[i] = a * anchor[i] + sg * eps[i];
  // gamma = 1: fresh noise only
  Rng r1(12), r2(12);
  const d::Tensor fresh = stochastic_resample(kLinear, z0, prev, anchor, t, 1.0, r1);
  const d::Tensor noise = r2.normal({5});
  for (std::size_t i = 0; i < 5; ++i) CHECK(fresh[i] == doctest::Approx(a * z0[i] + sg * noise[i]).epsilon(1e-14));
  // tiny gamma: carries the implied noise of prev
  Rng r3(12);
  const d::Tensor carried = stochastic_resample(kLinear, z0, prev, anchor, t, 1e-12, r3);
  for (std::size_t i = 0; i < 5; ++i) CHECK(carried[i] == doctest::Approx(a * z0[i] + sg * eps[i]).epsilon(1e-9));
  Rng r4(12);
  CHECK(stochastic_resample(kLinear, z0, prev, anchor, 0.0, 0.4, r4) == z0);
}

TEST_CASE("solver config validation") {
  SolverConfig c;
  c.steps = 0;
  CHECK_THROWS_AS(c.validate(), repa::ConfigError);
  c = {};
  c.lambda = -1;
  CHECK_THROWS_AS(c.validate(), repa::ConfigError);
  c = {};
  c.resample_steps = {3};
  CHECK_THROWS_AS(c.validate(), repa::ConfigError);  // not a resample solver
  c.kind = SolverKind::resample;
  c.resample_steps = {0};
  CHECK_THROWS_AS(c.validate(), repa::ConfigError);
  c.resample_steps = {3};
  c.gamma = 0.0;
  CHECK_THROWS_AS(c.validate(), repa::ConfigError);
  c.gamma = 0.4;
  CHECK_NOTHROW(c.validate());
  CHECK(parse_solver(solver_name(SolverKind::resample)) == SolverKind::resample);
  CHECK(parse_regularizer("feature-space") == Regularizer::feature_space);
  CHECK_THROWS_AS(parse_solver("daps"), repa::ConfigError);

  LatentFixture f;
  AutoencoderDecoder dec(f.ae);
  SolverConfig cfg;
  cfg.lambda = 0.1;
  const d::Tensor y = f.op.forward(d::Tensor({32, 32}));
  CHECK_THROWS_AS(latent_dps(cfg, {&f.prior, &dec, &f.op, y}), repa::ConfigError);
  CHECK_THROWS_AS(latent_dps(cfg, {&f.prior, &dec, &f.op, d::Tensor({8, 8})}), repa::ShapeError);
}
