#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "repa/diffcore/ops.hpp"
#include "repa/errors.hpp"
#include "repa/rng.hpp"
#include "repa/schedule/integrate.hpp"

using namespace repa::schedule;
using repa::Rng;
using repa::diffcore::Tensor;

namespace {

// Joint-Gaussian conditioning of x0 ~ N(mu, s^2 I) on x_t = a x0 + b eps,
// done with dense matrices rather than the scalar closed form.
struct GaussianOracle {
  Eigen::VectorXd mu;
  double s;

  Eigen::VectorXd posterior_mean(const Eigen::VectorXd& x, double a, double b) const {
    const auto n = mu.size();
    const Eigen::MatrixXd cxx = Eigen::MatrixXd::Identity(n, n) * (a * a * s * s + b * b);
    const Eigen::MatrixXd c0x = Eigen::MatrixXd::Identity(n, n) * (a * s * s);
    return mu + c0x * cxx.ldlt().solve(x - a * mu);
  }
  Eigen::VectorXd score(const Eigen::VectorXd& x, double a, double b) const {
    const auto n = mu.size();
    const Eigen::MatrixXd cxx = Eigen::MatrixXd::Identity(n, n) * (a * a * s * s + b * b);
    return -cxx.ldlt().solve(x - a * mu);
  }
};

Eigen::VectorXd to_eigen(const Tensor& t) { return Eigen::Map<const Eigen::VectorXd>(t.ptr(), t.size()); }

double rel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

class ZeroPrior final : public FlowPrior {
 public:
  explicit ZeroPrior(Shape shape) : shape_(std::move(shape)) {}
  const InterpolantSchedule& schedule() const override { return sched_; }
  Shape state_shape() const override { return shape_; }
  PriorOutput evaluate(Graph& g, Var state, double) const override {
    return {g.constant(Tensor(state.shape())), std::nullopt};
  }

 private:
  InterpolantSchedule sched_ = InterpolantSchedule::linear();
  Shape shape_;
};

const InterpolantSchedule kSchedules[] = {InterpolantSchedule::linear(), InterpolantSchedule::cosine()};

}  // namespace

TEST_CASE("schedules satisfy their boundary conditions and monotonicity") {
  for (const auto& s : kSchedules) {
    CHECK(s.alpha(0.0) == 1.0);
    CHECK(s.sigma(0.0) == 0.0);
    CHECK(std::abs(s.alpha(1.0)) < 1e-15);
    CHECK(s.sigma(1.0) == 1.0);
    for (int i = 1; i <= 100; ++i) {
      const double t0 = (i - 1) / 100.0, t1 = i / 100.0;
      CHECK(s.alpha(t1) < s.alpha(t0));
      CHECK(s.sigma(t1) > s.sigma(t0));
    }
    for (int i = 1; i < 20; ++i) {
      const double t = i / 20.0, h = 1e-6;
      CHECK(s.dalpha(t) == doctest::Approx((s.alpha(t + h) - s.alpha(t - h)) / (2 * h)).epsilon(1e-8));
      CHECK(s.dsigma(t) == doctest::Approx((s.sigma(t + h) - s.sigma(t - h)) / (2 * h)).epsilon(1e-8));
      CHECK(std::abs(s.dalpha(t) * s.sigma(t) - s.alpha(t) * s.dsigma(t)) > 1e-6);
    }
  }
  CHECK(InterpolantSchedule::by_name("cosine").kind() == ScheduleKind::cosine);
  CHECK_THROWS_AS(InterpolantSchedule::by_name("vp"), repa::ConfigError);
}

TEST_CASE("corrupt and velocity target") {
  Rng rng(3);
  const Tensor x0 = rng.normal({5}), eps = rng.normal({5});
  for (const auto& s : kSchedules) {
    CHECK(corrupt(s, x0, eps, 0.0) == x0);
    CHECK(corrupt(s, x0, eps, 1.0) == eps);
  }
  const auto lin = InterpolantSchedule::linear();
  const Tensor r = corrupt(lin, Tensor::from({1, 0}), Tensor::from({0, 1}), 0.25);
  CHECK(r[0] == 0.75);
  CHECK(r[1] == 0.25);
  CHECK_THROWS_AS(corrupt(lin, x0, eps, 1.5), repa::ShapeError);
  CHECK_THROWS_AS(corrupt(lin, x0, Tensor::from({1}), 0.5), repa::ShapeError);

  for (double t : {0.0, 0.3, 1.0}) CHECK(max_abs_diff(velocity_target(lin, x0, eps, t), eps - x0) == 0.0);
  CHECK(squared_norm(velocity_target(lin, x0, x0, 0.4)) == 0.0);
  const auto cosv = velocity_target(InterpolantSchedule::cosine(), x0, eps, 0.0);
  CHECK(max_abs_diff(cosv, (std::numbers::pi / 2) * eps) < 1e-15);
}

TEST_CASE("score from velocity") {
  const auto lin = InterpolantSchedule::linear();
  Rng rng(5);
  for (double t : {0.1, 0.5, 0.9}) {
    // single point at the origin: p_t = N(0, t^2 I), exact v = x/t
    const Tensor x = rng.normal({4});
    const Tensor sc = score_from_velocity(lin, x, (1.0 / t) * x, t);
    CHECK(max_abs_diff(sc, (-1.0 / (t * t)) * x) < 1e-12);

    const Tensor x0 = rng.normal({4}), eps = rng.normal({4});
    const Tensor xt = corrupt(lin, x0, eps, t);
    const Tensor s2 = score_from_velocity(lin, xt, eps - x0, t);
    CHECK(max_abs_diff(s2, (-1.0 / t) * eps) < 1e-12);
  }
  for (const auto& s : kSchedules) {
    // alpha v == dalpha x makes the numerator vanish
    const double t = 0.37;
    const Tensor x = Tensor::from({0.4, -1.2});
    const Tensor v = (s.dalpha(t) / s.alpha(t)) * x;
    CHECK(squared_norm(score_from_velocity(s, x, v, t)) < 1e-28);
    CHECK_THROWS_AS(score_from_velocity(s, x, v, 0.0), repa::ShapeError);
    CHECK_THROWS_AS(score_from_velocity(s, x, v, 1.0), repa::ShapeError);
  }
  CHECK(clamp_for_score(0.0) == 1e-3);
  CHECK(clamp_for_score(1.0) == 1.0 - 1e-3);
  CHECK(clamp_for_score(0.5) == 0.5);
}

TEST_CASE("exact Gaussian field reproduces the analytic score and posterior mean") {
  Rng rng(11);
  const Tensor mu = rng.normal({6});
  const double s = 0.7;
  const GaussianOracle oracle{to_eigen(mu), s};
  for (const auto& sched : kSchedules) {
    GaussianPrior prior(sched, mu, s);
    for (int i = 1; i <= 19; ++i) {
      const double t = i / 20.0;
      const Tensor x = rng.normal({6});
      const Tensor v = prior.velocity(x, t);
      const auto want_score = oracle.score(to_eigen(x), sched.alpha(t), sched.sigma(t));
      const auto want_mean = oracle.posterior_mean(to_eigen(x), sched.alpha(t), sched.sigma(t));
      CHECK(rel(to_eigen(score_from_velocity(sched, x, v, t)), want_score) < 1e-8);
      CHECK(rel(to_eigen(denoised_estimate(sched, x, v, t)), want_mean) < 1e-8);
    }
  }
}

TEST_CASE("denoised estimate inverts the corruption") {
  Rng rng(17);
  for (const auto& s : kSchedules) {
    for (int i = 1; i <= 9; ++i) {
      const double t = i / 10.0;
      const Tensor x0 = rng.normal({8}), eps = rng.normal({8});
      const Tensor got = denoised_estimate(s, corrupt(s, x0, eps, t), velocity_target(s, x0, eps, t), t);
      CHECK(max_abs_diff(got, x0) < 1e-12);
    }
    const Tensor x = rng.normal({3});
    CHECK(denoised_estimate(s, x, rng.normal({3}), 0.0) == x);
  }
  // the linear denoiser stays defined at t = 1: x - v
  const auto lin = InterpolantSchedule::linear();
  const Tensor x = Tensor::from({1, 2}), v = Tensor::from({0.5, 0.5});
  CHECK(denoised_estimate(lin, x, v, 1.0) == Tensor::from({0.5, 1.5}));

  repa::diffcore::Graph g;
  auto xv = g.input(x), vv = g.input(v);
  auto d = denoised_estimate(lin, xv, vv, 0.25);
  CHECK(max_abs_diff(d.value(), denoised_estimate(lin, x, v, 0.25)) < 1e-15);
  auto grads = g.gradient(repa::diffcore::sum(d), std::vector{xv, vv});
  CHECK(grads[0] == Tensor::full({2}, 1.0));
  CHECK(grads[1] == Tensor::full({2}, -0.25));
}

TEST_CASE("ode step") {
  ZeroPrior zero({3});
  const Tensor x = Tensor::from({1, -2, 3});
  CHECK(ode_step(zero, x, 0.5, 0.1) == x);
  CHECK_THROWS_AS(ode_step(zero, x, 0.5, 0.0), repa::ShapeError);

  // single-point data at c
  const Tensor c = Tensor::from({0.3, -0.7, 1.1});
  GaussianPrior point(InterpolantSchedule::linear(), c, 0.0);
  Rng rng(2);
  const Tensor end = sample(point, rng.normal({3}), 200, Sampler::ode);
  CHECK(max_abs_diff(end, c) < 1e-2);

  // first-order global error against the closed-form flow map
  for (const auto& sched : kSchedules) {
    const Tensor mu = Tensor::from({0.5, -0.25});
    const double s = 0.5;
    GaussianPrior prior(sched, mu, s);
    const Tensor x1 = Tensor::from({1.3, 0.4});
    // exact transport from t=1 to 0, written out independently
    const double v1 = sched.alpha(1) * sched.alpha(1) * s * s + sched.sigma(1) * sched.sigma(1);
    Tensor exact({2});
    for (int i = 0; i < 2; ++i) exact[i] = mu[i] + s / std::sqrt(v1) * (x1[i] - sched.alpha(1) * mu[i]);
    CHECK(max_abs_diff(prior.transport(x1, 1.0, 0.0), exact) < 1e-14);
    double err[3];
    int k = 0;
    for (std::size_t steps : {50u, 100u, 200u}) {
      err[k++] = std::sqrt(squared_norm(sample(prior, x1, steps, Sampler::ode) - exact));
    }
    MESSAGE(sched.name(), " ode errors ", err[0], " ", err[1], " ", err[2]);
    CHECK(err[0] / err[1] == doctest::Approx(2.0).epsilon(0.15));
    CHECK(err[1] / err[2] == doctest::Approx(2.0).epsilon(0.15));
  }
}

TEST_CASE("sde step") {
  const auto lin = InterpolantSchedule::linear();
  GaussianPrior prior(lin, Tensor::from({1.0, -0.8}), 0.4);
  Rng init(9);
  const Tensor x1 = init.normal({2});
  {
    Rng a(1), b(1);
    Tensor xo = x1, xs = x1;
    for (std::size_t k = 0; k < 20; ++k) {
      const double t = (20 - k) / 20.0;
      xo = ode_step(prior, xo, t, 0.05);
      xs = sde_step(prior, xs, t, 0.05, 0.0, a);
    }
    CHECK(xo == xs);
    CHECK(a.next() == b.next());
  }
  {
    Rng a(42), b(42);
    CHECK(sample(prior, x1, 30, Sampler::sde, &a) == sample(prior, x1, 30, Sampler::sde, &b));
  }
  // marginal matching: endpoints of the stochastic sampler follow the data law
  Rng rng(2024);
  const int n = 4000;
  Eigen::MatrixXd ends(n, 2);
  for (int i = 0; i < n; ++i) {
    const Tensor e = sample(prior, rng.normal({2}), 400, Sampler::sde, &rng);
    ends(i, 0) = e[0];
    ends(i, 1) = e[1];
  }
  const Eigen::RowVectorXd m = ends.colwise().mean();
  const Eigen::MatrixXd centered = ends.rowwise() - m;
  const Eigen::MatrixXd cov = centered.transpose() * centered / (n - 1);
  const Eigen::Vector2d mu(1.0, -0.8);
  const Eigen::Matrix2d want = Eigen::Matrix2d::Identity() * 0.16;
  const double mean_err = (m.transpose() - mu).norm() / mu.norm();
  // total variance and correlation, each relative to the data variance
  const double var_err = std::abs(cov.trace() / want.trace() - 1.0);
  const double offdiag_err = std::abs(cov(0, 1)) / want(0, 0);
  MESSAGE("sde mean ", mean_err, " variance ", var_err, " off-diagonal ", offdiag_err);
  CHECK(mean_err < 0.05);
  CHECK(var_err < 0.05);
  CHECK(offdiag_err < 0.05);
  CHECK_THROWS_AS(sample(prior, x1, 10, Sampler::sde), repa::ShapeError);
}
