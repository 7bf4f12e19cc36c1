#include "repa/harness/verify.hpp"

#include <algorithm>

#include "repa/errors.hpp"
#include "repa/harness/experiment.hpp"
#include "repa/rng.hpp"
#include "repa/schedule/schedule.hpp"

namespace repa::harness {

using nlohmann::json;
using degrade::Kind;

std::vector<theory::AlignmentTriple> sample_triples(const ExperimentConfig& config, const Models& models,
                                                    std::size_t count, std::uint64_t seed) {
  const auto images = heldout_images(config);
  if (images.empty()) throw ConfigError("sample_triples: no held-out images");
  Rng rng(seed);
  const Kind tasks[] = {Kind::gaussblur, Kind::superres};
  std::vector<theory::AlignmentTriple> out;
  for (std::size_t i = 0; i < count; ++i) {
    const Tensor& x = images[i % images.size()];
    const Kind task = tasks[i % 2];
    const Tensor y = measure(config, task, x, i);
    const Tensor x_bar = task_operator(config, task).measurement_image(y).reshaped(x.shape());
    const double scale = rng.uniform(0.0, 1.0);
    Tensor z = models.ae.encode(x);
    const Tensor eps = rng.normal(z.shape());
    z = z + scale * eps;
    Tensor x_hat = models.ae.decode(z).reshaped(x.shape());
    for (double& v : x_hat.data()) v = std::clamp(v, 0.0, 1.0);
    out.push_back({x, x_bar, x_hat});
  }
  return out;
}

FixtureSummary check_fixtures(std::size_t count, std::uint64_t seed) {
  FixtureSummary s;
  for (std::size_t i = 0; i < count; ++i) {
    const auto fixture = theory::make_linear_fixture({}, Rng::derive(seed, i));
    const double threshold = theory::lambda_threshold(fixture.jacobian, fixture.phi);
    const double lambdas[] = {0.5 * threshold, 10.0 * threshold};
    const auto report = theory::check_prop2(fixture, lambdas);
    const auto& half = report.checks[0];
    ++s.instances;
    s.holds += half.holds;
    s.contracting += half.c1 < 1.0;
    s.max_c1 = std::max(s.max_c1, half.c1);
    s.c1.push_back(half.c1);
    s.c2.push_back(half.c2);
    s.ratio.push_back(half.ratio);
    s.threshold.push_back(threshold);
    s.expanding_at_10x += report.checks[1].ratio > 1.0;
  }
  return s;
}

TheoryResult verify_theory(const ExperimentConfig& config, const Models& models, const TheoryOptions& options) {
  if (!config.encoder.normalize) throw ConfigError("verify-theory: the alignment bound needs normalized features");
  TheoryResult r;
  const auto sched = schedule::InterpolantSchedule::by_name(models.schedule);
  const theory::DiffEncoder de(models.flow, sched, &models.ae);
  const auto triples = sample_triples(config, models, options.triples, Rng::derive(options.seed, 1));
  r.prop1 = theory::check_prop1(triples, de, models.head, models.encoder);
  r.prop1_ok = r.prop1.holds() && r.prop1.min_step_slack >= -1e-12 && r.prop1.max_identity_error < 1e-12;

  r.fixture = check_fixtures(options.fixtures, Rng::derive(options.seed, 2));
  r.prop2_ok = r.fixture.holds == r.fixture.instances && r.fixture.contracting == r.fixture.instances;

  // Trained model: linear probe head, empirical ratios only.
  const auto held = heldout_images(config);
  const std::size_t probe = std::min<std::size_t>(held.size(), 64);
  const std::size_t n = models.encoder.tokens(), d2 = models.flow.config().token_dim, d1 = models.encoder.feature_dim();
  Tensor taps({probe * n, d2}), feats({probe * n, d1});
  for (std::size_t i = 0; i < probe; ++i) {
    const Tensor h = de.tap(held[i], 0.0), f = models.encoder.encode(held[i]).rows;
    std::copy(h.vec().begin(), h.vec().end(), taps.ptr() + i * n * d2);
    std::copy(f.vec().begin(), f.vec().end(), feats.ptr() + i * n * d1);
  }
  const auto head = theory::fit_linear_head(taps, feats, 1e-3);
  const auto prior = models.prior();
  Rng rng(Rng::derive(options.seed, 3));
  for (std::size_t i = 0; i < options.nonlinear_images && i < held.size(); ++i) {
    const Tensor& x = held[i];
    const Tensor z_star = de.state(x);
    const double t = 0.5;
    const Tensor z_t = schedule::corrupt(sched, z_star, rng.normal(z_star.shape()), t);
    const Tensor y = measure(config, Kind::gaussblur, x, i);
    const Tensor x_bar = task_operator(config, Kind::gaussblur).measurement_image(y);
    const double threshold = theory::lambda_threshold(theory::tap_jacobian(prior, z_t, t), head.phi());
    const double lambdas[] = {0.0, 0.25 * threshold, 0.5 * threshold, threshold};
    r.nonlinear.push_back(theory::check_prop2(prior, head, z_t, t, de.tap(x, 0.0), models.encoder.encode(x).rows,
                                              models.encoder.encode(x_bar).rows, lambdas));
  }
  return r;
}

json TheoryResult::to_json() const {
  json samples = json::array();
  for (const auto& s : prop1.samples) {
    samples.push_back({{"repa", s.repa},
                       {"mis_repa", s.mis_repa},
                       {"approx_err", s.approx_err},
                       {"mean_embedding_distance", s.mean_distance},
                       {"bound", s.bound},
                       {"residual", s.residual}});
  }
  json nl = json::array();
  for (const auto& rep : nonlinear) {
    json checks = json::array();
    for (const auto& c : rep.checks) {
      checks.push_back({{"lambda", c.lambda},
                        {"ratio", c.ratio},
                        {"c1", c.c1},
                        {"c2", c.c2},
                        {"gap_before", c.gap_before},
                        {"gap_after", c.gap_after},
                        {"bound", c.bound},
                        {"holds", c.holds}});
    }
    nl.push_back({{"threshold", rep.threshold}, {"checks", checks}});
  }
  return {{"alignment_bound",
           {{"samples", samples},
            {"min_residual", prop1.min_residual},
            {"violations", prop1.violations},
            {"min_step_slack", prop1.min_step_slack},
            {"max_identity_error", prop1.max_identity_error},
            {"mmd", prop1.mmd},
            {"mean_repa", prop1.mean_repa},
            {"mean_approx_err", prop1.mean_approx_err},
            {"mean_mis_repa", prop1.mean_mis_repa},
            {"expected_bound", prop1.expected_bound},
            {"expected_residual", prop1.expected_residual},
            {"ok", prop1_ok}}},
          {"contraction_fixture",
           {{"instances", fixture.instances},
            {"holds", fixture.holds},
            {"contracting", fixture.contracting},
            {"max_c1", fixture.max_c1},
            {"c1", fixture.c1},
            {"c2", fixture.c2},
            {"ratio", fixture.ratio},
            {"threshold", fixture.threshold},
            {"expanding_at_10x_threshold", fixture.expanding_at_10x},
            {"ok", prop2_ok}}},
          {"contraction_trained_model", nl}};
}

RobustnessResult robustness(const ExperimentConfig& config, std::size_t images) {
  ExperimentConfig c = config;
  c.images = images;
  const auto set = eval_images(c);
  RobustnessResult r;
  r.curve = theory::robustness_curve(set, theory::Ladder{}, nets::FeatureEncoder(config.encoder));
  r.monotone = r.curve.monotone();
  r.sr_default = r.curve.at(theory::Family::superres, 4.0);
  r.blur_default = r.curve.at(theory::Family::blur, 1.5);
  r.above_floor = r.sr_default > kRobustnessFloor && r.blur_default > kRobustnessFloor;
  return r;
}

}  // namespace repa::harness
