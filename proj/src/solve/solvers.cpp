#include "repa/solve/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>

#include "repa/diffcore/ops.hpp"
#include "repa/errors.hpp"
#include "repa/nets/checkpoint.hpp"
#include "repa/schedule/schedule.hpp"
#include "repa/simd.hpp"

namespace repa::solve {

namespace d = repa::diffcore;

namespace {

enum Stream : std::uint64_t { kInit = 1, kResample = 2 };

void require_finite(const Tensor& g, const char* what, double t) {
  if (!g.all_finite()) {
    throw NumericalError(std::string("solver: non-finite ") + what + " at t=" + std::to_string(t));
  }
}

// sum_n cos(proxy^[n], candidate^[n]) on the tape.
Var alignment_score(Graph& g, const schedule::PriorOutput& out, Var decoded, const AlignmentTarget& a) {
  if (!a.proxy) throw ShapeError("alignment: missing proxy features");
  Var candidate;
  if (a.kind == Regularizer::repa) {
    if (!a.head) throw ConfigError("alignment: REPA regularizer needs a projection head");
    if (!out.tap) throw ConfigError("alignment: prior exposes no internal features");
    nets::Binding hb(g, a.head->params(), false);
    candidate = a.head->forward(hb, *out.tap);
  } else {
    if (!a.encoder) throw ConfigError("alignment: feature-space regularizer needs an encoder");
    candidate = a.encoder->encode(g, decoded);
  }
  if (candidate.shape() != a.proxy->shape()) {
    throw ShapeError("alignment: features " + d::shape_string(candidate.shape()) + " vs proxy " +
                     d::shape_string(a.proxy->shape()));
  }
  return d::sum(d::cosine_rows(g.constant(*a.proxy, "proxy"), candidate));
}

double residual_norm(const Decoder& decoder, const degrade::DegradationOp& op, const Tensor& y, const Tensor& z,
                     Tensor* grad) {
  Graph g;
  Var zv = g.input(z, "state");
  Var r = d::sub(op.forward(g, decoder.decode(g, zv)), g.constant(y, "measurement"));
  Var half = d::scale(d::sum(d::square(r)), 0.5);
  if (grad) *grad = g.gradient(half, zv);
  return std::sqrt(2.0 * half.value().item());
}

}  // namespace

std::string_view solver_name(SolverKind kind) {
  switch (kind) {
    case SolverKind::pixel_dps: return "pixel-dps";
    case SolverKind::latent_dps: return "latent-dps";
    case SolverKind::resample: return "resample";
  }
  return "?";
}

SolverKind parse_solver(std::string_view name) {
  if (name == "pixel-dps") return SolverKind::pixel_dps;
  if (name == "latent-dps") return SolverKind::latent_dps;
  if (name == "resample") return SolverKind::resample;
  throw ConfigError("unknown solver '" + std::string(name) + "' (expected pixel-dps, latent-dps or resample)");
}

std::string_view regularizer_name(Regularizer r) { return r == Regularizer::repa ? "repa" : "feature-space"; }

Regularizer parse_regularizer(std::string_view name) {
  if (name == "repa") return Regularizer::repa;
  if (name == "feature-space") return Regularizer::feature_space;
  throw ConfigError("unknown regularizer '" + std::string(name) + "' (expected repa or feature-space)");
}

void SolverConfig::validate() const {
  if (steps == 0) throw ConfigError("solver: steps must be >= 1");
  if (!(kappa > 0.0)) throw ConfigError("solver: kappa must be positive");
  if (!(lambda >= 0.0)) throw ConfigError("solver: lambda must be >= 0");
  for (std::size_t k : resample_steps) {
    if (k < 1 || k > steps) throw ConfigError("solver: resample step " + std::to_string(k) + " outside 1.." + std::to_string(steps));
  }
  if (kind == SolverKind::resample) {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("solver: gamma must lie in (0,1]");
    if (inner_iterations == 0 || !(inner_step > 0.0)) throw ConfigError("solver: invalid inner solver budget");
  } else if (!resample_steps.empty()) {
    throw ConfigError("solver: resample steps are only valid for the resample solver");
  }
}

std::vector<std::size_t> default_resample_steps(std::size_t steps) {
  const std::size_t stride = std::max<std::size_t>(1, steps / 10);
  std::vector<std::size_t> out;
  for (std::size_t k = stride; 2 * k <= steps; k += stride) out.push_back(k);
  return out;
}

std::string state_hash(const Tensor& state) {
  const auto* bytes = reinterpret_cast<const unsigned char*>(state.ptr());
  return nets::sha256_hex(std::span(bytes, state.size() * sizeof(double))).substr(0, 16);
}

void SolverTrace::write_csv(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "step,t,state_hash,residual,repa_score,eta\n" << std::setprecision(12);
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& s = steps[i];
    out << i + 1 << ',' << s.t << ',' << s.state_hash << ',' << s.residual << ',' << s.repa_score << ',' << s.eta
        << '\n';
  }
}

GuidanceEval evaluate_guidance(const Problem& p, const Tensor& z, double t, bool data_grad,
                               const AlignmentTarget* align) {
  const auto& sched = p.prior->schedule();
  Graph g;
  Var zv = g.input(z, "state");
  const auto out = p.prior->evaluate(g, zv, t);
  Var z0 = schedule::denoised_estimate(sched, zv, out.velocity, t);
  Var x0 = p.decoder->decode(g, z0);
  Var loss = d::sum(d::square(d::sub(p.op->forward(g, x0), g.constant(p.y, "measurement"))));

  GuidanceEval ev{out.velocity.value(), z0.value(), x0.value(), std::sqrt(loss.value().item()), {}, 0.0, {}};
  if (data_grad) {
    ev.data_grad = g.gradient(loss, zv);
    require_finite(ev.data_grad, "measurement gradient", t);
  }
  if (align) {
    Var score = alignment_score(g, out, x0, *align);
    ev.score = score.value().item();
    ev.score_grad = g.gradient(score, zv);
    require_finite(ev.score_grad, "alignment gradient", t);
  }
  return ev;
}

Tensor latent_dps_step(const Problem& p, const Tensor& z, double t, double dt, double eta) {
  if (!(eta >= 0.0)) throw ConfigError("latent_dps_step: eta must be >= 0");
  const GuidanceEval ev = evaluate_guidance(p, z, t, eta > 0.0, nullptr);
  Tensor next = z - dt * ev.velocity;
  if (eta > 0.0) simd::axpy(-eta, ev.data_grad.ptr(), next.ptr(), next.size());
  return next;
}

Tensor repa_step(const schedule::FlowPrior& prior, const nets::ProjectionHead& head, const Tensor& proxy,
                 const Tensor& z, double t, double lambda) {
  if (!(lambda >= 0.0)) throw ConfigError("repa_step: lambda must be >= 0");
  if (lambda == 0.0) return z;
  Graph g;
  Var zv = g.input(z, "state");
  const auto out = prior.evaluate(g, zv, t);
  AlignmentTarget a{Regularizer::repa, &proxy, &head, nullptr};
  const Tensor grad = g.gradient(alignment_score(g, out, Var(), a), zv);
  require_finite(grad, "alignment gradient", t);
  Tensor next = z;
  simd::axpy(lambda, grad.ptr(), next.ptr(), next.size());
  return next;
}

Tensor feature_space_variant_step(const schedule::FlowPrior& prior, const Decoder& decoder,
                                  const nets::FeatureEncoder& encoder, const Tensor& y_features, const Tensor& z,
                                  double t, double lambda) {
  if (!(lambda >= 0.0)) throw ConfigError("feature_space_variant_step: lambda must be >= 0");
  if (lambda == 0.0) return z;
  Graph g;
  Var zv = g.input(z, "state");
  const auto out = prior.evaluate(g, zv, t);
  Var x0 = decoder.decode(g, schedule::denoised_estimate(prior.schedule(), zv, out.velocity, t));
  AlignmentTarget a{Regularizer::feature_space, &y_features, nullptr, &encoder};
  const Tensor grad = g.gradient(alignment_score(g, out, x0, a), zv);
  require_finite(grad, "alignment gradient", t);
  Tensor next = z;
  simd::axpy(lambda, grad.ptr(), next.ptr(), next.size());
  return next;
}

std::pair<Tensor, double> consistency_solve(const Decoder& decoder, const degrade::DegradationOp& op,
                                            const Tensor& y, const Tensor& z0, std::size_t iterations,
                                            double step) {
  Tensor z = z0, grad;
  double current = residual_norm(decoder, op, y, z, &grad);
  Tensor best = z;
  double best_res = current;
  for (std::size_t i = 0; i < iterations; ++i) {
    if (!grad.all_finite()) throw NumericalError("consistency solve: non-finite gradient at iteration " + std::to_string(i));
    simd::axpy(-step, grad.ptr(), z.ptr(), z.size());
    current = residual_norm(decoder, op, y, z, i + 1 < iterations ? &grad : nullptr);
    if (!std::isfinite(current)) throw NumericalError("consistency solve diverged at iteration " + std::to_string(i + 1));
    if (current < best_res) {
      best_res = current;
      best = z;
    }
  }
  return {best, best_res};
}

Tensor stochastic_resample(const schedule::InterpolantSchedule& s, const Tensor& z0, const Tensor& z_prev,
                           const Tensor& anchor, double t_prev, double gamma, Rng& rng) {
  if (z0.shape() != z_prev.shape() || anchor.shape() != z0.shape()) throw ShapeError("stochastic_resample: shape mismatch");
  const double a = s.alpha(t_prev), sg = s.sigma(t_prev);
  const Tensor eps = rng.normal(z0.shape());
  if (sg == 0.0) return z0;
  Tensor out(z0.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double implied = (z_prev[i] - a * anchor[i]) / sg;
    out[i] = a * z0[i] + sg * (gamma * eps[i] + (1.0 - gamma) * implied);
  }
  return out;
}

SolverTrace run_solver(const SolverConfig& cfg, const Problem& p) {
  cfg.validate();
  if (!p.prior || !p.decoder || !p.op) throw ConfigError("solver: prior, decoder and operator are required");
  if (p.y.shape() != p.op->output_shape()) {
    throw ShapeError("solver: measurement shape " + d::shape_string(p.y.shape()) + " vs operator output " +
                     d::shape_string(p.op->output_shape()));
  }
  const bool regularize = cfg.lambda > 0.0;
  if (regularize && !p.encoder) throw ConfigError("solver: lambda > 0 needs a feature encoder");
  if (regularize && cfg.regularizer == Regularizer::repa && !p.head) throw ConfigError("solver: REPA needs a head");
  // The score is reported whenever it can be computed; it never feeds back when lambda = 0.
  const bool scored = p.encoder && (cfg.regularizer == Regularizer::feature_space || p.head);

  const auto& sched = p.prior->schedule();
  const std::size_t T = cfg.steps;
  const double dt = 1.0 / static_cast<double>(T);
  Rng init(Rng::derive(cfg.seed, kInit));
  Rng renoise(Rng::derive(cfg.seed, kResample));
  const std::set<std::size_t> C(cfg.resample_steps.begin(), cfg.resample_steps.end());

  SolverTrace trace;
  Tensor fixed_proxy;
  if (scored && cfg.proxy == ProxyRule::measurement) {
    fixed_proxy = proxy_features(ProxyRule::measurement, *p.op, p.y, nullptr, *p.encoder).rows;
    if (p.reference) {
      const Tensor clean = p.encoder->encode(*p.reference).rows;
      trace.approx_err = d::squared_norm(clean - fixed_proxy) / static_cast<double>(clean.dim(0));
    }
  }

  Tensor z = init.normal(p.prior->state_shape());
  for (std::size_t k = T; k >= 1; --k) {
    const double t = static_cast<double>(k) / static_cast<double>(T);
    const double t_prev = static_cast<double>(k - 1) / static_cast<double>(T);

    std::optional<AlignmentTarget> align;
    GuidanceEval ev;
    Tensor proxy = fixed_proxy;
    if (scored && cfg.proxy == ProxyRule::denoised) {
      ev = evaluate_guidance(p, z, t, true, nullptr);
      proxy = proxy_features(ProxyRule::denoised, *p.op, p.y, &ev.decoded, *p.encoder).rows;
    }
    if (scored) align = AlignmentTarget{cfg.regularizer, &proxy, p.head, p.encoder};
    const bool align_here = align && !(regularize && cfg.reevaluate_regularizer);
    if (scored && cfg.proxy == ProxyRule::denoised) {
      if (align_here) {
        const GuidanceEval a = evaluate_guidance(p, z, t, false, &*align);
        ev.score = a.score;
        ev.score_grad = a.score_grad;
      }
    } else {
      ev = evaluate_guidance(p, z, t, true, align_here ? &*align : nullptr);
    }

    const double eta = step_size(cfg.schedule, cfg.kappa, schedule::clamp_for_score(t), ev.residual);
    Tensor next = z - dt * ev.velocity;
    if (C.count(k)) {
      auto [z_tilde, after] = consistency_solve(*p.decoder, *p.op, p.y, ev.denoised, cfg.inner_iterations, cfg.inner_step);
      trace.consistency.push_back({t, ev.residual, after});
      next = stochastic_resample(sched, z_tilde, next, ev.denoised, t_prev, cfg.gamma, renoise);
    }
    simd::axpy(-eta, ev.data_grad.ptr(), next.ptr(), next.size());

    double score = std::numeric_limits<double>::quiet_NaN();
    if (align_here) score = ev.score;
    if (regularize) {
      Tensor grad = ev.score_grad;
      if (cfg.reevaluate_regularizer) {
        const GuidanceEval a = evaluate_guidance(p, next, t, false, &*align);
        grad = a.score_grad;
        score = a.score;
      }
      simd::axpy(cfg.lambda, grad.ptr(), next.ptr(), next.size());
    }
    require_finite(next, "state", t);
    const double n_tokens = proxy.rank() == 2 ? static_cast<double>(proxy.dim(0)) : 1.0;
    trace.steps.push_back({t, state_hash(next), ev.residual, score / n_tokens, eta});
    z = std::move(next);
  }

  trace.final_state = z;
  trace.reconstruction = p.decoder->decode(z);
  for (double& v : trace.reconstruction.data()) v = std::clamp(v, 0.0, 1.0);
  return trace;
}

SolverTrace pixel_dps(SolverConfig config, const Problem& problem) {
  config.kind = SolverKind::pixel_dps;
  return run_solver(config, problem);
}

SolverTrace latent_dps(SolverConfig config, const Problem& problem) {
  config.kind = SolverKind::latent_dps;
  return run_solver(config, problem);
}

SolverTrace resample_repa(SolverConfig config, const Problem& problem) {
  config.kind = SolverKind::resample;
  return run_solver(config, problem);
}

}  // namespace repa::solve
