#include "repa/theory/prop2.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "repa/diffcore/ops.hpp"
#include "repa/errors.hpp"
#include "repa/nets/spectral.hpp"
#include "repa/rng.hpp"

namespace repa::theory {

namespace d = diffcore;
using Vec = std::vector<double>;

namespace {

// Columns of an orthonormal basis [rows, cols] from Gaussian draws.
Tensor random_orthonormal(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor q({rows, cols});
  for (std::size_t c = 0; c < cols; ++c) {
    Vec v(rows);
    for (;;) {
      for (double& x : v) x = rng.normal();
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t p = 0; p < c; ++p) {
          double dot = 0.0;
          for (std::size_t r = 0; r < rows; ++r) dot += v[r] * q.at(r, p);
          for (std::size_t r = 0; r < rows; ++r) v[r] -= dot * q.at(r, p);
        }
      }
      double n = 0.0;
      for (double x : v) n += x * x;
      n = std::sqrt(n);
      if (n > 1e-8) {
        for (std::size_t r = 0; r < rows; ++r) q.at(r, c) = v[r] / n;
        break;
      }
    }
  }
  return q;
}

// U diag(s) V^T with U [m, k], V [n, k].
Tensor compose(const Tensor& u, const Vec& s, const Tensor& v) {
  const std::size_t m = u.dim(0), n = v.dim(0), k = s.size();
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t l = 0; l < k; ++l) acc += u.at(i, l) * s[l] * v.at(j, l);
      out.at(i, j) = acc;
    }
  return out;
}

Vec singular_values(std::size_t k, double lo, Rng& rng) {
  Vec s(k);
  s[0] = 1.0;
  for (std::size_t i = 1; i < k; ++i) s[i] = rng.uniform(lo, 1.0);
  return s;
}

Vec matvec(const Tensor& m, const Vec& x) {
  Vec y(m.dim(0), 0.0);
  for (std::size_t i = 0; i < m.dim(0); ++i) {
    const double* row = m.ptr() + i * m.dim(1);
    double acc = 0.0;
    for (std::size_t j = 0; j < m.dim(1); ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
  return y;
}

Vec matvec_t(const Tensor& m, const Vec& x) {
  Vec y(m.dim(1), 0.0);
  for (std::size_t i = 0; i < m.dim(0); ++i) {
    const double* row = m.ptr() + i * m.dim(1);
    for (std::size_t j = 0; j < m.dim(1); ++j) y[j] += row[j] * x[i];
  }
  return y;
}

// Block-diagonal I_N (x) M applied to x of length N * M.cols.
Vec blockwise(const Tensor& m, const Vec& x, std::size_t tokens, bool transpose) {
  const std::size_t in = transpose ? m.dim(0) : m.dim(1);
  const std::size_t out = transpose ? m.dim(1) : m.dim(0);
  Vec y(tokens * out, 0.0);
  for (std::size_t n = 0; n < tokens; ++n) {
    const Vec part(x.begin() + n * in, x.begin() + (n + 1) * in);
    const Vec r = transpose ? matvec_t(m, part) : matvec(m, part);
    std::copy(r.begin(), r.end(), y.begin() + n * out);
  }
  return y;
}

double norm(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Largest singular value of an operator given by its action and adjoint.
double operator_norm(const std::function<Vec(const Vec&)>& apply, const std::function<Vec(const Vec&)>& adjoint,
                     std::size_t dim) {
  Rng rng(0x0b5e55ed);
  Vec v(dim);
  for (double& x : v) x = rng.normal();
  double estimate = 0.0;
  for (std::size_t it = 0; it < 20000; ++it) {
    const double nv = norm(v);
    for (double& x : v) x /= nv;
    Vec w = adjoint(apply(v));
    const double next = std::sqrt(norm(w));
    v = std::move(w);
    if (it > 0 && std::abs(next - estimate) <= 1e-13 * next) return next;
    estimate = next;
  }
  return estimate;
}

}  // namespace

LinearTapPrior::LinearTapPrior(Tensor jacobian, std::size_t tokens) : jacobian_(std::move(jacobian)), tokens_(tokens) {
  if (jacobian_.rank() != 2 || tokens == 0 || jacobian_.dim(0) % tokens != 0) {
    throw ShapeError("LinearTapPrior: Jacobian rows must split into " + std::to_string(tokens) + " tokens");
  }
}

schedule::PriorOutput LinearTapPrior::evaluate(d::Graph& graph, d::Var state, double) const {
  if (state.shape() != state_shape()) throw ShapeError("LinearTapPrior: state shape mismatch");
  const d::Var j = graph.constant(jacobian_, "jacobian");
  const d::Var h = d::matmul(j, d::reshape(state, {jacobian_.dim(1), 1}));
  return {d::neg(state), d::reshape(h, {tokens_, jacobian_.dim(0) / tokens_})};
}

LinearFixture make_linear_fixture(const LinearFixtureConfig& c, std::uint64_t seed) {
  const std::size_t rows = c.tokens * c.token_dim;
  if (c.feature_dim < c.token_dim || c.state_dim < rows) {
    throw ConfigError("linear fixture needs D1 >= D2 and d >= N*D2");
  }
  Rng rng(seed);
  LinearFixture f;
  f.tokens = c.tokens;
  const Tensor u = random_orthonormal(rows, rows, rng), v = random_orthonormal(c.state_dim, rows, rng);
  f.jacobian = compose(u, singular_values(rows, c.jacobian_min, rng), v);
  const Tensor p = random_orthonormal(c.feature_dim, c.token_dim, rng);
  const Tensor q = random_orthonormal(c.token_dim, c.token_dim, rng);
  f.phi = compose(p, singular_values(c.token_dim, c.phi_min, rng), q);

  f.z_star = rng.normal({c.state_dim});
  f.z_t = f.z_star + c.offset * rng.normal({c.state_dim});
  f.h_star = Tensor({c.tokens, c.token_dim}, matvec(f.jacobian, f.z_star.vec()));
  const Vec clean = blockwise(f.phi, f.h_star.vec(), c.tokens, false);
  f.f_x = Tensor({c.tokens, c.feature_dim}, clean) + c.misalignment * rng.normal({c.tokens, c.feature_dim});
  f.f_bar = f.f_x + c.proxy_noise * rng.normal({c.tokens, c.feature_dim});
  return f;
}

double lambda_threshold(const Tensor& jacobian, const Tensor& phi) {
  const double sj = nets::spectral_norm(jacobian).value, sp = nets::spectral_norm(phi).value;
  if (sj == 0.0 || sp == 0.0) throw NumericalError("lambda_threshold: zero operator");
  return 1.0 / (sj * sj * sp * sp);
}

Tensor tap_at(const schedule::FlowPrior& prior, const Tensor& z, double t) {
  d::Graph g;
  const auto out = prior.evaluate(g, g.constant(z), t);
  if (!out.tap) throw ShapeError("prior exposes no tap");
  return out.tap->value();
}

Tensor tap_jacobian(const schedule::FlowPrior& prior, const Tensor& z, double t) {
  d::Graph g;
  const d::Var zv = g.input(z, "z");
  const auto out = prior.evaluate(g, zv, t);
  if (!out.tap) throw ShapeError("prior exposes no tap");
  const d::Var h = *out.tap;
  const std::size_t rows = h.value().size(), cols = z.size();
  Tensor jac({rows, cols});
  Tensor unit(h.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    unit[r] = 1.0;
    const Tensor grad = g.gradient(d::sum(d::mask(h, unit)), zv);
    std::copy(grad.vec().begin(), grad.vec().end(), jac.ptr() + r * cols);
    unit[r] = 0.0;
  }
  return jac;
}

Tensor alignment_descent_step(const schedule::FlowPrior& prior, const nets::ProjectionHead& head,
                              const Tensor& target, const Tensor& z, double t, double lambda) {
  if (lambda == 0.0) return z;
  d::Graph g;
  const d::Var zv = g.input(z, "z");
  const auto out = prior.evaluate(g, zv, t);
  if (!out.tap) throw ShapeError("alignment step: prior exposes no tap");
  nets::Binding b(g, head.params(), false);
  const d::Var projected = head.forward(b, *out.tap);
  if (projected.shape() != target.shape()) throw ShapeError("alignment step: target shape mismatch");
  const d::Var loss = d::sum(d::square(d::sub(g.constant(target), projected)));
  return z - lambda * g.gradient(loss, zv);
}

ContractionConstants contraction_constants(const Tensor& jacobian, const Tensor& phi, std::size_t tokens,
                                           double lambda) {
  const std::size_t rows = jacobian.dim(0);
  if (rows != tokens * phi.dim(1)) throw ShapeError("contraction_constants: Jacobian rows != N * D2");
  Tensor gram_j({rows, rows});
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const double* ri = jacobian.ptr() + i * jacobian.dim(1);
      const double* rj = jacobian.ptr() + j * jacobian.dim(1);
      double acc = 0.0;
      for (std::size_t k = 0; k < jacobian.dim(1); ++k) acc += ri[k] * rj[k];
      gram_j.at(i, j) = gram_j.at(j, i) = acc;
    }
  const auto a = [&](const Vec& x) { return matvec(gram_j, x); };  // A_t = J J^T
  const Tensor gram = [&] {
    Tensor m({phi.dim(1), phi.dim(1)});
    for (std::size_t i = 0; i < phi.dim(1); ++i)
      for (std::size_t j = 0; j < phi.dim(1); ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < phi.dim(0); ++k) s += phi.at(k, i) * phi.at(k, j);
        m.at(i, j) = s;
      }
    return m;
  }();
  // M = I - 2 lambda A B~, M^T = I - 2 lambda B~ A (both factors symmetric).
  const auto m = [&](const Vec& x) {
    Vec y = a(blockwise(gram, x, tokens, false));
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] - 2.0 * lambda * y[i];
    return y;
  };
  const auto mt = [&](const Vec& x) {
    Vec y = blockwise(gram, a(x), tokens, false);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] - 2.0 * lambda * y[i];
    return y;
  };
  // A Phi~^T and its adjoint Phi~ A.
  const auto k = [&](const Vec& x) { return a(blockwise(phi, x, tokens, true)); };
  const auto kt = [&](const Vec& x) { return blockwise(phi, a(x), tokens, false); };

  ContractionConstants c;
  c.c1 = operator_norm(m, mt, rows);
  c.c2 = 2.0 * lambda * std::sqrt(static_cast<double>(tokens)) * operator_norm(k, kt, tokens * phi.dim(0));
  return c;
}

Prop2Report check_prop2(const schedule::FlowPrior& prior, const nets::ProjectionHead& head, const Tensor& z_t,
                        double t, const Tensor& h_star, const Tensor& f_x, const Tensor& f_bar,
                        std::span<const double> lambdas) {
  if (!head.config().linear) throw ConfigError("check_prop2: the contraction bound needs a linear head");
  const Tensor phi = head.phi();
  const Tensor h_t = tap_at(prior, z_t, t);
  if (h_star.shape() != h_t.shape()) throw ShapeError("check_prop2: h* shape mismatch");
  const std::size_t tokens = h_t.dim(0);
  if (f_x.shape() != f_bar.shape() || f_x.rank() != 2 || f_x.dim(0) != tokens || f_x.dim(1) != phi.dim(0)) {
    throw ShapeError("check_prop2: features must be [N, D1]");
  }
  const Tensor jac = tap_jacobian(prior, z_t, t);

  Prop2Report report;
  report.sigma_jacobian = nets::spectral_norm(jac).value;
  report.sigma_phi = nets::spectral_norm(phi).value;
  report.threshold = lambda_threshold(jac, phi);

  const double n = static_cast<double>(tokens);
  const double approx = diffcore::squared_norm(f_bar - f_x) / n;
  const Tensor aligned_star = head.project(h_star);
  const double mis = diffcore::squared_norm(f_x - aligned_star) / n;
  const double gap_before = std::sqrt(diffcore::squared_norm(h_t - h_star));

  for (double lambda : lambdas) {
    ContractionCheck c;
    c.lambda = lambda;
    const Tensor z_next = alignment_descent_step(prior, head, f_bar, z_t, t, lambda);
    c.gap_before = gap_before;
    c.gap_after = std::sqrt(diffcore::squared_norm(tap_at(prior, z_next, t) - h_star));
    c.ratio = gap_before > 0.0 ? c.gap_after / gap_before : 0.0;
    const auto k = contraction_constants(jac, phi, tokens, lambda);
    c.c1 = k.c1;
    c.c2 = k.c2;
    c.approx_err = approx;
    c.mis_repa = mis;
    c.bound = c.c1 * gap_before + c.c2 * (std::sqrt(approx) + std::sqrt(mis));
    c.holds = c.gap_after <= c.bound + 1e-12 * std::max(1.0, c.bound);
    report.checks.push_back(c);
  }
  return report;
}

Prop2Report check_prop2(const LinearFixture& fixture, std::span<const double> lambdas) {
  const LinearTapPrior prior(fixture.jacobian, fixture.tokens);
  const auto head = nets::ProjectionHead::linear_map(fixture.phi);
  return check_prop2(prior, head, fixture.z_t, 0.5, fixture.h_star, fixture.f_x, fixture.f_bar, lambdas);
}

nets::ProjectionHead fit_linear_head(const Tensor& taps, const Tensor& features, double ridge) {
  if (taps.rank() != 2 || features.rank() != 2 || taps.dim(0) != features.dim(0) || taps.dim(0) == 0) {
    throw ShapeError("fit_linear_head: expected [R, D2] taps and [R, D1] features");
  }
  const std::size_t r = taps.dim(0), d2 = taps.dim(1), d1 = features.dim(1);
  // Normal equations (H^T H + ridge I) X = H^T F, X = Phi^T, by Cholesky.
  Tensor gram({d2, d2}), rhs({d2, d1});
  for (std::size_t s = 0; s < r; ++s)
    for (std::size_t i = 0; i < d2; ++i) {
      const double hi = taps.at(s, i);
      for (std::size_t j = 0; j < d2; ++j) gram.at(i, j) += hi * taps.at(s, j);
      for (std::size_t j = 0; j < d1; ++j) rhs.at(i, j) += hi * features.at(s, j);
    }
  for (std::size_t i = 0; i < d2; ++i) gram.at(i, i) += ridge * static_cast<double>(r);
  Tensor l({d2, d2});
  for (std::size_t i = 0; i < d2; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double s = gram.at(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l.at(i, k) * l.at(j, k);
      if (i == j) {
        if (s <= 0.0) throw NumericalError("fit_linear_head: normal equations not positive definite");
        l.at(i, i) = std::sqrt(s);
      } else {
        l.at(i, j) = s / l.at(j, j);
      }
    }
  Tensor phi({d1, d2});
  for (std::size_t c = 0; c < d1; ++c) {
    Vec y(d2);
    for (std::size_t i = 0; i < d2; ++i) {
      double s = rhs.at(i, c);
      for (std::size_t k = 0; k < i; ++k) s -= l.at(i, k) * y[k];
      y[i] = s / l.at(i, i);
    }
    for (std::size_t i = d2; i-- > 0;) {
      double s = y[i];
      for (std::size_t k = i + 1; k < d2; ++k) s -= l.at(k, i) * y[k];
      y[i] = s / l.at(i, i);
    }
    for (std::size_t i = 0; i < d2; ++i) phi.at(c, i) = y[i];
  }
  return nets::ProjectionHead::linear_map(phi);
}

}  // namespace repa::theory
