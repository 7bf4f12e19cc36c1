#include "repa/theory/prop1.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "repa/errors.hpp"
#include "repa/theory/divergence.hpp"

namespace repa::theory {

namespace {

Tensor column_mean(const Tensor& rows) { return nets::mean_embedding(rows); }

double gap(const Tensor& a, const Tensor& b) { return diffcore::squared_norm(a - b); }

}  // namespace

double cosine_identity_error(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || a.shape() != b.shape()) throw ShapeError("cosine_identity_error: shape mismatch");
  const std::size_t n = a.dim(0), d = a.dim(1);
  double worst = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    double dot = 0.0, aa = 0.0, bb = 0.0, dist = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      dot += a.at(r, c) * b.at(r, c);
      aa += a.at(r, c) * a.at(r, c);
      bb += b.at(r, c) * b.at(r, c);
      const double e = a.at(r, c) - b.at(r, c);
      dist += e * e;
    }
    const double cosine = dot / std::sqrt(aa * bb);
    worst = std::max(worst, std::abs(cosine - (1.0 - 0.5 * dist)));
  }
  return worst;
}

double jensen_slack(const Tensor& a, const Tensor& b) {
  return mean_squared_distance(a, b) - gap(column_mean(a), column_mean(b));
}

Prop1Sample prop1_sample(const AlignmentRows& rows) {
  const Tensor g = normalized_rows(rows.projected_hat);
  const Tensor mu_x = column_mean(rows.f_x), mu_hat = column_mean(rows.f_hat), mu_g = column_mean(g);

  Prop1Sample s;
  s.repa = mean_cosine(rows.f_bar, g);
  s.mis_repa = mean_squared_distance(rows.f_hat, g);
  s.approx_err = mean_squared_distance(rows.f_x, rows.f_bar);
  s.mean_distance = gap(mu_x, mu_hat);
  s.bound = 1.0 - s.mean_distance / 8.0 + s.approx_err / 2.0 + s.mis_repa / 4.0;
  s.residual = s.bound - s.repa;

  const double x_to_g = gap(mu_x, mu_g), hat_to_g = gap(mu_hat, mu_g);
  const double rows_x_g = mean_squared_distance(rows.f_x, g);
  const double rows_bar_g = mean_squared_distance(rows.f_bar, g);
  s.step_slack[0] = 2.0 * x_to_g + 2.0 * hat_to_g - s.mean_distance;
  s.step_slack[1] = rows_x_g - x_to_g;
  s.step_slack[2] = s.mis_repa - hat_to_g;
  s.step_slack[3] = 2.0 * rows_bar_g + 2.0 * s.approx_err - rows_x_g;
  s.identity_error = cosine_identity_error(rows.f_bar, g);
  return s;
}

AlignmentReport prop1_report(std::span<const AlignmentRows> rows) {
  if (rows.empty()) throw ShapeError("check_prop1: no samples");
  AlignmentReport report;
  report.min_residual = std::numeric_limits<double>::infinity();
  report.min_step_slack = std::numeric_limits<double>::infinity();
  const std::size_t d = rows.front().f_x.dim(1);
  Tensor emb_x({rows.size(), d}), emb_hat({rows.size(), d});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Prop1Sample s = prop1_sample(rows[i]);
    report.min_residual = std::min(report.min_residual, s.residual);
    if (s.residual < -AlignmentReport::kTolerance) ++report.violations;
    for (double slack : s.step_slack) report.min_step_slack = std::min(report.min_step_slack, slack);
    report.max_identity_error = std::max(report.max_identity_error, s.identity_error);
    report.mean_repa += s.repa;
    report.mean_approx_err += s.approx_err;
    report.mean_mis_repa += s.mis_repa;
    const Tensor mx = column_mean(rows[i].f_x), mh = column_mean(rows[i].f_hat);
    for (std::size_t c = 0; c < d; ++c) {
      emb_x.at(i, c) = mx[c];
      emb_hat.at(i, c) = mh[c];
    }
    report.samples.push_back(s);
  }
  const double m = static_cast<double>(rows.size());
  report.mean_repa /= m;
  report.mean_approx_err /= m;
  report.mean_mis_repa /= m;
  report.mmd = mmd_mean_embedding(emb_x, emb_hat);
  report.expected_bound = 1.0 - report.mmd / 8.0 + report.mean_approx_err / 2.0 + report.mean_mis_repa / 4.0;
  report.expected_residual = report.expected_bound - report.mean_repa;
  return report;
}

AlignmentReport check_prop1(std::span<const AlignmentTriple> triples, const DiffEncoder& diffenc,
                            const nets::ProjectionHead& head, const nets::FeatureEncoder& encoder) {
  if (!encoder.config().normalize) {
    throw ConfigError("check_prop1: the bound assumes l2-normalized encoder features; normalization is off");
  }
  check_grid(diffenc, head, encoder);
  std::vector<AlignmentRows> rows;
  rows.reserve(triples.size());
  for (const auto& tr : triples) {
    if (tr.x.shape() != tr.x_bar.shape() || tr.x.shape() != tr.x_hat.shape()) {
      throw ShapeError("check_prop1: triple images differ in shape");
    }
    rows.push_back({encoder.encode(tr.x).rows, encoder.encode(tr.x_bar).rows, encoder.encode(tr.x_hat).rows,
                    head.project(diffenc.tap(tr.x_hat, 0.0))});
  }
  return prop1_report(rows);
}

}  // namespace repa::theory
