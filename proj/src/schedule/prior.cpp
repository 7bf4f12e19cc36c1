#include "repa/schedule/prior.hpp"

#include <cmath>
#include <string>

#include "repa/diffcore/ops.hpp"
#include "repa/errors.hpp"

namespace repa::schedule {

Tensor FlowPrior::velocity(const Tensor& state, double t) const {
  Graph graph;
  Var x = graph.constant(state, "state");
  return evaluate(graph, x, t).velocity.value();
}

GaussianPrior::GaussianPrior(InterpolantSchedule schedule, Tensor mean, double data_std)
    : schedule_(schedule), mean_(std::move(mean)), std_(data_std) {
  if (!(data_std >= 0.0) || !std::isfinite(data_std)) throw ShapeError("GaussianPrior: data_std must be >= 0");
  if (mean_.empty()) throw ShapeError("GaussianPrior: empty mean");
}

double GaussianPrior::marginal_variance(double t) const {
  const double a = schedule_.alpha(t), s = schedule_.sigma(t);
  return a * a * std_ * std_ + s * s;
}

double GaussianPrior::gain(double t) const {
  const double var = marginal_variance(t);
  if (var <= 0.0) throw NumericalError("GaussianPrior: zero marginal variance at t=" + std::to_string(t));
  return (schedule_.dalpha(t) * schedule_.alpha(t) * std_ * std_ + schedule_.dsigma(t) * schedule_.sigma(t)) / var;
}

PriorOutput GaussianPrior::evaluate(Graph& graph, Var state, double t) const {
  if (state.shape() != mean_.shape()) {
    throw ShapeError("GaussianPrior: state shape " + diffcore::shape_string(state.shape()) + " != " +
                     diffcore::shape_string(mean_.shape()));
  }
  const double a = gain(t);
  const double offset = schedule_.dalpha(t) - a * schedule_.alpha(t);
  Var v = diffcore::add(diffcore::scale(state, a), graph.constant(offset * mean_, "gaussian_offset"));
  return {v, std::nullopt};
}

Tensor GaussianPrior::posterior_mean(const Tensor& x_t, double t) const {
  const double a = schedule_.alpha(t), var = marginal_variance(t);
  const double k = a * std_ * std_ / var;
  Tensor out(x_t.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = mean_[i] + k * (x_t[i] - a * mean_[i]);
  return out;
}

Tensor GaussianPrior::score(const Tensor& x_t, double t) const {
  const double a = schedule_.alpha(t), var = marginal_variance(t);
  Tensor out(x_t.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = -(x_t[i] - a * mean_[i]) / var;
  return out;
}

Tensor GaussianPrior::transport(const Tensor& x_from, double t_from, double t_to) const {
  const double ratio = std::sqrt(marginal_variance(t_to) / marginal_variance(t_from));
  const double af = schedule_.alpha(t_from), at = schedule_.alpha(t_to);
  Tensor out(x_from.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = at * mean_[i] + ratio * (x_from[i] - af * mean_[i]);
  return out;
}

}  // namespace repa::schedule
