#include "repa/diffcore/function.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "repa/errors.hpp"

namespace repa::diffcore {

Function::Function(std::vector<Shape> input_shapes, Body body)
    : shapes_(std::move(input_shapes)), body_(std::move(body)) {}

Function::Evaluation Function::forward(std::span<const Tensor> inputs) const {
  if (inputs.size() != shapes_.size()) {
    throw ShapeError("function expects " + std::to_string(shapes_.size()) + " inputs, got " +
                     std::to_string(inputs.size()));
  }
  Evaluation ev;
  ev.graph_ = std::make_unique<Graph>();
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].shape() != shapes_[i]) {
      throw ShapeError("input " + std::to_string(i) + " has shape " +
                       shape_string(inputs[i].shape()) + ", declared " + shape_string(shapes_[i]));
    }
    ev.inputs_.push_back(ev.graph_->input(inputs[i], "arg" + std::to_string(i)));
  }
  ev.output_ = body_(*ev.graph_, ev.inputs_);
  return ev;
}

std::vector<Tensor> Function::Evaluation::gradient(std::span<const std::size_t> which) {
  std::vector<Var> roots;
  for (std::size_t i : which) roots.push_back(inputs_.at(i));
  return graph_->gradient(output_, roots);
}

std::vector<Tensor> Function::Evaluation::gradient_all() {
  return graph_->gradient(output_, inputs_);
}

double relative_error(const Tensor& a, const Tensor& b, double floor) {
  const double diff = std::sqrt(squared_norm(a - b));
  const double scale = std::max({std::sqrt(squared_norm(a)), std::sqrt(squared_norm(b)), floor});
  return diff / scale;
}

GradientCheck check_gradient(const Function& f, std::span<const Tensor> inputs, double step,
                             std::size_t max_coords, double floor) {
  std::vector<Tensor> args(inputs.begin(), inputs.end());
  auto ev = f.forward(args);
  const std::vector<Tensor> analytic = ev.gradient_all();

  GradientCheck result;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::size_t n = args[i].size();
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (max_coords != 0 && n > max_coords) {
      // evenly spread deterministic subset
      std::vector<std::size_t> pick;
      for (std::size_t c = 0; c < max_coords; ++c) pick.push_back(c * n / max_coords + (c * 7919) % std::max<std::size_t>(1, n / max_coords));
      coords = pick;
    }
    Tensor fd_sub({coords.size()});
    Tensor ad_sub({coords.size()});
    for (std::size_t c = 0; c < coords.size(); ++c) {
      const std::size_t j = std::min(coords[c], n - 1);
      const double orig = args[i][j];
      args[i][j] = orig + step;
      const double fp = f.forward(args).output().item();
      args[i][j] = orig - step;
      const double fm = f.forward(args).output().item();
      args[i][j] = orig;
      fd_sub[c] = (fp - fm) / (2.0 * step);
      ad_sub[c] = analytic[i][j];
      result.max_abs_error = std::max(result.max_abs_error, std::abs(fd_sub[c] - ad_sub[c]));
    }
    result.max_rel_error = std::max(result.max_rel_error, relative_error(fd_sub, ad_sub, floor));
    result.coordinates += coords.size();
  }
  return result;
}

}  // namespace repa::diffcore
