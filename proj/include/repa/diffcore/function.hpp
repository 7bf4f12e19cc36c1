#pragma once
// A differentiable computation with declared input shapes, plus a central
// finite-difference checker used to certify backward rules.

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "repa/diffcore/graph.hpp"

namespace repa::diffcore {

class Function {
 public:
  using Body = std::function<Var(Graph&, std::span<const Var>)>;

  Function(std::vector<Shape> input_shapes, Body body);

  // A recorded evaluation: owns its graph, so gradients can be taken later.
  class Evaluation {
   public:
    const Tensor& output() const { return graph_->value(output_); }
    // d(output)/d(input[i]) for each requested index.
    std::vector<Tensor> gradient(std::span<const std::size_t> inputs);
    std::vector<Tensor> gradient_all();

   private:
    friend class Function;
    std::unique_ptr<Graph> graph_;
    std::vector<Var> inputs_;
    Var output_;
  };

  Evaluation forward(std::span<const Tensor> inputs) const;
  Evaluation forward(std::initializer_list<Tensor> inputs) const {
    return forward(std::span<const Tensor>(inputs.begin(), inputs.size()));
  }
  const std::vector<Shape>& input_shapes() const { return shapes_; }

 private:
  std::vector<Shape> shapes_;
  Body body_;
};

struct GradientCheck {
  double max_rel_error = 0.0;  // max over inputs of ||g_fd - g_ad|| / max(||g_fd||, ||g_ad||, floor)
  double max_abs_error = 0.0;
  std::size_t coordinates = 0;
};

// Central differences on every coordinate of every input (or a deterministic
// subset of at most max_coords per input when nonzero). The output must be
// scalar.
GradientCheck check_gradient(const Function& f, std::span<const Tensor> inputs,
                             double step = 1e-5, std::size_t max_coords = 0,
                             double floor = 1e-8);

// Relative error ||a - b|| / max(||a||, ||b||, floor).
double relative_error(const Tensor& a, const Tensor& b, double floor = 1e-12);

}  // namespace repa::diffcore
