#pragma once
// Eager tape for reverse-mode differentiation.
//
// Every operation evaluates immediately and appends a node holding its output
// and a backward rule. Nodes only reference earlier nodes, so the tape is
// acyclic by construction. Values are checked for NaN/Inf as they are
// recorded; a violation throws NumericalError naming the node.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "repa/diffcore/tensor.hpp"

namespace repa::diffcore {

class Graph;

// Handle to a node on a specific graph.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, std::uint32_t id) : graph_(graph), id_(id) {}

  Graph& graph() const { return *graph_; }
  std::uint32_t id() const noexcept { return id_; }
  bool valid() const noexcept { return graph_ != nullptr; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  Graph* graph_ = nullptr;
  std::uint32_t id_ = 0;
};

class Graph {
 public:
  // Backward rule: receives the upstream gradient of this node's output.
  using Backward = std::function<void(Graph&, const Tensor& grad_out)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Differentiable leaf (a root that gradients may be requested for).
  Var input(Tensor value, std::string name = "input");
  // Non-differentiable leaf.
  Var constant(Tensor value, std::string name = "constant");

  // Appends an op node. requires_grad is inherited from the inputs.
  Var record(const char* kind, Tensor value, std::vector<Var> inputs, Backward backward);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }
  const char* kind(Var v) const;

  // d(output)/d(root) for each root. output must be a single-element tensor.
  // Can be called repeatedly on the same graph; each call is independent.
  std::vector<Tensor> gradient(Var output, std::span<const Var> wrt);
  Tensor gradient(Var output, Var wrt);

  // Used by backward rules: gradient accumulator of an input, or nullptr
  // when that input does not require a gradient.
  Tensor* grad_slot(Var v);

 private:
  struct Node {
    const char* kind;
    std::string name;
    Tensor value;
    std::vector<std::uint32_t> inputs;
    Backward backward;
    bool requires_grad;
  };

  void check_owner(Var v) const;
  void check_finite(const Node& node, std::uint32_t id) const;

  std::vector<Node> nodes_;
  std::vector<std::optional<Tensor>> grads_;
  bool in_backward_ = false;
};

}  // namespace repa::diffcore
