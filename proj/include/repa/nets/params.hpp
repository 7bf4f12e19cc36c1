#pragma once
// Named parameter arrays and their binding into a graph.

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "repa/diffcore/graph.hpp"
#include "repa/rng.hpp"

namespace repa::nets {

using diffcore::Graph;
using diffcore::Shape;
using diffcore::Tensor;
using diffcore::Var;

class ParameterSet {
 public:
  // Fixed (non-trainable) arrays travel with checkpoints but are never
  // updated by an optimizer and are bound as graph constants.
  std::size_t add(std::string name, Tensor value, bool trainable = true);

  std::size_t size() const noexcept { return entries_.size(); }
  const std::string& name(std::size_t i) const { return entries_.at(i).name; }
  Tensor& value(std::size_t i) { return entries_.at(i).value; }
  const Tensor& value(std::size_t i) const { return entries_.at(i).value; }
  bool trainable(std::size_t i) const { return entries_.at(i).trainable; }
  std::size_t index(std::string_view name) const;
  std::size_t scalar_count() const;

  // Rounds every array through 32-bit storage, so in-memory values equal
  // what a checkpoint reload produces.
  void round_to_float();

 private:
  struct Entry {
    std::string name;
    Tensor value;
    bool trainable;
  };
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> by_name_;
};

// Parameters placed on a graph. Trainable bindings make every trainable array
// a differentiable input; frozen bindings make everything a constant.
class Binding {
 public:
  Binding(Graph& graph, const ParameterSet& params, bool trainable);

  Var operator[](std::size_t i) const { return vars_.at(i); }
  const std::vector<Var>& vars() const noexcept { return vars_; }
  Graph& graph() const noexcept { return *graph_; }
  bool trainable() const noexcept { return trainable_; }

 private:
  Graph* graph_;
  std::vector<Var> vars_;
  bool trainable_;
};

// Affine layer x[R,in] -> x W + b with W[in,out], b[1,out].
struct Dense {
  std::size_t weight = 0;
  std::size_t bias = 0;
};

// W ~ N(0, gain^2 / in); b = 0. gain 0 gives an all-zero layer.
Dense add_dense(ParameterSet& params, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng,
                double gain = 1.0);
Var apply(const Binding& binding, const Dense& layer, Var x);

}  // namespace repa::nets
