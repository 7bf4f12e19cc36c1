#include "repa/nets/params.hpp"

#include <cmath>

#include "repa/diffcore/ops.hpp"
#include "repa/errors.hpp"

namespace repa::nets {

std::size_t ParameterSet::add(std::string name, Tensor value, bool trainable) {
  if (by_name_.contains(name)) throw ShapeError("duplicate parameter '" + name + "'");
  const std::size_t id = entries_.size();
  by_name_.emplace(name, id);
  entries_.push_back({std::move(name), std::move(value), trainable});
  return id;
}

std::size_t ParameterSet::index(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) throw ShapeError("unknown parameter '" + std::string(name) + "'");
  return it->second;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

void ParameterSet::round_to_float() {
  for (auto& e : entries_) {
    for (double& v : e.value.data()) v = static_cast<double>(static_cast<float>(v));
  }
}

Binding::Binding(Graph& graph, const ParameterSet& params, bool trainable)
    : graph_(&graph), trainable_(trainable) {
  vars_.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (trainable && params.trainable(i)) {
      vars_.push_back(graph.input(params.value(i), params.name(i)));
    } else {
      vars_.push_back(graph.constant(params.value(i), params.name(i)));
    }
  }
}

Dense add_dense(ParameterSet& params, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng,
                double gain) {
  Tensor w({in, out});
  if (gain != 0.0) {
    const double sd = gain / std::sqrt(static_cast<double>(in));
    for (double& v : w.data()) v = sd * rng.normal();
  }
  Dense d;
  d.weight = params.add(prefix + ".weight", std::move(w));
  d.bias = params.add(prefix + ".bias", Tensor({1, out}));
  return d;
}

Var apply(const Binding& binding, const Dense& layer, Var x) {
  return diffcore::add_tiled(diffcore::matmul(x, binding[layer.weight]), binding[layer.bias]);
}

}  // namespace repa::nets
