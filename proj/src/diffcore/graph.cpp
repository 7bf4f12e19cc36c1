#include "repa/diffcore/graph.hpp"

#include <cmath>

#include "repa/errors.hpp"

namespace repa::diffcore {

const Tensor& Var::value() const { return graph_->value(*this); }

Var Graph::input(Tensor value, std::string name) {
  Node node{"input", std::move(name), std::move(value), {}, {}, true};
  check_finite(node, static_cast<std::uint32_t>(nodes_.size()));
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Graph::constant(Tensor value, std::string name) {
  Node node{"constant", std::move(name), std::move(value), {}, {}, false};
  check_finite(node, static_cast<std::uint32_t>(nodes_.size()));
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Graph::record(const char* kind, Tensor value, std::vector<Var> inputs, Backward backward) {
  Node node{kind, {}, std::move(value), {}, std::move(backward), false};
  node.inputs.reserve(inputs.size());
  for (const Var& v : inputs) {
    check_owner(v);
    node.inputs.push_back(v.id());
    node.requires_grad = node.requires_grad || nodes_[v.id()].requires_grad;
  }
  if (!node.requires_grad) node.backward = nullptr;
  check_finite(node, static_cast<std::uint32_t>(nodes_.size()));
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

const Tensor& Graph::value(Var v) const {
  check_owner(v);
  return nodes_[v.id()].value;
}

bool Graph::requires_grad(Var v) const {
  check_owner(v);
  return nodes_[v.id()].requires_grad;
}

const char* Graph::kind(Var v) const {
  check_owner(v);
  return nodes_[v.id()].kind;
}

Tensor* Graph::grad_slot(Var v) {
  if (!in_backward_) throw std::logic_error("grad_slot used outside a backward pass");
  check_owner(v);
  const Node& node = nodes_[v.id()];
  if (!node.requires_grad) return nullptr;
  auto& slot = grads_[v.id()];
  if (!slot) slot.emplace(node.value.shape());
  return &*slot;
}

std::vector<Tensor> Graph::gradient(Var output, std::span<const Var> wrt) {
  check_owner(output);
  if (nodes_[output.id()].value.size() != 1) {
    throw ShapeError("gradient requested of non-scalar output with shape " +
                     shape_string(nodes_[output.id()].value.shape()));
  }
  for (const Var& r : wrt) {
    check_owner(r);
    if (!nodes_[r.id()].requires_grad) {
      throw ShapeError("gradient requested for a non-differentiable node #" +
                       std::to_string(r.id()) + " (" + nodes_[r.id()].kind + ")");
    }
    if (r.id() > output.id()) {
      throw ShapeError("root #" + std::to_string(r.id()) + " is not reachable from output");
    }
  }

  grads_.assign(nodes_.size(), std::nullopt);
  in_backward_ = true;
  struct Reset {
    bool& flag;
    ~Reset() { flag = false; }
  } reset{in_backward_};

  if (nodes_[output.id()].requires_grad) {
    grads_[output.id()].emplace(Tensor::full(nodes_[output.id()].value.shape(), 1.0));
  }
  for (std::int64_t i = output.id(); i >= 0; --i) {
    const auto id = static_cast<std::uint32_t>(i);
    if (!grads_[id] || !nodes_[id].backward) continue;
    // Copy out so the rule may write into other slots without aliasing this one.
    const Tensor grad_out = std::move(*grads_[id]);
    grads_[id].reset();
    if (!grad_out.all_finite()) {
      throw NumericalError("non-finite gradient at node #" + std::to_string(id) + " (" +
                           nodes_[id].kind + ")");
    }
    nodes_[id].backward(*this, grad_out);
    // Keep leaf gradients; op gradients are no longer needed.
    grads_[id].reset();
  }

  std::vector<Tensor> out;
  out.reserve(wrt.size());
  for (const Var& r : wrt) {
    auto& g = grads_[r.id()];
    if (r.id() == output.id()) {
      out.push_back(Tensor::full(nodes_[r.id()].value.shape(), 1.0));
      continue;
    }
    if (!g) {
      throw ShapeError("root #" + std::to_string(r.id()) + " (" + nodes_[r.id()].name +
                       ") is not reachable from output");
    }
    if (!g->all_finite()) {
      throw NumericalError("non-finite gradient for root #" + std::to_string(r.id()));
    }
    out.push_back(*g);
  }
  grads_.clear();
  return out;
}

Tensor Graph::gradient(Var output, Var wrt) {
  const Var roots[] = {wrt};
  return std::move(gradient(output, roots).front());
}

void Graph::check_owner(Var v) const {
  if (&v.graph() != this || v.id() >= nodes_.size()) {
    throw std::logic_error("variable does not belong to this graph");
  }
}

void Graph::check_finite(const Node& node, std::uint32_t id) const {
  if (!node.value.all_finite()) {
    throw NumericalError("non-finite value produced at node #" + std::to_string(id) + " (" +
                         node.kind + (node.name.empty() ? "" : ": " + node.name) + ")");
  }
}

}  // namespace repa::diffcore
