#include "postfilter/autodiff/graph.hpp"

#include <string>

namespace postfilter::ad {

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::constant: return "constant";
    case OpKind::variable: return "variable";
    case OpKind::conv1d: return "conv1d";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::scale: return "scale";
    case OpKind::offset: return "offset";
    case OpKind::leaky_relu: return "leaky_relu";
    case OpKind::tanh: return "tanh";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::abs: return "abs";
    case OpKind::log: return "log";
    case OpKind::magnitude: return "magnitude";
    case OpKind::atan2: return "atan2";
    case OpKind::matmul: return "matmul";
    case OpKind::sum: return "sum";
    case OpKind::mean: return "mean";
    case OpKind::mean_last_axis: return "mean_last_axis";
    case OpKind::frame: return "frame";
    case OpKind::batch_major: return "batch_major";
    case OpKind::upsample_zero: return "upsample_zero";
    case OpKind::reshape: return "reshape";
  }
  return "unknown";
}

const SignalTensor& Var::value() const { return graph_->value(id_); }

const SignalTensor& BackwardContext::output() const { return graph_.value(node_); }

const SignalTensor& BackwardContext::input(std::size_t i) const {
  return graph_.value(graph_.nodes_[node_].inputs.at(i));
}

bool BackwardContext::wants(std::size_t i) const {
  return graph_.nodes_[graph_.nodes_[node_].inputs.at(i)].needs_grad;
}

std::span<double> BackwardContext::input_grad(std::size_t i) {
  return graph_.grad_buffer(graph_.nodes_[node_].inputs.at(i));
}

Var Graph::constant(SignalTensor value) {
  Node node;
  node.kind = OpKind::constant;
  node.owned = std::move(value);
  node.owned.set_requires_grad(false);
  node.owned.clear_grad();
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::variable(SignalTensor& tensor, bool track) {
  Node node;
  node.kind = OpKind::variable;
  node.bound = &tensor;
  node.view = &tensor;
  node.needs_grad = track && tensor.requires_grad();
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::reference(const SignalTensor& tensor) {
  Node node;
  node.kind = OpKind::constant;
  node.view = &tensor;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::record(OpKind kind, std::vector<Var> inputs, SignalTensor value, BackwardFn backward) {
  Node node;
  node.kind = kind;
  node.owned = std::move(value);
  for (const Var& v : inputs) {
    if (&v.graph() != this || v.id() >= nodes_.size()) {
      throw ContractViolation(std::string("Graph::record: input of ") +
                              std::string(op_name(kind)) + " is not a node of this graph");
    }
    node.inputs.push_back(v.id());
    node.needs_grad = node.needs_grad || nodes_[v.id()].needs_grad;
  }
  if (node.needs_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

const SignalTensor& Graph::value(std::size_t id) const {
  const Node& node = nodes_.at(id);
  return node.view != nullptr ? *node.view : node.owned;
}

std::span<double> Graph::grad_buffer(std::size_t id) {
  auto& buffer = grads_[id];
  if (buffer.empty()) buffer.assign(value(id).size(), 0.0);
  return buffer;
}

void Graph::backward(Var loss) {
  if (&loss.graph() != this) throw ContractViolation("Graph::backward: loss belongs to another graph");
  if (loss.value().size() != 1) {
    throw ContractViolation("Graph::backward: loss must be scalar, got shape " +
                            to_string(loss.value().shape()));
  }
  visit_order_.clear();
  grads_.assign(nodes_.size(), {});
  if (!nodes_[loss.id()].needs_grad) return;
  grad_buffer(loss.id())[0] = 1.0;

  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.needs_grad || grads_[id].empty()) continue;
    if (node.kind == OpKind::variable) {
      node.bound->accumulate_grad(grads_[id]);
      continue;
    }
    if (!node.backward) continue;
    visit_order_.push_back(id);
    BackwardContext ctx(*this, id);
    // Inputs always precede the node, so their buffers never alias grads_[id].
    const std::vector<double> grad_out = std::move(grads_[id]);
    node.backward(grad_out, ctx);
  }
  grads_.clear();
}

}  // namespace postfilter::ad
