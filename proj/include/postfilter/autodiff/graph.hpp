#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "postfilter/autodiff/tensor.hpp"

namespace postfilter::ad {

enum class OpKind {
  constant,
  variable,
  conv1d,
  add,
  sub,
  mul,
  scale,
  offset,
  leaky_relu,
  tanh,
  sigmoid,
  abs,
  log,
  magnitude,
  atan2,
  matmul,
  sum,
  mean,
  mean_last_axis,
  frame,
  batch_major,
  upsample_zero,
  reshape,
};

std::string_view op_name(OpKind kind);

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph& graph() const { return *graph_; }
  std::size_t id() const noexcept { return id_; }
  const SignalTensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool valid() const noexcept { return graph_ != nullptr; }

 private:
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Access handed to a node's backward rule: forward values of the node and its
/// inputs, and gradient buffers of the inputs that participate in backward.
class BackwardContext {
 public:
  BackwardContext(Graph& graph, std::size_t node) : graph_(graph), node_(node) {}

  const SignalTensor& output() const;
  const SignalTensor& input(std::size_t i) const;
  bool wants(std::size_t i) const;
  /// Zero-initialised on first access; accumulate into it.
  std::span<double> input_grad(std::size_t i);

 private:
  Graph& graph_;
  std::size_t node_;
};

using BackwardFn = std::function<void(std::span<const double> grad_out, BackwardContext& ctx)>;

/// Tape of operations recorded in topological order. Backward walks the tape
/// in exact reverse order and deposits leaf gradients into the bound tensors.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf owning a copy of `value`; never receives gradients.
  Var constant(SignalTensor value);
  /// Leaf bound to an external tensor. When `track` is set and the tensor
  /// requires grad, backward accumulates into `tensor.grad()`.
  Var variable(SignalTensor& tensor, bool track = true);
  /// Leaf viewing an external tensor without copying; never receives
  /// gradients. The tensor must outlive the graph.
  Var reference(const SignalTensor& tensor);

  /// Appends an op node. Inputs must already be in this graph.
  Var record(OpKind kind, std::vector<Var> inputs, SignalTensor value, BackwardFn backward);

  const SignalTensor& value(std::size_t id) const;
  OpKind kind(std::size_t id) const { return nodes_.at(id).kind; }
  std::span<const std::size_t> inputs(std::size_t id) const { return nodes_.at(id).inputs; }
  bool needs_grad(std::size_t id) const { return nodes_.at(id).needs_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Reverse-mode sweep from a scalar loss. Gradients of tracked leaves are
  /// added to their bound tensors; node-level buffers are released afterwards.
  void backward(Var loss);

  /// Order in which the last backward() call visited op nodes.
  const std::vector<std::size_t>& last_backward_order() const { return visit_order_; }

 private:
  friend class BackwardContext;

  struct Node {
    OpKind kind = OpKind::constant;
    std::vector<std::size_t> inputs;
    SignalTensor owned;
    const SignalTensor* view = nullptr;
    SignalTensor* bound = nullptr;
    bool needs_grad = false;
    BackwardFn backward;
  };

  std::span<double> grad_buffer(std::size_t id);

  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;
  std::vector<std::size_t> visit_order_;
};

}  // namespace postfilter::ad
