#pragma once

// Define-by-run reverse-mode differentiation. A Graph is built fresh for every
// forward pass; ops append nodes in execution order, so node ids are already a
// topological order and backward is a single reverse sweep.

#include <cstddef>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "tsaug/tensor.hpp"

namespace tsaug {

enum class OpTag {
  leaf,
  add,
  sub,
  mul,
  div,
  dense,
  conv1d,
  relu,
  elu,
  softmax,
  batch_norm,
  cross_entropy,
  avg_pool,
  concat,
  gather,
  sum,
  mean,
  sum_lastdim,
  l2_normalize,
};

std::string_view op_name(OpTag tag);

class Graph;

// Handle to a node of a Graph. Cheap to copy; valid while its Graph lives.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

class Graph {
 public:
  // Receives the graph and the id of the node being differentiated; reads
  // grad_of(self) and accumulates into grad_buffer(input) for inputs that
  // require gradients.
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  Var parameter(Tensor value);

  // Appends an op node. Throws std::domain_error if the value is not finite.
  Var record(OpTag tag, std::vector<std::size_t> inputs, Tensor value, BackwardFn backward);

  // Runs reverse-mode accumulation from a scalar root. May be called once.
  void backward(Var root);

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  OpTag tag(std::size_t id) const { return nodes_.at(id).tag; }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_.at(id).inputs; }

  // Gradient of the root w.r.t. a node; throws if none was accumulated.
  const Tensor& grad(Var v) const;
  bool has_grad(Var v) const { return nodes_.at(v.id).grad.has_value(); }

  // For BackwardFn implementations.
  const Tensor& grad_of(std::size_t id) const { return *nodes_[id].grad; }
  Tensor& grad_buffer(std::size_t id);

  std::size_t size() const { return nodes_.size(); }
  std::size_t backward_visits() const { return backward_visits_; }

 private:
  struct Node {
    OpTag tag = OpTag::leaf;
    std::vector<std::size_t> inputs;
    Tensor value;
    bool requires_grad = false;
    std::optional<Tensor> grad;
    BackwardFn backward;
  };

  Var push(Node node);

  std::vector<Node> nodes_;
  bool backward_done_ = false;
  std::size_t backward_visits_ = 0;
};

}  // namespace tsaug
