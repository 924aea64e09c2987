#include "tsaug/graph.hpp"

#include <stdexcept>
#include <string>

namespace tsaug {

std::string_view op_name(OpTag tag) {
  switch (tag) {
    case OpTag::leaf: return "leaf";
    case OpTag::add: return "add";
    case OpTag::sub: return "sub";
    case OpTag::mul: return "mul";
    case OpTag::div: return "div";
    case OpTag::dense: return "dense";
    case OpTag::conv1d: return "conv1d";
    case OpTag::relu: return "relu";
    case OpTag::elu: return "elu";
    case OpTag::softmax: return "softmax";
    case OpTag::batch_norm: return "batch_norm";
    case OpTag::cross_entropy: return "cross_entropy";
    case OpTag::avg_pool: return "avg_pool";
    case OpTag::concat: return "concat";
    case OpTag::gather: return "gather";
    case OpTag::sum: return "sum";
    case OpTag::mean: return "mean";
    case OpTag::sum_lastdim: return "sum_lastdim";
    case OpTag::l2_normalize: return "l2_normalize";
  }
  return "unknown";
}

const Tensor& Var::value() const {
  if (graph == nullptr) throw std::logic_error("Var is not attached to a graph");
  return graph->value(id);
}

Var Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Var Graph::constant(Tensor value) {
  if (!value.all_finite()) throw std::domain_error("non-finite value in constant tensor");
  return push(Node{OpTag::leaf, {}, std::move(value), false, std::nullopt, {}});
}

Var Graph::parameter(Tensor value) {
  if (!value.all_finite()) throw std::domain_error("non-finite value in parameter tensor");
  return push(Node{OpTag::leaf, {}, std::move(value), true, std::nullopt, {}});
}

Var Graph::record(OpTag tag, std::vector<std::size_t> inputs, Tensor value, BackwardFn backward) {
  if (backward_done_) throw std::logic_error("graph already differentiated; build a new one");
  bool needs = false;
  for (std::size_t in : inputs) {
    if (in >= nodes_.size()) throw std::logic_error("op input refers to a later node");
    needs = needs || nodes_[in].requires_grad;
  }
  if (!value.all_finite())
    throw std::domain_error("non-finite value produced by " + std::string(op_name(tag)));
  return push(Node{tag, std::move(inputs), std::move(value), needs, std::nullopt,
                   needs ? std::move(backward) : BackwardFn{}});
}

Tensor& Graph::grad_buffer(std::size_t id) {
  Node& n = nodes_.at(id);
  if (!n.grad) n.grad.emplace(n.value.shape());
  return *n.grad;
}

const Tensor& Graph::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (!n.grad) throw std::logic_error("no gradient reached node " + std::to_string(v.id));
  return *n.grad;
}

void Graph::backward(Var root) {
  if (root.graph != this) throw std::logic_error("backward: root does not belong to this graph");
  if (nodes_.empty() || root.id >= nodes_.size())
    throw std::logic_error("backward before forward: root node does not exist");
  if (backward_done_) throw std::logic_error("backward already ran on this graph");
  if (!nodes_[root.id].value.is_scalar())
    throw std::invalid_argument("backward requires a scalar root, got shape " +
                                shape_string(nodes_[root.id].value.shape()));
  backward_done_ = true;
  backward_visits_ = 0;
  if (!nodes_[root.id].requires_grad) return;

  grad_buffer(root.id)[0] = 1.0;
  for (std::size_t id = root.id + 1; id-- > 0;) {
    ++backward_visits_;
    Node& n = nodes_[id];
    if (!n.requires_grad || !n.grad || !n.backward) continue;
    n.backward(*this, id);
    // Intermediate gradients are no longer needed once pushed to inputs.
    if (n.tag != OpTag::leaf && id != root.id) n.grad.reset();
  }
}

}  // namespace tsaug
