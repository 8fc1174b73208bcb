#pragma once

#include <xmc/grad/tensor.hpp>

#include <functional>
#include <vector>

namespace xmc::grad {

// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

// Reverse-mode tape. Every operation appends one node holding its output value
// and a closure that propagates the node's gradient into its inputs.
// backward() walks the nodes in exact reverse recording order, flushes leaf
// gradients into their Parameters, and clears the tape.
template <class T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor<T> value) { return push(std::move(value), nullptr, false, nullptr); }

  // Leaf bound to a parameter; its gradient is added to param.grad on backward.
  Var parameter(Parameter<T>& param) { return push(param.value, nullptr, true, &param); }

  Var record(Tensor<T> value, BackwardFn fn, bool requires_grad) {
    return push(std::move(value), std::move(fn), requires_grad, nullptr);
  }

  const Tensor<T>& value(Var v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

  // Gradient buffer for a node; only valid during backward().
  Tensor<T>& grad(std::size_t id) { return nodes_[id].grad; }
  const Tensor<T>& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  // Observer called with each node id as backward visits it (test hook).
  void set_visit_hook(std::function<void(std::size_t)> hook) { visit_hook_ = std::move(hook); }

  void backward(Var loss) {
    if (loss.id >= nodes_.size()) throw ShapeError("backward: loss is not a node of this tape");
    if (nodes_[loss.id].value.size() != 1)
      throw ShapeError("backward: loss must be a scalar, got shape " + shape_string(nodes_[loss.id].value.shape()));
    for (std::size_t i = 0; i <= loss.id; ++i)
      if (nodes_[i].requires_grad) nodes_[i].grad = Tensor<T>(nodes_[i].value.shape());
    nodes_[loss.id].grad[0] = T(1);
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& node = nodes_[i];
      if (visit_hook_) visit_hook_(i);
      if (!node.requires_grad) continue;
      if (node.param) {
        auto& g = node.param->grad;
        if (g.shape() != node.value.shape()) g = Tensor<T>(node.value.shape());
        for (std::size_t k = 0; k < g.size(); ++k) g[k] += node.grad[k];
      } else if (node.backward) {
        node.backward(*this, i);
      }
    }
    clear();
  }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    BackwardFn backward;
    bool requires_grad = false;
    Parameter<T>* param = nullptr;
  };

  Var push(Tensor<T> value, BackwardFn fn, bool requires_grad, Parameter<T>* param) {
    nodes_.push_back(Node{std::move(value), {}, std::move(fn), requires_grad, param});
    return Var{nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
  std::function<void(std::size_t)> visit_hook_;
};

}  // namespace xmc::grad
