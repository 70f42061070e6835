#pragma once

#include "srr/tensor.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace srr {

// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = 0;
};

// Reverse-mode tape over the small set of primitives the ranker uses.
//
// Every op appends one node holding its forward value and a closure that
// pushes the node's gradient onto its inputs. backward() walks the nodes in
// exact reverse insertion order. Nodes that do not depend on any
// gradient-requiring leaf carry no closure work and no gradient buffer.
//
// A tape is single-use and owned by one evaluation; it is not thread-safe.
template <class T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var parameter(Tensor2<T> value) { return push_leaf(std::move(value), true); }
  // Parameter leaf that reads `value` in place; it must outlive the tape.
  Var parameter_view(const Tensor2<T>& value);
  Var constant(Tensor2<T> value) { return push_leaf(std::move(value), false); }

  const Tensor2<T>& value(Var v) const {
    const Node& n = nodes_[v.id];
    return n.view ? *n.view : n.value;
  }
  // Valid after backward(); zero-sized for nodes that need no gradient.
  const Tensor2<T>& grad(Var v) const { return nodes_[v.id].grad; }
  Tensor2<T> take_grad(Var v) { return std::move(nodes_[v.id].grad); }
  bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }
  std::string_view op_name(Var v) const { return nodes_[v.id].op; }
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(out)/d(out) = 1 for a 1 x 1 output and propagates to every node.
  void backward(Var out);

  // Node ids whose backward closure ran, in the order they ran.
  std::span<const std::size_t> backward_trace() const { return trace_; }

  // a[r x k] * b[k x c]
  Var matmul(Var a, Var b);
  // a[r x k] * b[c x k]^T
  Var matmul_bt(Var a, Var b);
  Var add(Var a, Var b);
  // Broadcast a 1 x c bias over every row of a.
  Var add_row(Var a, Var bias);
  Var scale(Var a, T factor);
  // Elementwise product with a fixed mask (dropout).
  Var mul_mask(Var a, Tensor2<T> mask);
  Var softmax_rows(Var a);
  Var layer_norm(Var x, Var gain, Var bias, T eps);
  // tanh-approximated GELU.
  Var gelu(Var a);
  Var slice_cols(Var a, Eigen::Index first, Eigen::Index count);
  Var concat_cols(std::span<const Var> parts);
  // Output row i is input row rows[i].
  Var gather_rows(Var a, std::vector<Eigen::Index> rows);
  Var sum(Var a);
  // cos(a, b) for two 1 x n vectors -> 1 x 1.
  Var cosine(Var a, Var b);
  // Row 0 against rows 1..r-1 -> 1 x (r-1).
  Var cosine_to_first_row(Var a);
  // KL(target || softmax(scores / tau)) for a 1 x m score row -> 1 x 1.
  Var listwise_kl(Var scores, std::span<const T> target, T tau);

 private:
  using Backward = std::function<void(Tape&, std::size_t)>;

  struct Node {
    Tensor2<T> value;
    const Tensor2<T>* view = nullptr;
    Tensor2<T> grad;
    Backward backward;
    std::string_view op;
    bool needs_grad = false;
  };

  Var push_leaf(Tensor2<T> value, bool needs_grad);
  Var push(std::string_view op, Tensor2<T> value, std::initializer_list<Var> inputs, Backward backward);
  Var push(std::string_view op, Tensor2<T> value, std::span<const Var> inputs, Backward backward);

  // Gradient buffers are allocated on first write during backward().
  Tensor2<T>& grad_ref(Var v) {
    Node& n = nodes_[v.id];
    if (n.grad.size() == 0) n.grad = Tensor2<T>::Zero(value(v).rows(), value(v).cols());
    return n.grad;
  }
  template <class Expr>
  void accumulate(Var v, const Expr& e) {
    Node& n = nodes_[v.id];
    if (n.grad.size() == 0) {
      n.grad.noalias() = e;
    } else {
      n.grad.noalias() += e;
    }
  }
  void check_shape(bool ok, std::string_view op) const;

  std::vector<Node> nodes_;
  std::vector<std::size_t> trace_;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace srr
