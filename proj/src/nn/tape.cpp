#include "srr/tape.hpp"

#include "srr/error.hpp"
#include "srr/functional.hpp"

#include <cmath>
#include <string>

namespace srr {

template <class T>
Var Tape<T>::push_leaf(Tensor2<T> value, bool needs_grad) {
  nodes_.push_back(Node{std::move(value), nullptr, {}, {}, needs_grad ? "parameter" : "constant", needs_grad});
  return Var{nodes_.size() - 1};
}

template <class T>
Var Tape<T>::parameter_view(const Tensor2<T>& value) {
  nodes_.push_back(Node{{}, &value, {}, {}, "parameter", true});
  return Var{nodes_.size() - 1};
}

template <class T>
Var Tape<T>::push(std::string_view op, Tensor2<T> value, std::initializer_list<Var> inputs, Backward backward) {
  return push(op, std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
}

template <class T>
Var Tape<T>::push(std::string_view op, Tensor2<T> value, std::span<const Var> inputs, Backward backward) {
  bool needs = false;
  for (Var in : inputs) needs = needs || nodes_[in.id].needs_grad;
  if (!needs) backward = nullptr;
  nodes_.push_back(Node{std::move(value), nullptr, {}, std::move(backward), op, needs});
  return Var{nodes_.size() - 1};
}

template <class T>
void Tape<T>::check_shape(bool ok, std::string_view op) const {
  if (!ok) throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": inconsistent operand shapes");
}

template <class T>
void Tape<T>::backward(Var out) {
  check_shape(value(out).rows() == 1 && value(out).cols() == 1, "backward");
  for (Node& n : nodes_) n.grad.resize(0, 0);
  trace_.clear();
  if (nodes_[out.id].needs_grad) {
    grad_ref(out)(0, 0) = T(1);
    // A node whose gradient buffer was never written is not upstream of
    // `out`; its contribution is zero and its closure is skipped.
    for (std::size_t i = out.id + 1; i-- > 0;) {
      if (nodes_[i].backward && nodes_[i].grad.size() != 0) {
        nodes_[i].backward(*this, i);
        trace_.push_back(i);
      }
    }
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].needs_grad) grad_ref(Var{i});
  }
}

namespace {

// Activations here are a handful of rows against wide weight matrices.
// Eigen's blocked product repacks the whole weight matrix per call, so
// short-row products stream weight rows instead.
constexpr Eigen::Index kShortRows = 16;

// out (+)= A * B
template <class T>
void short_times(const Tensor2<T>& A, const Tensor2<T>& B, Tensor2<T>& out, bool add) {
  if (!add) out.resize(A.rows(), B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    auto row = out.row(i);
    Eigen::Index k = 0;
    if (!add) row = A(i, k++) * B.row(0);
    for (; k < A.cols(); ++k) row += A(i, k) * B.row(k);
  }
}

// out (+)= A * B^T
template <class T>
void short_times_t(const Tensor2<T>& A, const Tensor2<T>& B, Tensor2<T>& out, bool add) {
  if (!add) out.resize(A.rows(), B.rows());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < B.rows(); ++j) {
      const T d = A.row(i).dot(B.row(j));
      out(i, j) = add ? out(i, j) + d : d;
    }
  }
}

// out (+)= A^T * G, a rank-rows(A) update
template <class T>
void short_t_times(const Tensor2<T>& A, const Tensor2<T>& G, Tensor2<T>& out, bool add) {
  if (!add) out.resize(A.cols(), G.cols());
  for (Eigen::Index k = 0; k < A.cols(); ++k) {
    auto row = out.row(k);
    Eigen::Index i = 0;
    if (!add) row = A(i++, k) * G.row(0);
    for (; i < A.rows(); ++i) row += A(i, k) * G.row(i);
  }
}

}  // namespace

template <class T>
Var Tape<T>::matmul(Var a, Var b) {
  const auto& A = value(a);
  const auto& B = value(b);
  check_shape(A.cols() == B.rows(), "matmul");
  if (A.rows() > 0 && A.rows() <= kShortRows && A.cols() > 0) {
    Tensor2<T> out;
    short_times(A, B, out, false);
    return push("matmul", std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
      const auto& g = t.nodes_[self].grad;
      if (t.needs_grad(a)) {
        Tensor2<T>& ga = t.nodes_[a.id].grad;
        short_times_t(g, t.value(b), ga, ga.size() != 0);
      }
      if (t.needs_grad(b)) {
        Tensor2<T>& gb = t.nodes_[b.id].grad;
        short_t_times(t.value(a), g, gb, gb.size() != 0);
      }
    });
  }
  Tensor2<T> out = A * B;
  return push("matmul", std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
    const auto& g = t.nodes_[self].grad;
    if (t.needs_grad(a)) t.accumulate(a, g * t.value(b).transpose());
    if (t.needs_grad(b)) t.accumulate(b, t.value(a).transpose() * g);
  });
}

template <class T>
Var Tape<T>::matmul_bt(Var a, Var b) {
  const auto& A = value(a);
  const auto& B = value(b);
  check_shape(A.cols() == B.cols(), "matmul_bt");
  Tensor2<T> out = A * B.transpose();
  return push("matmul_bt", std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
    const auto& g = t.nodes_[self].grad;
    if (t.needs_grad(a)) t.accumulate(a, g * t.value(b));
    if (t.needs_grad(b)) t.accumulate(b, g.transpose() * t.value(a));
  });
}

template <class T>
Var Tape<T>::add(Var a, Var b) {
  const auto& A = value(a);
  const auto& B = value(b);
  check_shape(A.rows() == B.rows() && A.cols() == B.cols(), "add");
  Tensor2<T> out = A + B;
  return push("add", std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
    const auto& g = t.nodes_[self].grad;
    if (t.needs_grad(a)) t.accumulate(a, g);
    if (t.needs_grad(b)) t.accumulate(b, g);
  });
}

template <class T>
Var Tape<T>::add_row(Var a, Var bias) {
  const auto& A = value(a);
  const auto& B = value(bias);
  check_shape(B.rows() == 1 && A.cols() == B.cols(), "add_row");
  Tensor2<T> out = A.rowwise() + B.row(0);
  return push("add_row", std::move(out), {a, bias}, [a, bias](Tape& t, std::size_t self) {
    const auto& g = t.nodes_[self].grad;
    if (t.needs_grad(a)) t.accumulate(a, g);
    if (t.needs_grad(bias)) t.accumulate(bias, g.colwise().sum());
  });
}

template <class T>
Var Tape<T>::scale(Var a, T factor) {
  Tensor2<T> out = value(a) * factor;
  return push("scale", std::move(out), {a}, [a, factor](Tape& t, std::size_t self) {
    t.grad_ref(a) += t.nodes_[self].grad * factor;
  });
}

template <class T>
Var Tape<T>::mul_mask(Var a, Tensor2<T> mask) {
  check_shape(mask.rows() == value(a).rows() && mask.cols() == value(a).cols(), "mul_mask");
  Tensor2<T> out = value(a).cwiseProduct(mask);
  return push("mul_mask", std::move(out), {a}, [a, mask = std::move(mask)](Tape& t, std::size_t self) {
    t.grad_ref(a) += t.nodes_[self].grad.cwiseProduct(mask);
  });
}

template <class T>
Var Tape<T>::softmax_rows(Var a) {
  const auto& A = value(a);
  Tensor2<T> out(A.rows(), A.cols());
  for (Eigen::Index r = 0; r < A.rows(); ++r) {
    const T hi = A.row(r).maxCoeff();
    out.row(r) = (A.row(r).array() - hi).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return push("softmax_rows", std::move(out), {a}, [a](Tape& t, std::size_t self) {
    const auto& y = t.nodes_[self].value;
    const auto& g = t.nodes_[self].grad;
    auto& ga = t.grad_ref(a);
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const T inner = g.row(r).dot(y.row(r));
      ga.row(r).array() += y.row(r).array() * (g.row(r).array() - inner);
    }
  });
}

template <class T>
Var Tape<T>::layer_norm(Var x, Var gain, Var bias, T eps) {
  const auto& X = value(x);
  const auto& G = value(gain);
  const auto& B = value(bias);
  check_shape(G.rows() == 1 && B.rows() == 1 && G.cols() == X.cols() && B.cols() == X.cols(), "layer_norm");
  const auto n = X.cols();
  Tensor2<T> xhat(X.rows(), n);
  Tensor2<T> inv_std(X.rows(), 1);
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    const T mean = X.row(r).mean();
    const T var = (X.row(r).array() - mean).square().mean();
    inv_std(r, 0) = T(1) / std::sqrt(var + eps);
    xhat.row(r) = (X.row(r).array() - mean).matrix() * inv_std(r, 0);
  }
  Tensor2<T> out = (xhat.array().rowwise() * G.row(0).array()).rowwise() + B.row(0).array();
  return push("layer_norm", std::move(out), {x, gain, bias},
              [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t, std::size_t self) {
                const auto& g = t.nodes_[self].grad;
                if (t.needs_grad(bias)) t.grad_ref(bias) += g.colwise().sum();
                if (t.needs_grad(gain)) t.grad_ref(gain) += g.cwiseProduct(xhat).colwise().sum();
                if (!t.needs_grad(x)) return;
                const auto& G = t.value(gain);
                auto& gx = t.grad_ref(x);
                const T n = static_cast<T>(xhat.cols());
                for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
                  const Eigen::Array<T, 1, Eigen::Dynamic> gh = g.row(r).array() * G.row(0).array();
                  const T mean_gh = gh.sum() / n;
                  const T mean_ghx = (gh * xhat.row(r).array()).sum() / n;
                  gx.row(r).array() += inv_std(r, 0) * (gh - mean_gh - xhat.row(r).array() * mean_ghx);
                }
              });
}

template <class T>
Var Tape<T>::gelu(Var a) {
  static constexpr T kC = T(0.7978845608028654);  // sqrt(2 / pi)
  static constexpr T kA = T(0.044715);
  const auto& A = value(a);
  Tensor2<T> out(A.rows(), A.cols());
  for (Eigen::Index i = 0; i < A.size(); ++i) {
    const T v = A.data()[i];
    out.data()[i] = T(0.5) * v * (T(1) + std::tanh(kC * (v + kA * v * v * v)));
  }
  return push("gelu", std::move(out), {a}, [a](Tape& t, std::size_t self) {
    const auto& A = t.value(a);
    const auto& g = t.nodes_[self].grad;
    auto& ga = t.grad_ref(a);
    for (Eigen::Index i = 0; i < A.size(); ++i) {
      const T v = A.data()[i];
      const T th = std::tanh(kC * (v + kA * v * v * v));
      const T d = T(0.5) * (T(1) + th) + T(0.5) * v * (T(1) - th * th) * kC * (T(1) + T(3) * kA * v * v);
      ga.data()[i] += g.data()[i] * d;
    }
  });
}

template <class T>
Var Tape<T>::slice_cols(Var a, Eigen::Index first, Eigen::Index count) {
  const auto& A = value(a);
  check_shape(first >= 0 && count > 0 && first + count <= A.cols(), "slice_cols");
  Tensor2<T> out = A.middleCols(first, count);
  return push("slice_cols", std::move(out), {a}, [a, first, count](Tape& t, std::size_t self) {
    t.grad_ref(a).middleCols(first, count) += t.nodes_[self].grad;
  });
}

template <class T>
Var Tape<T>::concat_cols(std::span<const Var> parts) {
  check_shape(!parts.empty(), "concat_cols");
  const auto rows = value(parts[0]).rows();
  Eigen::Index cols = 0;
  for (Var p : parts) {
    check_shape(value(p).rows() == rows, "concat_cols");
    cols += value(p).cols();
  }
  Tensor2<T> out(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleCols(at, value(p).cols()) = value(p);
    at += value(p).cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return push("concat_cols", std::move(out), parts, [inputs](Tape& t, std::size_t self) {
    const auto& g = t.nodes_[self].grad;
    Eigen::Index at = 0;
    for (Var p : inputs) {
      const auto w = t.value(p).cols();
      if (t.needs_grad(p)) t.grad_ref(p) += g.middleCols(at, w);
      at += w;
    }
  });
}

template <class T>
Var Tape<T>::gather_rows(Var a, std::vector<Eigen::Index> rows) {
  const auto& A = value(a);
  Tensor2<T> out(static_cast<Eigen::Index>(rows.size()), A.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    check_shape(rows[i] >= 0 && rows[i] < A.rows(), "gather_rows");
    out.row(static_cast<Eigen::Index>(i)) = A.row(rows[i]);
  }
  return push("gather_rows", std::move(out), {a}, [a, rows = std::move(rows)](Tape& t, std::size_t self) {
    const auto& g = t.nodes_[self].grad;
    auto& ga = t.grad_ref(a);
    for (std::size_t i = 0; i < rows.size(); ++i) ga.row(rows[i]) += g.row(static_cast<Eigen::Index>(i));
  });
}

template <class T>
Var Tape<T>::sum(Var a) {
  Tensor2<T> out(1, 1);
  out(0, 0) = value(a).sum();
  return push("sum", std::move(out), {a}, [a](Tape& t, std::size_t self) {
    t.grad_ref(a).array() += t.nodes_[self].grad(0, 0);
  });
}

namespace {

// Accumulates d cos(a, b) into ga and gb, scaled by upstream g.
template <class T, class RowA, class RowB, class GA, class GB>
void cosine_backward(const RowA& a, const RowB& b, T g, GA* ga, GB* gb) {
  const T na = a.norm();
  const T nb = b.norm();
  const T s = a.dot(b) / (na * nb);
  if (ga) *ga += g * (b / (na * nb) - s * a / (na * na));
  if (gb) *gb += g * (a / (na * nb) - s * b / (nb * nb));
}

template <class T, class RowA, class RowB>
T cosine_value(const RowA& a, const RowB& b) {
  const T na = a.norm();
  const T nb = b.norm();
  if (!(na > T(kZeroNormEpsilon)) || !(nb > T(kZeroNormEpsilon))) {
    throw Error(ErrorCode::ZeroNorm, "cosine of a zero-norm vector");
  }
  return a.dot(b) / (na * nb);
}

}  // namespace

template <class T>
Var Tape<T>::cosine(Var a, Var b) {
  const auto& A = value(a);
  const auto& B = value(b);
  check_shape(A.rows() == 1 && B.rows() == 1 && A.cols() == B.cols() && A.cols() > 0, "cosine");
  Tensor2<T> out(1, 1);
  out(0, 0) = cosine_value<T>(A.row(0), B.row(0));
  return push("cosine", std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
    const T g = t.nodes_[self].grad(0, 0);
    Eigen::Matrix<T, 1, Eigen::Dynamic> da = Eigen::Matrix<T, 1, Eigen::Dynamic>::Zero(t.value(a).cols());
    Eigen::Matrix<T, 1, Eigen::Dynamic> db = da;
    cosine_backward<T>(t.value(a).row(0), t.value(b).row(0), g, &da, &db);
    if (t.needs_grad(a)) t.grad_ref(a).row(0) += da;
    if (t.needs_grad(b)) t.grad_ref(b).row(0) += db;
  });
}

template <class T>
Var Tape<T>::cosine_to_first_row(Var a) {
  const auto& A = value(a);
  check_shape(A.rows() >= 2 && A.cols() > 0, "cosine_to_first_row");
  Tensor2<T> out(1, A.rows() - 1);
  for (Eigen::Index r = 1; r < A.rows(); ++r) out(0, r - 1) = cosine_value<T>(A.row(0), A.row(r));
  return push("cosine_to_first_row", std::move(out), {a}, [a](Tape& t, std::size_t self) {
    const auto& A = t.value(a);
    const auto& g = t.nodes_[self].grad;
    Eigen::Matrix<T, 1, Eigen::Dynamic> d0 = Eigen::Matrix<T, 1, Eigen::Dynamic>::Zero(A.cols());
    Eigen::Matrix<T, 1, Eigen::Dynamic> dr(A.cols());
    auto& ga = t.grad_ref(a);
    for (Eigen::Index r = 1; r < A.rows(); ++r) {
      dr.setZero();
      cosine_backward<T>(A.row(0), A.row(r), g(0, r - 1), &d0, &dr);
      ga.row(r) += dr;
    }
    ga.row(0) += d0;
  });
}

template <class T>
Var Tape<T>::listwise_kl(Var scores, std::span<const T> target, T tau) {
  const auto& S = value(scores);
  check_shape(S.rows() == 1 && S.cols() == static_cast<Eigen::Index>(target.size()), "listwise_kl");
  if (!(tau > 0)) throw Error(ErrorCode::DomainError, "temperature must be positive");
  const std::span<const T> s(S.data(), static_cast<std::size_t>(S.cols()));
  const T lse = log_sum_exp(s, tau);
  T loss = 0;
  Tensor2<T> p_hat(1, S.cols());
  Tensor2<T> p_star(1, S.cols());
  for (Eigen::Index i = 0; i < S.cols(); ++i) {
    const T log_p = s[i] / tau - lse;
    p_hat(0, i) = std::exp(log_p);
    p_star(0, i) = target[i];
    if (target[i] > 0) loss += target[i] * (std::log(target[i]) - log_p);
  }
  Tensor2<T> out(1, 1);
  out(0, 0) = loss;
  return push("listwise_kl", std::move(out), {scores},
              [scores, tau, p_hat = std::move(p_hat), p_star = std::move(p_star)](Tape& t, std::size_t self) {
                const T g = t.nodes_[self].grad(0, 0);
                t.grad_ref(scores) += (g / tau) * (p_hat - p_star);
              });
}

template class Tape<float>;
template class Tape<double>;

}  // namespace srr
