#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>

namespace srr {

// Dense row-major matrix. Vectors are 1 x n.
template <class T>
using Tensor2 = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class T>
std::span<const T> row_span(const Tensor2<T>& m, Eigen::Index r) {
  return {m.data() + r * m.cols(), static_cast<std::size_t>(m.cols())};
}

template <class T>
std::span<T> row_span(Tensor2<T>& m, Eigen::Index r) {
  return {m.data() + r * m.cols(), static_cast<std::size_t>(m.cols())};
}

template <class T>
Tensor2<T> row_vector(std::span<const T> values) {
  Tensor2<T> out(1, static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) out(0, static_cast<Eigen::Index>(i)) = values[i];
  return out;
}

template <class T>
bool all_finite(const Tensor2<T>& m) {
  return m.allFinite();
}

}  // namespace srr
