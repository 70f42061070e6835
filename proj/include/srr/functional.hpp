#pragma once

#include "srr/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace srr {

// Norms at or below this are treated as a degenerate encoder output.
inline constexpr double kZeroNormEpsilon = 1e-12;

template <class T>
T cosine_similarity(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size() || a.empty()) {
    throw Error(ErrorCode::ShapeMismatch, "cosine_similarity needs equal non-empty lengths");
  }
  T dot = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  const T na = std::sqrt(aa);
  const T nb = std::sqrt(bb);
  if (!(na > kZeroNormEpsilon) || !(nb > kZeroNormEpsilon)) {
    throw Error(ErrorCode::ZeroNorm, "cosine_similarity input has zero norm");
  }
  return std::clamp(dot / (na * nb), T(-1), T(1));
}

// log(sum(exp(x / tau))) with max subtraction.
template <class T>
T log_sum_exp(std::span<const T> x, T tau) {
  T hi = x[0];
  for (T v : x) hi = std::max(hi, v);
  T acc = 0;
  for (T v : x) acc += std::exp((v - hi) / tau);
  return hi / tau + std::log(acc);
}

template <class T>
std::vector<T> softmax_temp(std::span<const T> scores, T tau) {
  if (scores.empty()) throw Error(ErrorCode::ShapeMismatch, "softmax_temp of an empty vector");
  if (!(tau > 0)) throw Error(ErrorCode::DomainError, "softmax temperature must be positive");
  T hi = scores[0];
  for (T v : scores) hi = std::max(hi, v);
  std::vector<T> out(scores.size());
  T total = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp((scores[i] - hi) / tau);
    total += out[i];
  }
  for (T& v : out) v /= total;
  return out;
}

// KL(p_star || p_hat) with 0 * log(0 / x) = 0.
template <class T>
T kl_divergence(std::span<const T> p_star, std::span<const T> p_hat) {
  if (p_star.size() != p_hat.size()) {
    throw Error(ErrorCode::ShapeMismatch, "kl_divergence operands differ in length");
  }
  T total = 0;
  for (std::size_t i = 0; i < p_star.size(); ++i) {
    if (!(p_hat[i] > 0)) throw Error(ErrorCode::DomainError, "kl_divergence needs strictly positive p_hat");
    if (p_star[i] > 0) total += p_star[i] * (std::log(p_star[i]) - std::log(p_hat[i]));
  }
  return std::max(total, T(0));
}

}  // namespace srr
