#pragma once

#include "oracle/scalar_oracle.hpp"
#include "srr/dataset.hpp"
#include "srr/ranker.hpp"
#include "srr/rng.hpp"

#include <filesystem>
#include <string>

namespace testing_support {

template <class T>
oracle::Mat to_mat(const srr::Tensor2<T>& t) {
  oracle::Mat out(static_cast<std::size_t>(t.rows()), oracle::Vec(static_cast<std::size_t>(t.cols())));
  for (Eigen::Index r = 0; r < t.rows(); ++r)
    for (Eigen::Index c = 0; c < t.cols(); ++c) out[r][c] = static_cast<double>(t(r, c));
  return out;
}

template <class T>
oracle::Vec to_vec(const srr::Tensor2<T>& t) {
  oracle::Vec out(static_cast<std::size_t>(t.size()));
  for (Eigen::Index i = 0; i < t.size(); ++i) out[i] = static_cast<double>(t.data()[i]);
  return out;
}

template <class T>
oracle::Weights to_oracle(const srr::RankerParameters<T>& p, std::size_t heads) {
  oracle::Weights w;
  w.projection = to_mat(p.projection);
  w.ln1_gain = to_vec(p.ln1_gain);
  w.ln1_bias = to_vec(p.ln1_bias);
  w.wq = to_mat(p.wq);
  w.wk = to_mat(p.wk);
  w.wv = to_mat(p.wv);
  w.wo = to_mat(p.wo);
  w.bq = to_vec(p.bq);
  w.bk = to_vec(p.bk);
  w.bv = to_vec(p.bv);
  w.bo = to_vec(p.bo);
  w.ln2_gain = to_vec(p.ln2_gain);
  w.ln2_bias = to_vec(p.ln2_bias);
  w.w1 = to_mat(p.w1);
  w.b1 = to_vec(p.b1);
  w.w2 = to_mat(p.w2);
  w.b2 = to_vec(p.b2);
  w.heads = heads;
  return w;
}

// Small config used across tests.
inline srr::RankerConfig small_config(std::uint32_t d = 8, std::uint32_t proj = 4, std::uint32_t heads = 2,
                                      std::uint32_t ffn = 6) {
  srr::RankerConfig c;
  c.input_dim = d;
  c.proj_dim = proj;
  c.num_heads = heads;
  c.ffn_dim = ffn;
  return c;
}

// Initialized weights with biases and norm parameters perturbed so every
// block influences the output.
template <class T>
srr::RankerParameters<T> random_params(const srr::RankerConfig& c, std::uint64_t seed) {
  srr::Rng rng(seed);
  auto p = srr::RankerParameters<T>::initialize(c, rng);
  p.for_each_block([&](std::string_view, srr::Tensor2<T>& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] += static_cast<T>(0.1 * rng.normal());
  });
  return p;
}

template <class T>
srr::Tensor2<T> random_matrix(Eigen::Index rows, Eigen::Index cols, srr::Rng& rng, double scale = 1.0) {
  srr::Tensor2<T> t(rows, cols);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<T>(scale * rng.normal());
  return t;
}

inline srr::CandidateList random_list(std::uint64_t id, std::size_t m, std::uint32_t d, srr::Rng& rng) {
  srr::CandidateList list;
  list.list_id = id;
  list.embeddings = random_matrix<float>(static_cast<Eigen::Index>(m + 1), d, rng);
  list.labels.assign(m, 0);
  list.labels[rng.below(m)] = 1;
  for (auto& y : list.labels)
    if (rng.uniform() < 0.3) y = 1;
  return list;
}

// Fresh directory under the system temp path, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing_support
