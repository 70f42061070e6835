#pragma once

#include "srr/rng.hpp"
#include "srr/tape.hpp"
#include "srr/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace srr {

struct RankerConfig {
  std::uint32_t input_dim = 4096;
  std::uint32_t proj_dim = 256;
  std::uint32_t num_heads = 4;
  std::uint32_t ffn_dim = 512;
  std::uint32_t max_list_size = 64;
  double dropout = 0.1;
  double temperature = 0.1;
  // Relative depth of the base-model layer the embeddings were taken from.
  double layer_fraction = 0.25;

  // Throws ConfigError on out-of-range fields.
  void validate() const;

  bool operator==(const RankerConfig&) const = default;
};

inline constexpr std::size_t kParameterBudget = 5'000'000;
inline constexpr double kLayerNormEpsilon = 1e-5;

std::size_t parameter_count(const RankerConfig& config);

enum class Mode { Train, Infer };

// Shared input projection followed by one pre-norm transformer block.
// Weight matrices are stored [in x out] so activations multiply on the left.
template <class T>
struct RankerParameters {
  Tensor2<T> projection;  // input_dim x proj_dim, no bias
  Tensor2<T> ln1_gain, ln1_bias;
  Tensor2<T> wq, bq, wk, bk, wv, bv, wo, bo;
  Tensor2<T> ln2_gain, ln2_bias;
  Tensor2<T> w1, b1;  // proj_dim x ffn_dim
  Tensor2<T> w2, b2;  // ffn_dim x proj_dim

  static constexpr std::size_t kBlockCount = 17;

  // Visits (name, tensor) in the fixed order used for serialization.
  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    f(std::string_view("projection"), self.projection);
    f(std::string_view("ln1_gain"), self.ln1_gain);
    f(std::string_view("ln1_bias"), self.ln1_bias);
    f(std::string_view("wq"), self.wq);
    f(std::string_view("bq"), self.bq);
    f(std::string_view("wk"), self.wk);
    f(std::string_view("bk"), self.bk);
    f(std::string_view("wv"), self.wv);
    f(std::string_view("bv"), self.bv);
    f(std::string_view("wo"), self.wo);
    f(std::string_view("bo"), self.bo);
    f(std::string_view("ln2_gain"), self.ln2_gain);
    f(std::string_view("ln2_bias"), self.ln2_bias);
    f(std::string_view("w1"), self.w1);
    f(std::string_view("b1"), self.b1);
    f(std::string_view("w2"), self.w2);
    f(std::string_view("b2"), self.b2);
  }
  template <class F>
  void for_each_block(F&& f) { visit(*this, std::forward<F>(f)); }
  template <class F>
  void for_each_block(F&& f) const { visit(*this, std::forward<F>(f)); }

  // All-zero tensors shaped for `config`.
  static RankerParameters zeros(const RankerConfig& config);

  // Linear weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases 0,
  // layer-norm gains 1.
  static RankerParameters initialize(const RankerConfig& config, Rng& rng);

  template <class U>
  RankerParameters<U> cast() const {
    RankerParameters<U> out;
    auto src = blocks_const();
    std::size_t i = 0;
    out.for_each_block([&](std::string_view, Tensor2<U>& dst) { dst = src[i++]->template cast<U>(); });
    return out;
  }

  bool all_finite() const;
  bool matches(const RankerConfig& config) const;

  std::vector<const Tensor2<T>*> blocks_const() const;
};

// Parameter leaves on a tape, in RankerParameters block order. The leaves
// read `params` in place, so it must outlive the tape.
template <class T>
std::vector<Var> register_parameters(Tape<T>& tape, const RankerParameters<T>& params);

// Runs the transformer block over an already-projected sequence x
// [seq x proj_dim]. `rng` is required only when mode == Train and dropout > 0.
template <class T>
Var encoder_block(Tape<T>& tape, std::span<const Var> params, Var x, const RankerConfig& config, Mode mode,
                  Rng* rng);

// Projection + encoder + cosine scores for one candidate list. `embeddings`
// holds the instruction in row 0 and responses in rows 1..m. Returns the
// 1 x m score row; `encoded` receives the (m+1) x proj_dim encoder output.
template <class T>
Var score_on_tape(Tape<T>& tape, std::span<const Var> params, const Tensor2<T>& embeddings,
                  const RankerConfig& config, Mode mode, Rng* rng, Var* encoded = nullptr);

struct EncoderOutputs {
  std::vector<double> inst;
  std::vector<std::vector<double>> resp;
};

struct ScoreVector {
  std::vector<double> scores;
  std::vector<std::size_t> ranking;
};

struct ScoredList {
  ScoreVector scores;
  EncoderOutputs outputs;
};

// Stable descending order; ties keep ascending original index.
std::vector<std::size_t> rank(std::span<const double> scores);

template <class T>
ScoredList score_list(const Tensor2<T>& embeddings, const RankerParameters<T>& params, const RankerConfig& config,
                      Mode mode = Mode::Infer, Rng* rng = nullptr);

template <class T>
ScoredList score_list(std::span<const T> inst, std::span<const std::span<const T>> resps,
                      const RankerParameters<T>& params, const RankerConfig& config, Mode mode = Mode::Infer,
                      Rng* rng = nullptr);

// Infer-mode block output for an already-projected sequence.
template <class T>
Tensor2<T> attention_block_forward(const Tensor2<T>& x, const RankerParameters<T>& params,
                                   const RankerConfig& config);

extern template struct RankerParameters<float>;
extern template struct RankerParameters<double>;

}  // namespace srr
