#include "srr/ranker.hpp"

#include "srr/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace srr {

void RankerConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::ConfigError, what); };
  if (input_dim == 0) fail("input_dim must be positive");
  if (proj_dim == 0 || num_heads == 0 || ffn_dim == 0) fail("proj_dim, num_heads and ffn_dim must be positive");
  if (proj_dim % num_heads != 0) fail("proj_dim must be divisible by num_heads");
  if (max_list_size == 0) fail("max_list_size must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) fail("temperature must be positive");
  if (!(layer_fraction > 0.0 && layer_fraction <= 1.0)) fail("layer_fraction must lie in (0, 1]");
}

std::size_t parameter_count(const RankerConfig& c) {
  const std::size_t d = c.input_dim, p = c.proj_dim, f = c.ffn_dim;
  const std::size_t projection = d * p;
  const std::size_t norms = 4 * p;
  const std::size_t attention = 4 * (p * p + p);
  const std::size_t ffn = p * f + f + f * p + p;
  return projection + norms + attention + ffn;
}

template <class T>
RankerParameters<T> RankerParameters<T>::zeros(const RankerConfig& c) {
  c.validate();
  const Eigen::Index d = c.input_dim, p = c.proj_dim, f = c.ffn_dim;
  RankerParameters out;
  out.projection = Tensor2<T>::Zero(d, p);
  out.ln1_gain = Tensor2<T>::Zero(1, p);
  out.ln1_bias = Tensor2<T>::Zero(1, p);
  for (Tensor2<T>* w : {&out.wq, &out.wk, &out.wv, &out.wo}) *w = Tensor2<T>::Zero(p, p);
  for (Tensor2<T>* b : {&out.bq, &out.bk, &out.bv, &out.bo}) *b = Tensor2<T>::Zero(1, p);
  out.ln2_gain = Tensor2<T>::Zero(1, p);
  out.ln2_bias = Tensor2<T>::Zero(1, p);
  out.w1 = Tensor2<T>::Zero(p, f);
  out.b1 = Tensor2<T>::Zero(1, f);
  out.w2 = Tensor2<T>::Zero(f, p);
  out.b2 = Tensor2<T>::Zero(1, p);
  return out;
}

template <class T>
RankerParameters<T> RankerParameters<T>::initialize(const RankerConfig& c, Rng& rng) {
  RankerParameters out = zeros(c);
  auto fill_uniform = [&rng](Tensor2<T>& w) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(w.rows()));
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<T>(rng.uniform(-bound, bound));
  };
  fill_uniform(out.projection);
  fill_uniform(out.wq);
  fill_uniform(out.wk);
  fill_uniform(out.wv);
  fill_uniform(out.wo);
  fill_uniform(out.w1);
  fill_uniform(out.w2);
  out.ln1_gain.setOnes();
  out.ln2_gain.setOnes();
  return out;
}

template <class T>
std::vector<const Tensor2<T>*> RankerParameters<T>::blocks_const() const {
  std::vector<const Tensor2<T>*> out;
  out.reserve(kBlockCount);
  for_each_block([&](std::string_view, const Tensor2<T>& t) { out.push_back(&t); });
  return out;
}

template <class T>
bool RankerParameters<T>::all_finite() const {
  bool ok = true;
  for_each_block([&](std::string_view, const Tensor2<T>& t) { ok = ok && t.allFinite(); });
  return ok;
}

template <class T>
bool RankerParameters<T>::matches(const RankerConfig& c) const {
  const RankerParameters shape = zeros(c);
  const auto want = shape.blocks_const();
  const auto have = blocks_const();
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (want[i]->rows() != have[i]->rows() || want[i]->cols() != have[i]->cols()) return false;
  }
  return true;
}

template <class T>
std::vector<Var> register_parameters(Tape<T>& tape, const RankerParameters<T>& params) {
  std::vector<Var> vars;
  vars.reserve(RankerParameters<T>::kBlockCount);
  params.for_each_block([&](std::string_view, const Tensor2<T>& t) { vars.push_back(tape.parameter_view(t)); });
  return vars;
}

namespace {

// Indices into the registered parameter list.
enum Block : std::size_t {
  kProjection, kLn1Gain, kLn1Bias, kWq, kBq, kWk, kBk, kWv, kBv, kWo, kBo,
  kLn2Gain, kLn2Bias, kW1, kB1, kW2, kB2,
};

template <class T>
Tensor2<T> dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  Tensor2<T> mask(rows, cols);
  const T keep = static_cast<T>(1.0 / (1.0 - rate));
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng.uniform() < rate ? T(0) : keep;
  return mask;
}

template <class T>
Var maybe_dropout(Tape<T>& tape, Var x, const RankerConfig& c, Mode mode, Rng* rng) {
  if (mode != Mode::Train || c.dropout <= 0.0) return x;
  if (rng == nullptr) throw Error(ErrorCode::ConfigError, "train mode with dropout needs a generator");
  const auto& v = tape.value(x);
  return tape.mul_mask(x, dropout_mask<T>(v.rows(), v.cols(), c.dropout, *rng));
}

void check_param_count(std::size_t n) {
  if (n != RankerParameters<float>::kBlockCount) {
    throw Error(ErrorCode::ShapeMismatch, "expected " + std::to_string(RankerParameters<float>::kBlockCount) +
                                              " parameter blocks, got " + std::to_string(n));
  }
}

}  // namespace

template <class T>
Var encoder_block(Tape<T>& tape, std::span<const Var> p, Var x, const RankerConfig& c, Mode mode, Rng* rng) {
  check_param_count(p.size());
  const auto& xv = tape.value(x);
  if (xv.cols() != static_cast<Eigen::Index>(c.proj_dim) || xv.rows() < 1) {
    throw Error(ErrorCode::ShapeMismatch, "encoder input must be seq x proj_dim");
  }
  const Eigen::Index head_dim = c.proj_dim / c.num_heads;
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(head_dim)));

  // Attention sublayer.
  const Var a = tape.layer_norm(x, p[kLn1Gain], p[kLn1Bias], static_cast<T>(kLayerNormEpsilon));
  const Var q = tape.add_row(tape.matmul(a, p[kWq]), p[kBq]);
  const Var k = tape.add_row(tape.matmul(a, p[kWk]), p[kBk]);
  const Var v = tape.add_row(tape.matmul(a, p[kWv]), p[kBv]);
  std::vector<Var> heads;
  heads.reserve(c.num_heads);
  for (Eigen::Index h = 0; h < static_cast<Eigen::Index>(c.num_heads); ++h) {
    const Var qh = tape.slice_cols(q, h * head_dim, head_dim);
    const Var kh = tape.slice_cols(k, h * head_dim, head_dim);
    const Var vh = tape.slice_cols(v, h * head_dim, head_dim);
    Var weights = tape.softmax_rows(tape.scale(tape.matmul_bt(qh, kh), scale));
    weights = maybe_dropout(tape, weights, c, mode, rng);
    heads.push_back(tape.matmul(weights, vh));
  }
  const Var merged = heads.size() == 1 ? heads.front() : tape.concat_cols(heads);
  const Var attended = tape.add_row(tape.matmul(merged, p[kWo]), p[kBo]);
  const Var x1 = tape.add(x, attended);

  // Feed-forward sublayer.
  const Var b = tape.layer_norm(x1, p[kLn2Gain], p[kLn2Bias], static_cast<T>(kLayerNormEpsilon));
  Var hidden = tape.gelu(tape.add_row(tape.matmul(b, p[kW1]), p[kB1]));
  hidden = maybe_dropout(tape, hidden, c, mode, rng);
  const Var ffn = tape.add_row(tape.matmul(hidden, p[kW2]), p[kB2]);
  return tape.add(x1, ffn);
}

namespace {

// Responses sorted by content (ties by index). Encoding in this order makes
// the scores bit-exactly equivariant under reordering of the responses, not
// just equal up to floating-point summation order.
template <class T>
std::vector<Eigen::Index> canonical_order(const Tensor2<T>& embeddings) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(embeddings.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin() + 1, order.end(), [&](Eigen::Index l, Eigen::Index r) {
    const auto a = row_span(embeddings, l);
    const auto b = row_span(embeddings, r);
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
  });
  return order;
}

}  // namespace

template <class T>
Var score_on_tape(Tape<T>& tape, std::span<const Var> p, const Tensor2<T>& embeddings, const RankerConfig& c,
                  Mode mode, Rng* rng, Var* encoded) {
  check_param_count(p.size());
  const Eigen::Index m = embeddings.rows() - 1;
  if (embeddings.cols() != static_cast<Eigen::Index>(c.input_dim)) {
    throw Error(ErrorCode::DimensionMismatch, "embedding length " + std::to_string(embeddings.cols()) +
                                                  " does not match model input_dim " + std::to_string(c.input_dim));
  }
  if (m < 1 || m > static_cast<Eigen::Index>(c.max_list_size)) {
    throw Error(ErrorCode::DimensionMismatch, "list size " + std::to_string(m) + " outside [1, " +
                                                  std::to_string(c.max_list_size) + "]");
  }
  if (tape.value(p[kProjection]).rows() != embeddings.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "projection rows do not match embedding length");
  }

  const std::vector<Eigen::Index> order = canonical_order(embeddings);
  std::vector<Eigen::Index> inverse(order.size());
  Tensor2<T> canonical(embeddings.rows(), embeddings.cols());
  for (std::size_t i = 0; i < order.size(); ++i) {
    canonical.row(static_cast<Eigen::Index>(i)) = embeddings.row(order[i]);
    inverse[static_cast<std::size_t>(order[i])] = static_cast<Eigen::Index>(i);
  }

  const Var input = tape.constant(std::move(canonical));
  const Var projected = tape.matmul(input, p[kProjection]);
  const Var out = tape.gather_rows(encoder_block(tape, p, projected, c, mode, rng), std::move(inverse));
  if (encoded) *encoded = out;
  return tape.cosine_to_first_row(out);
}

std::vector<std::size_t> rank(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

template <class T>
ScoredList score_list(const Tensor2<T>& embeddings, const RankerParameters<T>& params, const RankerConfig& config,
                      Mode mode, Rng* rng) {
  Tape<T> tape;
  const std::vector<Var> vars = register_parameters(tape, params);
  Var encoded;
  const Var s = score_on_tape(tape, vars, embeddings, config, mode, rng, &encoded);

  ScoredList out;
  const auto& sv = tape.value(s);
  out.scores.scores.resize(static_cast<std::size_t>(sv.cols()));
  for (Eigen::Index i = 0; i < sv.cols(); ++i) {
    out.scores.scores[static_cast<std::size_t>(i)] = std::clamp(static_cast<double>(sv(0, i)), -1.0, 1.0);
  }
  out.scores.ranking = rank(out.scores.scores);

  const auto& ev = tape.value(encoded);
  auto to_vec = [&](Eigen::Index r) {
    std::vector<double> row(static_cast<std::size_t>(ev.cols()));
    for (Eigen::Index j = 0; j < ev.cols(); ++j) row[static_cast<std::size_t>(j)] = ev(r, j);
    return row;
  };
  out.outputs.inst = to_vec(0);
  for (Eigen::Index r = 1; r < ev.rows(); ++r) out.outputs.resp.push_back(to_vec(r));
  return out;
}

template <class T>
ScoredList score_list(std::span<const T> inst, std::span<const std::span<const T>> resps,
                      const RankerParameters<T>& params, const RankerConfig& config, Mode mode, Rng* rng) {
  Tensor2<T> embeddings(static_cast<Eigen::Index>(resps.size() + 1), static_cast<Eigen::Index>(inst.size()));
  auto put = [&](Eigen::Index r, std::span<const T> v) {
    if (v.size() != inst.size()) {
      throw Error(ErrorCode::DimensionMismatch, "response embedding length differs from instruction");
    }
    std::copy(v.begin(), v.end(), row_span(embeddings, r).begin());
  };
  put(0, inst);
  for (std::size_t i = 0; i < resps.size(); ++i) put(static_cast<Eigen::Index>(i + 1), resps[i]);
  return score_list(embeddings, params, config, mode, rng);
}

template <class T>
Tensor2<T> attention_block_forward(const Tensor2<T>& x, const RankerParameters<T>& params,
                                   const RankerConfig& config) {
  Tape<T> tape;
  const std::vector<Var> vars = register_parameters(tape, params);
  const Var out = encoder_block(tape, vars, tape.constant(x), config, Mode::Infer, nullptr);
  return tape.value(out);
}

#define SRR_INSTANTIATE(T)                                                                                      \
  template struct RankerParameters<T>;                                                                         \
  template std::vector<Var> register_parameters(Tape<T>&, const RankerParameters<T>&);                         \
  template Var encoder_block(Tape<T>&, std::span<const Var>, Var, const RankerConfig&, Mode, Rng*);            \
  template Var score_on_tape(Tape<T>&, std::span<const Var>, const Tensor2<T>&, const RankerConfig&, Mode,     \
                             Rng*, Var*);                                                                      \
  template ScoredList score_list(const Tensor2<T>&, const RankerParameters<T>&, const RankerConfig&, Mode,     \
                                 Rng*);                                                                        \
  template ScoredList score_list(std::span<const T>, std::span<const std::span<const T>>,                     \
                                 const RankerParameters<T>&, const RankerConfig&, Mode, Rng*);                 \
  template Tensor2<T> attention_block_forward(const Tensor2<T>&, const RankerParameters<T>&, const RankerConfig&);

SRR_INSTANTIATE(float)
SRR_INSTANTIATE(double)

#undef SRR_INSTANTIATE

}  // namespace srr
