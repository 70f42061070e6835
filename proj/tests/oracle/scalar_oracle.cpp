#include "scalar_oracle.hpp"

#include <cmath>
#include <stdexcept>

namespace oracle {

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double cosine(const Vec& a, const Vec& b) { return dot(a, b) / (std::sqrt(dot(a, a)) * std::sqrt(dot(b, b))); }

Vec softmax(const Vec& s, double tau) {
  double hi = s[0];
  for (double v : s) hi = v > hi ? v : hi;
  Vec out(s.size());
  double z = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    out[i] = std::exp((s[i] - hi) / tau);
    z += out[i];
  }
  for (double& v : out) v /= z;
  return out;
}

double kl(const Vec& p_star, const Vec& p_hat) {
  double total = 0.0;
  for (std::size_t i = 0; i < p_star.size(); ++i) {
    if (p_star[i] > 0.0) total += p_star[i] * std::log(p_star[i] / p_hat[i]);
  }
  return total;
}

double gelu(double x) {
  const double pi = 3.14159265358979323846;
  return 0.5 * x * (1.0 + std::tanh(std::sqrt(2.0 / pi) * (x + 0.044715 * x * x * x)));
}

Mat matmul(const Mat& a, const Mat& b) {
  const std::size_t n = a.size(), k = b.size(), m = b[0].size();
  Mat out(n, Vec(m, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t t = 0; t < k; ++t) out[i][j] += a[i][t] * b[t][j];
  return out;
}

namespace {

Mat add_bias(Mat x, const Vec& b) {
  for (Vec& row : x)
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += b[j];
  return x;
}

Mat add(Mat a, const Mat& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) a[i][j] += b[i][j];
  return a;
}

}  // namespace

Mat layer_norm(const Mat& x, const Vec& gain, const Vec& bias, double eps) {
  Mat out = x;
  for (std::size_t r = 0; r < x.size(); ++r) {
    const double n = static_cast<double>(x[r].size());
    double mean = 0.0;
    for (double v : x[r]) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : x[r]) var += (v - mean) * (v - mean);
    var /= n;
    for (std::size_t j = 0; j < x[r].size(); ++j) {
      out[r][j] = (x[r][j] - mean) / std::sqrt(var + eps) * gain[j] + bias[j];
    }
  }
  return out;
}

Mat block(const Mat& x, const Weights& w) {
  const std::size_t seq = x.size();
  const std::size_t p = x[0].size();
  const std::size_t hd = p / w.heads;

  const Mat a = layer_norm(x, w.ln1_gain, w.ln1_bias, 1e-5);
  const Mat q = add_bias(matmul(a, w.wq), w.bq);
  const Mat k = add_bias(matmul(a, w.wk), w.bk);
  const Mat v = add_bias(matmul(a, w.wv), w.bv);

  Mat merged(seq, Vec(p, 0.0));
  for (std::size_t h = 0; h < w.heads; ++h) {
    for (std::size_t i = 0; i < seq; ++i) {
      Vec logits(seq);
      for (std::size_t j = 0; j < seq; ++j) {
        double s = 0.0;
        for (std::size_t t = 0; t < hd; ++t) s += q[i][h * hd + t] * k[j][h * hd + t];
        logits[j] = s / std::sqrt(static_cast<double>(hd));
      }
      const Vec att = softmax(logits, 1.0);
      for (std::size_t t = 0; t < hd; ++t) {
        double s = 0.0;
        for (std::size_t j = 0; j < seq; ++j) s += att[j] * v[j][h * hd + t];
        merged[i][h * hd + t] = s;
      }
    }
  }
  const Mat x1 = add(x, add_bias(matmul(merged, w.wo), w.bo));

  const Mat b = layer_norm(x1, w.ln2_gain, w.ln2_bias, 1e-5);
  Mat hidden = add_bias(matmul(b, w.w1), w.b1);
  for (Vec& row : hidden)
    for (double& val : row) val = gelu(val);
  return add(x1, add_bias(matmul(hidden, w.w2), w.b2));
}

Vec scores(const Mat& embeddings, const Weights& w) {
  const Mat out = block(matmul(embeddings, w.projection), w);
  Vec s;
  for (std::size_t i = 1; i < out.size(); ++i) s.push_back(cosine(out[0], out[i]));
  return s;
}

double list_loss(const Mat& embeddings, const std::vector<std::uint8_t>& labels, const Weights& w, double tau) {
  std::size_t k = 0;
  for (auto y : labels) k += y;
  if (k == 0) throw std::invalid_argument("no safe label");
  Vec target(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) target[i] = labels[i] ? 1.0 / static_cast<double>(k) : 0.0;
  return kl(target, softmax(scores(embeddings, w), tau));
}

}  // namespace oracle
