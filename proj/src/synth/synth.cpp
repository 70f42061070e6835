#include "srr/synth.hpp"

#include "srr/error.hpp"
#include "srr/rng.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace srr {

namespace {

constexpr std::uint64_t kDirectionStream = 0xd1ec7104ULL;

}  // namespace

void SyntheticSpec::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::ConfigError, what); };
  if (dim == 0) fail("synthetic dim must be positive");
  if (safe_per_list < 1 || safe_per_list >= list_size) fail("need 1 <= safe_per_list < list_size");
  if (!(separation >= 0.0) || !std::isfinite(separation)) fail("separation must be non-negative");
  if (!(noise >= 0.0) || !std::isfinite(noise)) fail("noise must be non-negative");
  if (!std::isfinite(instruction_coupling)) fail("instruction_coupling must be finite");
}

std::vector<double> draw_direction(std::uint32_t dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> u(dim);
  double norm = 0.0;
  while (norm < 1e-8) {
    for (double& x : u) x = rng.normal();
    norm = std::sqrt(std::inner_product(u.begin(), u.end(), u.begin(), 0.0));
  }
  for (double& x : u) x /= norm;
  return u;
}

std::vector<double> spec_direction(const SyntheticSpec& spec) {
  return draw_direction(spec.dim, spec.direction_seed.value_or(mix_seed(spec.seed, kDirectionStream)));
}

Dataset generate(const SyntheticSpec& spec, std::span<const double> direction) {
  spec.validate();
  if (direction.size() != spec.dim) {
    throw Error(ErrorCode::DimensionMismatch, "direction length differs from synthetic dim");
  }
  Dataset out(spec.dim, make_source_tag("synthetic"));
  const Eigen::Index d = spec.dim;
  const Eigen::Index m = spec.list_size;
  for (std::uint64_t id = 0; id < spec.num_lists; ++id) {
    Rng rng(mix_seed(spec.seed, id));
    CandidateList list;
    list.list_id = id;
    list.labels.assign(spec.list_size, 0);
    for (std::uint32_t i = 0; i < spec.safe_per_list; ++i) list.labels[i] = 1;
    rng.shuffle(std::span<std::uint8_t>(list.labels));

    list.embeddings.resize(m + 1, d);
    for (Eigen::Index r = 0; r <= m; ++r) {
      double shift = spec.instruction_coupling;
      if (r > 0) shift = (list.labels[static_cast<std::size_t>(r - 1)] == 1 ? 0.5 : -0.5) * spec.separation;
      for (Eigen::Index j = 0; j < d; ++j) {
        const double value = shift * direction[static_cast<std::size_t>(j)] + spec.noise * rng.normal();
        list.embeddings(r, j) = static_cast<float>(value);
      }
    }
    out.add(std::move(list));
  }
  return out;
}

SyntheticData generate(const SyntheticSpec& spec) {
  spec.validate();
  std::vector<double> u = spec_direction(spec);
  Dataset data = generate(spec, u);
  return {std::move(data), std::move(u)};
}

double oracle_accuracy(const Dataset& dataset, std::span<const double> direction) {
  if (direction.size() != dataset.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "direction length differs from dataset d");
  }
  if (dataset.size() == 0) return 0.0;
  std::size_t hits = 0;
  for (const CandidateList& list : dataset.lists()) {
    std::size_t best = 0;
    double best_score = -INFINITY;
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto row = row_span(list.embeddings, static_cast<Eigen::Index>(i + 1));
      double s = 0.0;
      for (std::size_t j = 0; j < row.size(); ++j) s += direction[j] * static_cast<double>(row[j]);
      if (s > best_score) {
        best_score = s;
        best = i;
      }
    }
    hits += list.labels[best] == 1 ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(dataset.size());
}

}  // namespace srr
