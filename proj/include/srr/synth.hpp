#pragma once

#include "srr/dataset.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace srr {

// Gaussian two-cluster model with a single hidden safety direction u:
//   instruction = coupling * u + noise * N(0, I)
//   safe        = +separation/2 * u + noise * N(0, I)
//   unsafe      = -separation/2 * u + noise * N(0, I)
struct SyntheticSpec {
  std::uint32_t dim = 32;
  std::uint64_t num_lists = 700;
  std::uint32_t list_size = 2;
  std::uint32_t safe_per_list = 1;
  double separation = 4.0;
  double noise = 1.0;
  // Places the instruction level with the safe cluster along u.
  double instruction_coupling = 2.0;
  std::uint64_t seed = 7;
  // Seed for u; derived from `seed` when absent. Sharing it across specs
  // gives datasets with a common safety direction.
  std::optional<std::uint64_t> direction_seed;

  void validate() const;
};

// Unit vector drawn uniformly from the sphere.
std::vector<double> draw_direction(std::uint32_t dim, std::uint64_t seed);
std::vector<double> spec_direction(const SyntheticSpec& spec);

struct SyntheticData {
  Dataset dataset;
  std::vector<double> direction;
};

SyntheticData generate(const SyntheticSpec& spec);
// Uses the given unit direction instead of drawing one.
Dataset generate(const SyntheticSpec& spec, std::span<const double> direction);

// Fraction in [0, 1] of lists whose response with the largest u . embedding
// (ties to the lower index) is labeled safe.
double oracle_accuracy(const Dataset& dataset, std::span<const double> direction);

}  // namespace srr
