#pragma once

#include "srr/ranker.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace srr {

struct RankerModel {
  RankerConfig config;
  RankerParameters<float> params;
};

// SRRM layout, little-endian:
//
//   char[4]  magic "SRRM"
//   u32      format version (kModelFormatVersion)
//   u32      input_dim, proj_dim, num_heads, ffn_dim, max_list_size
//   f64      dropout, temperature, layer_fraction
//   u64      total float count (must equal parameter_count(config))
//   f32[]    blocks in RankerParameters::visit order, each row-major
//
// Nothing follows the last weight.
inline constexpr std::string_view kModelMagic = "SRRM";
inline constexpr std::uint32_t kModelFormatVersion = 1;

std::string encode_model(const RankerModel& model);
// FormatError on bad magic/version, CorruptModel on any length mismatch.
RankerModel decode_model(std::string_view bytes);

void save_model(const RankerModel& model, const std::filesystem::path& path);
RankerModel load_model(const std::filesystem::path& path);

}  // namespace srr
