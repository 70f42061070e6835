#include "srr/model_io.hpp"

#include "srr/binary_io.hpp"
#include "srr/error.hpp"

#include <string>

namespace srr {

std::string encode_model(const RankerModel& model) {
  model.config.validate();
  if (!model.params.matches(model.config)) {
    throw Error(ErrorCode::ShapeMismatch, "parameters do not match the model config");
  }
  const RankerConfig& c = model.config;
  ByteWriter w;
  w.bytes(kModelMagic);
  w.uint<std::uint32_t>(kModelFormatVersion);
  w.uint<std::uint32_t>(c.input_dim);
  w.uint<std::uint32_t>(c.proj_dim);
  w.uint<std::uint32_t>(c.num_heads);
  w.uint<std::uint32_t>(c.ffn_dim);
  w.uint<std::uint32_t>(c.max_list_size);
  w.f64(c.dropout);
  w.f64(c.temperature);
  w.f64(c.layer_fraction);
  w.uint<std::uint64_t>(parameter_count(c));
  model.params.for_each_block([&](std::string_view, const Tensor2<float>& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) w.f32(t.data()[i]);
  });
  return w.take();
}

RankerModel decode_model(std::string_view bytes) {
  ByteReader r({bytes.data(), bytes.size()}, ErrorCode::CorruptModel);
  if (bytes.size() < kModelMagic.size() || r.bytes(kModelMagic.size()) != kModelMagic) {
    throw Error(ErrorCode::FormatError, "not an SRRM model file (bad magic)");
  }
  if (bytes.size() < 8) throw Error(ErrorCode::FormatError, "missing SRRM format version");
  const auto version = r.uint<std::uint32_t>();
  if (version != kModelFormatVersion) {
    throw Error(ErrorCode::FormatError, "unsupported SRRM format version " + std::to_string(version));
  }
  RankerModel model;
  RankerConfig& c = model.config;
  c.input_dim = r.uint<std::uint32_t>();
  c.proj_dim = r.uint<std::uint32_t>();
  c.num_heads = r.uint<std::uint32_t>();
  c.ffn_dim = r.uint<std::uint32_t>();
  c.max_list_size = r.uint<std::uint32_t>();
  c.dropout = r.f64();
  c.temperature = r.f64();
  c.layer_fraction = r.f64();
  try {
    c.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::CorruptModel, std::string("invalid stored config: ") + e.what());
  }
  const auto count = r.uint<std::uint64_t>();
  const std::size_t expected = parameter_count(c);
  if (count != expected) {
    throw Error(ErrorCode::CorruptModel, "stored float count " + std::to_string(count) +
                                             " does not match config (" + std::to_string(expected) + ")");
  }
  if (r.remaining() != expected * sizeof(float)) {
    throw Error(ErrorCode::CorruptModel, "weight section is " + std::to_string(r.remaining()) +
                                             " bytes, expected " + std::to_string(expected * sizeof(float)));
  }
  model.params = RankerParameters<float>::zeros(c);
  model.params.for_each_block([&](std::string_view, Tensor2<float>& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = r.f32();
  });
  return model;
}

void save_model(const RankerModel& model, const std::filesystem::path& path) {
  write_file(path, encode_model(model));
}

RankerModel load_model(const std::filesystem::path& path) { return decode_model(read_file(path)); }

}  // namespace srr
