#pragma once

#include "srr/error.hpp"

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace srr {

// Little-endian encoder independent of host byte order.
class ByteWriter {
 public:
  void bytes(std::string_view raw) { buf_.append(raw); }

  template <class U>
  void uint(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }

  void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }

  const std::string& data() const { return buf_; }
  std::string take() { return std::move(buf_); }

 private:
  std::string buf_;
};

// Little-endian decoder. Running past the end throws `short_read`.
class ByteReader {
 public:
  ByteReader(std::span<const char> data, ErrorCode short_read) : data_(data), short_read_(short_read) {}

  std::string_view bytes(std::size_t n) {
    need(n);
    std::string_view out(data_.data() + pos_, n);
    pos_ += n;
    return out;
  }

  template <class U>
  U uint() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return v;
  }

  float f32() { return std::bit_cast<float>(uint<std::uint32_t>()); }
  double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }
  void set_context(std::string context) { context_ = std::move(context); }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) {
      throw Error(short_read_, "unexpected end of data at byte " + std::to_string(pos_) +
                                   (context_.empty() ? std::string() : " (" + context_ + ")"));
    }
  }

  std::span<const char> data_;
  ErrorCode short_read_;
  std::size_t pos_ = 0;
  std::string context_;
};

std::string read_file(const std::filesystem::path& path);
// Writes through a temporary sibling and renames it into place.
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace srr
