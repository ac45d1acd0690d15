#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fscil::io {

// Little-endian encoders for the PCB1 / EMB1 / HDS1 / OPT1 / PCV1 formats.
// Writers append to a byte buffer; readers consume from a cursor and throw
// FormatError on truncation.

using Bytes = std::vector<std::uint8_t>;
using Magic = std::array<char, 4>;

void put_magic(Bytes& out, const Magic& magic);
void put_u32(Bytes& out, std::uint32_t v);
void put_u64(Bytes& out, std::uint64_t v);
void put_f32(Bytes& out, float v);
void put_f64(Bytes& out, double v);

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  /// Throws FormatError naming `what` unless the next four bytes are `magic`.
  void expect_magic(const Magic& magic, std::string_view what);
  bool peek_magic(const Magic& magic) const;
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();

  std::size_t remaining() const { return data_.size() - pos_; }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const;

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace fscil::io
