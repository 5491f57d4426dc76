#pragma once

// Little-endian primitives for the packed file formats.

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "dbnmix/errors.hpp"

namespace dbnmix::detail {

template <typename UInt>
void write_le(std::ostream& os, UInt value) {
  std::array<char, sizeof(UInt)> bytes{};
  for (std::size_t i = 0; i < sizeof(UInt); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  os.write(bytes.data(), bytes.size());
}

inline void write_f64(std::ostream& os, double value) { write_le(os, std::bit_cast<std::uint64_t>(value)); }

template <typename UInt>
UInt read_le(std::istream& is, const char* what) {
  std::array<unsigned char, sizeof(UInt)> bytes{};
  if (!is.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) {
    throw IoError(std::string("truncated file while reading ") + what);
  }
  UInt value = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) value |= static_cast<UInt>(bytes[i]) << (8 * i);
  return value;
}

inline double read_f64(std::istream& is, const char* what) {
  return std::bit_cast<double>(read_le<std::uint64_t>(is, what));
}

// Shortest decimal text that parses back to the same double.
inline std::string format_double(double value) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), end);
}

}  // namespace dbnmix::detail
