#pragma once

// Explicit-endianness readers and writers for the on-disk formats.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "tpsf/errors.hpp"

namespace tpsf::io {

template <typename T>
  requires std::is_arithmetic_v<T>
void write_le(std::ostream& os, T value) {
  std::array<unsigned char, sizeof(T)> bytes{};
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  os.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

inline void write_magic(std::ostream& os, const char (&magic)[5]) { os.write(magic, 4); }

/// Sequential reader that remembers its byte offset for error reporting.
class Reader {
 public:
  explicit Reader(std::istream& is, std::string what) : is_(is), what_(std::move(what)) {}

  std::uint64_t offset() const noexcept { return offset_; }

  void read_bytes(void* dst, std::size_t n) {
    is_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) {
      throw FormatError(what_ + ": truncated input", offset_ + static_cast<std::uint64_t>(is_.gcount()));
    }
    offset_ += n;
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  T le() {
    return ordered<T>(std::endian::little);
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  T be() {
    return ordered<T>(std::endian::big);
  }

  void expect_magic(const char (&magic)[5]) {
    const std::uint64_t at = offset_;
    char got[4];
    read_bytes(got, 4);
    if (std::memcmp(got, magic, 4) != 0) {
      throw FormatError(what_ + ": bad magic, expected '" + std::string(magic, 4) + "'", at);
    }
  }

  [[noreturn]] void fail(const std::string& msg, std::uint64_t at) const { throw FormatError(what_ + ": " + msg, at); }

 private:
  template <typename T>
  T ordered(std::endian order) {
    std::array<unsigned char, sizeof(T)> bytes{};
    read_bytes(bytes.data(), sizeof(T));
    if (order != std::endian::native) {
      for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    }
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
  }

  std::istream& is_;
  std::string what_;
  std::uint64_t offset_ = 0;
};

}  // namespace tpsf::io
