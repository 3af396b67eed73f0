#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <type_traits>

#include "adadim/error.hpp"

namespace adadim::detail {

// Little-endian encoding independent of host byte order.
template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::is_integral_v<T> || std::is_same_v<T, float>);
  if constexpr (std::is_same_v<T, float>) {
    put_le(out, std::bit_cast<std::uint32_t>(value));
  } else {
    using U = std::make_unsigned_t<T>;
    auto bits = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
    }
  }
}

// Bounds-checked cursor over an in-memory byte buffer.
class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

  void require(std::size_t n, const char* what) const {
    if (remaining() < n) {
      throw Error(Errc::Truncated, std::string("truncated ") + what + ": expected " +
                                       std::to_string(pos_ + n) + " bytes, got " +
                                       std::to_string(bytes_.size()));
    }
  }

  template <typename T>
  T get_le(const char* what) {
    if constexpr (std::is_same_v<T, float>) {
      return std::bit_cast<float>(get_le<std::uint32_t>(what));
    } else {
      require(sizeof(T), what);
      std::make_unsigned_t<T> bits = 0;
      for (std::size_t i = 0; i < sizeof(T); ++i) {
        bits |= static_cast<std::make_unsigned_t<T>>(
                    static_cast<unsigned char>(bytes_[pos_ + i]))
                << (8 * i);
      }
      pos_ += sizeof(T);
      return static_cast<T>(bits);
    }
  }

  std::string_view take(std::size_t n, const char* what) {
    require(n, what);
    auto view = bytes_.substr(pos_, n);
    pos_ += n;
    return view;
  }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace adadim::detail
