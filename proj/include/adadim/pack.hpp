#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "adadim/error.hpp"

namespace adadim {

inline std::size_t packed_size(std::size_t n, int bits) noexcept {
  return (n * static_cast<std::size_t>(bits) + 7) / 8;
}

// LSB-first contiguous bitstream: code i occupies bits [i*b, (i+1)*b).
inline std::vector<std::uint8_t> pack_codes(std::span<const std::uint8_t> codes, int bits) {
  if (bits < 1 || bits > 8) throw Error(Errc::InvalidArgument, "pack_codes: bits must be in [1,8]");
  const unsigned maxq = (1u << bits) - 1u;
  std::vector<std::uint8_t> out(packed_size(codes.size(), bits), 0);
  std::size_t bitpos = 0;
  for (std::size_t i = 0; i < codes.size(); ++i, bitpos += bits) {
    const unsigned code = codes[i];
    if (code > maxq) {
      throw Error(Errc::OutOfRange, "pack_codes: code " + std::to_string(code) + " at " + std::to_string(i) +
                                        " does not fit in " + std::to_string(bits) + " bits");
    }
    const std::size_t byte = bitpos / 8;
    const unsigned shift = bitpos % 8;
    const unsigned wide = code << shift;
    out[byte] |= static_cast<std::uint8_t>(wide & 0xFFu);
    if (shift + bits > 8) out[byte + 1] |= static_cast<std::uint8_t>(wide >> 8);
  }
  return out;
}

// Sequential reader over a packed bitstream.
class CodeReader {
 public:
  CodeReader(std::span<const std::uint8_t> bytes, int bits) : bytes_(bytes), bits_(bits), mask_((1u << bits) - 1u) {}

  // Byte offset of the most recent payload byte touched.
  std::size_t last_byte() const noexcept { return last_byte_; }

  std::uint8_t next() noexcept {
    const std::size_t byte = bitpos_ / 8;
    const unsigned shift = bitpos_ % 8;
    unsigned wide = bytes_[byte];
    last_byte_ = byte;
    if (shift + bits_ > 8) {
      wide |= static_cast<unsigned>(bytes_[byte + 1]) << 8;
      last_byte_ = byte + 1;
    }
    bitpos_ += static_cast<std::size_t>(bits_);
    return static_cast<std::uint8_t>((wide >> shift) & mask_);
  }

 private:
  std::span<const std::uint8_t> bytes_;
  int bits_;
  unsigned mask_;
  std::size_t bitpos_ = 0;
  std::size_t last_byte_ = 0;
};

inline std::vector<std::uint8_t> unpack_codes(std::span<const std::uint8_t> bytes, int bits, std::size_t n) {
  if (bits < 1 || bits > 8) throw Error(Errc::InvalidArgument, "unpack_codes: bits must be in [1,8]");
  const std::size_t need = packed_size(n, bits);
  if (bytes.size() < need) {
    throw Error(Errc::Truncated, "unpack_codes: need " + std::to_string(need) + " bytes for " + std::to_string(n) +
                                     " codes, got " + std::to_string(bytes.size()));
  }
  std::vector<std::uint8_t> codes(n);
  CodeReader reader(bytes, bits);
  for (auto& c : codes) c = reader.next();
  return codes;
}

}  // namespace adadim
