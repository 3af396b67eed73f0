#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "adadim/error.hpp"
#include "adadim/tensor.hpp"

namespace adadim {

// Seeded generator with a stream fixed across platforms: std::mt19937_64 bits
// (fully specified by the standard) with hand-written transforms, since the
// standard distributions are implementation-defined.
class StableRng {
 public:
  explicit StableRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (true) {
      const std::uint64_t r = engine_();
      if (r >= threshold) return r % n;
    }
  }

  // Standard normal via Box-Muller; the second variate is cached.
  double normal() {
    if (cached_) {
      const double z = *cached_;
      cached_.reset();
      return z;
    }
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    cached_ = radius * std::sin(theta);
    return radius * std::cos(theta);
  }

 private:
  std::mt19937_64 engine_;
  std::optional<double> cached_;
};

struct SyntheticSpec {
  std::size_t oc = 256;
  std::size_t ic = 256;
  std::size_t tokens = 512;
  std::size_t outlier_channels = 8;
  double outlier_factor = 20.0;
  std::uint64_t seed = 0;
  double weight_scale = 1.0;
  // Multiplier on W's outlier columns; defaults to 1/sqrt(outlier_factor), so
  // a channel's activation gain is partly absorbed by smaller weights.
  std::optional<double> weight_outlier_factor;

  double effective_weight_outlier_factor() const {
    return weight_outlier_factor.value_or(1.0 / std::sqrt(outlier_factor));
  }

  void validate() const {
    if (oc == 0 || ic == 0 || tokens == 0) throw Error(Errc::Config, "synthetic shape must be non-empty");
    if (outlier_channels > ic) {
      throw Error(Errc::Config, "outlier channel count " + std::to_string(outlier_channels) + " exceeds ic " +
                                    std::to_string(ic));
    }
    if (!(outlier_factor >= 1.0)) throw Error(Errc::Config, "outlier factor must be >= 1");
    if (!(weight_scale > 0.0)) throw Error(Errc::Config, "weight scale must be > 0");
    if (!(effective_weight_outlier_factor() > 0.0)) throw Error(Errc::Config, "weight outlier factor must be > 0");
  }
};

struct SyntheticLayer {
  Tensor2D weight;                     // oc x ic
  Tensor2D input;                      // tokens x ic
  std::vector<std::size_t> outliers;   // ascending
};

// Draw order: outlier indices (partial Fisher-Yates), X row-major, W row-major.
inline SyntheticLayer gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  StableRng rng(spec.seed);

  std::vector<std::size_t> pool(spec.ic);
  for (std::size_t i = 0; i < spec.ic; ++i) pool[i] = i;
  for (std::size_t i = 0; i < spec.outlier_channels; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(spec.ic - i));
    std::swap(pool[i], pool[j]);
  }
  std::vector<std::size_t> outliers(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(spec.outlier_channels));
  std::sort(outliers.begin(), outliers.end());
  std::vector<bool> is_outlier(spec.ic, false);
  for (auto c : outliers) is_outlier[c] = true;

  Tensor2D input(spec.tokens, spec.ic);
  for (std::size_t t = 0; t < spec.tokens; ++t) {
    for (std::size_t c = 0; c < spec.ic; ++c) {
      const double x = rng.normal();
      input(t, c) = static_cast<float>(is_outlier[c] ? x * spec.outlier_factor : x);
    }
  }

  const double std_w = spec.weight_scale / std::sqrt(static_cast<double>(spec.ic));
  const double w_factor = spec.effective_weight_outlier_factor();
  Tensor2D weight(spec.oc, spec.ic);
  for (std::size_t r = 0; r < spec.oc; ++r) {
    for (std::size_t c = 0; c < spec.ic; ++c) {
      const double w = rng.normal() * std_w;
      weight(r, c) = static_cast<float>(is_outlier[c] ? w * w_factor : w);
    }
  }
  return {std::move(weight), std::move(input), std::move(outliers)};
}

// FNV-1a over the raw float bytes of W then X; pins the generator stream.
inline std::uint64_t synthetic_checksum(const SyntheticLayer& layer) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](const Tensor2D& t) {
    for (float v : t.values()) {
      const auto bits = std::bit_cast<std::uint32_t>(v);
      for (int i = 0; i < 4; ++i) {
        h ^= (bits >> (8 * i)) & 0xFFu;
        h *= 1099511628211ull;
      }
    }
  };
  mix(layer.weight);
  mix(layer.input);
  return h;
}

}  // namespace adadim
