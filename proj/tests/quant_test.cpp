#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <tuple>

#include "adadim/quant.hpp"
#include "test_util.hpp"

using namespace adadim;
using adadim::testing::make;
using adadim::testing::random_tensor;

namespace {

// Scalar oracle for the affine min-max fit, written independently of the
// library: range widened to include zero, exact scale for constants.
std::pair<double, int> oracle_fit(const std::vector<double>& v, int bits) {
  double lo = v[0], hi = v[0];
  for (double x : v) lo = std::min(lo, x), hi = std::max(hi, x);
  const int maxq = (1 << bits) - 1;
  if (lo == hi) {
    if (lo == 0) return {1.0, 0};
    return lo > 0 ? std::pair{lo, 0} : std::pair{-lo, 1};
  }
  lo = std::min(lo, 0.0);
  hi = std::max(hi, 0.0);
  const double scale = float((hi - lo) / maxq);
  const int zero = std::clamp(int(std::round(-lo / scale)), 0, maxq);
  return {scale, zero};
}

QuantConfig cfg(int bits, GroupSize g, QuantDim dim) { return {bits, g, dim}; }

// (r, c) -> group key, via brute-force traversal of the stated grouping rule.
std::tuple<std::size_t, std::size_t> oracle_group(QuantDim dim, std::size_t r, std::size_t c, std::size_t g) {
  return dim == QuantDim::PerOC ? std::tuple{r, c / g} : std::tuple{r / g, c};
}

// Integer lattice where every row and column is a permutation of 0..7.
Tensor2D lattice8() {
  Tensor2D w(8, 8);
  for (std::size_t r = 0; r < 8; ++r)
    for (std::size_t c = 0; c < 8; ++c) w(r, c) = float((r + c) % 8);
  return w;
}

}  // namespace

TEST(FitGroupParams, DegenerateZeroGroup) {
  std::vector<float> v(5, 0.0f);
  EXPECT_EQ(fit_group_params(v, 4), (GroupParams{1.0f, 0}));
}

TEST(FitGroupParams, ExactLattice) {
  std::vector<float> v;
  for (int i = 0; i < 16; ++i) v.push_back(float(i));
  EXPECT_EQ(fit_group_params(v, 4), (GroupParams{1.0f, 0}));
}

TEST(FitGroupParams, ThreeBitExample) {
  std::vector<float> v = {-1.0f, 0.5f, 2.0f};
  const auto p = fit_group_params(v, 3);
  const auto [scale, zero] = oracle_fit({-1.0, 0.5, 2.0}, 3);
  EXPECT_FLOAT_EQ(p.scale, 3.0f / 7.0f);
  EXPECT_EQ(p.scale, float(scale));
  EXPECT_EQ(p.zero, 2);
  EXPECT_EQ(zero, 2);
}

TEST(FitGroupParams, EmptyThrows) { EXPECT_THROW(fit_group_params({}, 3), Error); }

TEST(FitGroupParams, MatchesOracleOnRandomGroups) {
  std::mt19937_64 rng(9);
  std::normal_distribution<float> d(0.3f, 2.0f);
  for (int trial = 0; trial < 300; ++trial) {
    const int bits = std::vector<int>{2, 3, 4, 8}[trial % 4];
    std::vector<float> v(1 + trial % 17);
    std::vector<double> vd;
    for (auto& x : v) vd.push_back(x = d(rng));
    const auto p = fit_group_params(v, bits);
    const auto [scale, zero] = oracle_fit(vd, bits);
    EXPECT_EQ(p.scale, float(scale));
    EXPECT_EQ(p.zero, zero);
    EXPECT_GT(p.scale, 0.0f);
  }
}

TEST(QuantizeValues, ThreeBitExamples) {
  const GroupParams p{3.0f / 7.0f, 2};
  EXPECT_EQ(quantize_value(-1.0f, p, 3), 0);
  EXPECT_EQ(quantize_value(2.0f, p, 3), 7);
  EXPECT_NEAR(dequantize_value(quantize_value(0.0f, p, 3), p), 0.0f, p.scale / 2);
  EXPECT_EQ(quantize_values(std::vector<float>{-1.0f, 2.0f}, p, 3), (std::vector<std::uint8_t>{0, 7}));
}

TEST(QuantizeValues, RoundsHalfAwayFromZero) {
  const GroupParams p{1.0f, 4};
  EXPECT_EQ(quantize_value(0.5f, p, 4), 5);
  EXPECT_EQ(quantize_value(-0.5f, p, 4), 3);
  EXPECT_EQ(quantize_value(100.0f, p, 4), 15);
  EXPECT_EQ(quantize_value(-100.0f, p, 4), 0);
}

TEST(DequantizeValues, Examples) {
  const GroupParams p{3.0f / 7.0f, 2};
  EXPECT_EQ(dequantize_value(2, p), 0.0f);
  EXPECT_NEAR(dequantize_value(0, p), -6.0 / 7.0, 1e-6);
  EXPECT_NEAR(dequantize_value(7, p), 15.0 / 7.0, 1e-6);
  EXPECT_EQ(dequantize_values(std::vector<std::uint8_t>{2, 2}, p), (std::vector<float>{0.0f, 0.0f}));
}

TEST(RtnQuantize, ConstantWeightReproducedExactly) {
  for (float c : {0.0f, 1.0f, -1.0f, 0.3f, -2.75f, 1e-3f, 1234.5f}) {
    for (QuantDim dim : {QuantDim::PerOC, QuantDim::PerIC}) {
      Tensor2D w(6, 10);
      for (auto& v : w.values()) v = c;
      auto q = rtn_quantize(w, cfg(2, GroupSize(4), dim));
      EXPECT_EQ(dequantize_layer(q), w) << c;
    }
  }
}

TEST(RtnQuantize, SingleGroupReduction) {
  auto w = random_tensor(1, 16, 4);
  auto q = rtn_quantize(w, cfg(3, GroupSize::full(), QuantDim::PerOC));
  const auto p = fit_group_params(w.row(0), 3);
  EXPECT_EQ(q.params.count(), 1u);
  EXPECT_EQ(q.params.at(0), p);
  EXPECT_EQ(q.codes, quantize_values(w.row(0), p, 3));
}

TEST(RtnQuantize, ParamLayouts) {
  auto w = random_tensor(10, 7, 5);
  auto oc = rtn_quantize(w, cfg(4, GroupSize(3), QuantDim::PerOC));
  EXPECT_EQ(oc.params.group_rows, 10u);
  EXPECT_EQ(oc.params.group_cols, 3u);
  auto ic = rtn_quantize(w, cfg(4, GroupSize(4), QuantDim::PerIC));
  EXPECT_EQ(ic.params.group_rows, 3u);
  EXPECT_EQ(ic.params.group_cols, 7u);
  // PerIC group k, column c lives at k*IC + c and was fitted on rows [4k, 4k+4).
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t c = 0; c < 7; ++c) {
      std::vector<float> col;
      for (std::size_t r = 4 * k; r < std::min<std::size_t>(10, 4 * k + 4); ++r) col.push_back(w(r, c));
      EXPECT_EQ(ic.params.at(k * 7 + c), fit_group_params(col, 4));
    }
}

TEST(RtnQuantize, OutlierColumnBruteForce) {
  Tensor2D w = make(4, 4, {0.1f, -0.2f, 0.3f, 0.05f, -0.15f, 0.25f, -0.1f, 0.2f, 0.3f, 0.1f, -0.3f, -0.05f,
                           -0.25f, 0.15f, 0.2f, -0.2f});
  Tensor2D base = w;
  for (std::size_t r = 0; r < 4; ++r) w(r, 0) *= 20.0f;

  // Brute-force per-group oracle over both geometries.
  for (QuantDim dim : {QuantDim::PerOC, QuantDim::PerIC}) {
    auto q = rtn_quantize(w, cfg(3, GroupSize(2), dim));
    const auto pos = q.column_positions();
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < 4; ++c) {
        std::vector<double> members;
        for (std::size_t rr = 0; rr < 4; ++rr)
          for (std::size_t cc = 0; cc < 4; ++cc)
            if (oracle_group(dim, rr, cc, 2) == oracle_group(dim, r, c, 2)) members.push_back(w(rr, cc));
        const auto [scale, zero] = oracle_fit(members, 3);
        const auto p = q.params.at(q.param_index(r, c, pos));
        EXPECT_EQ(p.scale, float(scale));
        EXPECT_EQ(p.zero, zero);
      }
  }

  auto ic = rtn_quantize(w, cfg(3, GroupSize(2), QuantDim::PerIC));
  auto ic_base = rtn_quantize(base, cfg(3, GroupSize(2), QuantDim::PerIC));
  auto deq = dequantize_layer(ic);
  const auto pos = ic.column_positions();
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 1; c < 4; ++c) {
      // Columns other than the outlier are untouched by it.
      EXPECT_EQ(ic.params.at(ic.param_index(r, c, pos)), ic_base.params.at(ic_base.param_index(r, c, pos)));
      EXPECT_LE(std::abs(deq(r, c) - w(r, c)), ic.params.at(ic.param_index(r, c, pos)).scale / 2 + 1e-6f);
    }

  auto oc = rtn_quantize(w, cfg(3, GroupSize(2), QuantDim::PerOC));
  auto oc_base = rtn_quantize(base, cfg(3, GroupSize(2), QuantDim::PerOC));
  for (std::size_t r = 0; r < 4; ++r) {
    EXPECT_GT(oc.params.at(r * 2).scale, 5.0f * oc_base.params.at(r * 2).scale);
    EXPECT_EQ(oc.params.at(r * 2 + 1), oc_base.params.at(r * 2 + 1));
  }
}

TEST(DequantizeLayer, LatticeIsExact) {
  for (QuantDim dim : {QuantDim::PerOC, QuantDim::PerIC}) {
    auto w = lattice8();
    EXPECT_EQ(dequantize_layer(rtn_quantize(w, cfg(3, GroupSize::full(), dim))), w);
  }
}

TEST(DequantizeLayer, CodesAtZeroPointGiveZeros) {
  auto q = rtn_quantize(random_tensor(6, 6, 8), cfg(4, GroupSize(3), QuantDim::PerIC));
  const auto pos = q.column_positions();
  for (std::size_t r = 0; r < 6; ++r)
    for (std::size_t c = 0; c < 6; ++c) q.codes[r * 6 + c] = q.params.at(q.param_index(r, c, pos)).zero;
  EXPECT_EQ(dequantize_layer(q), Tensor2D(6, 6));
}

TEST(DequantizeLayer, RandomBound) {
  for (QuantDim dim : {QuantDim::PerOC, QuantDim::PerIC}) {
    auto w = random_tensor(8, 8, 10);
    auto q = rtn_quantize(w, cfg(4, GroupSize(4), dim));
    auto d = dequantize_layer(q);
    float max_scale = 0.0f;
    for (float s : q.params.scales) max_scale = std::max(max_scale, s);
    for (std::size_t i = 0; i < w.size(); ++i) {
      EXPECT_LE(std::abs(w.values()[i] - d.values()[i]), max_scale / 2 + 1e-6f);
    }
  }
}

TEST(QuantProperty, PartitionIsExactForRaggedShapes) {
  for (auto [oc, ic, g] : {std::tuple{3, 130, 128}, std::tuple{130, 5, 128}, std::tuple{7, 9, 4}, std::tuple{1, 1, 3}}) {
    for (QuantDim dim : {QuantDim::PerOC, QuantDim::PerIC}) {
      auto q = rtn_quantize(random_tensor(oc, ic, 11), cfg(3, GroupSize(g), dim));
      const auto pos = q.column_positions();
      std::vector<int> members(q.params.count(), 0);
      for (std::size_t r = 0; r < std::size_t(oc); ++r)
        for (std::size_t c = 0; c < std::size_t(ic); ++c) {
          const auto idx = q.param_index(r, c, pos);
          ASSERT_LT(idx, q.params.count());
          const auto [gr, gc] = oracle_group(dim, r, c, g);
          EXPECT_EQ(idx, gr * q.params.group_cols + gc);
          ++members[idx];
        }
      int total = 0;
      for (int m : members) {
        EXPECT_GT(m, 0);
        total += m;
      }
      EXPECT_EQ(total, oc * ic);
    }
  }
}

TEST(QuantProperty, RoundtripBound) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 60; ++trial) {
    const int bits = std::vector<int>{2, 3, 4, 8}[trial % 4];
    const QuantDim dim = trial % 2 ? QuantDim::PerIC : QuantDim::PerOC;
    auto w = random_tensor(1 + rng() % 20, 1 + rng() % 20, rng(), float(1 + trial));
    auto q = rtn_quantize(w, cfg(bits, GroupSize(1 + rng() % 9), dim));
    auto d = dequantize_layer(q);
    const auto pos = q.column_positions();
    for (std::size_t r = 0; r < w.rows(); ++r)
      for (std::size_t c = 0; c < w.cols(); ++c) {
        const float s = q.params.at(q.param_index(r, c, pos)).scale;
        EXPECT_LE(std::abs(w(r, c) - d(r, c)), s / 2 + 1e-6 * (1 + std::abs(w(r, c))));
      }
    EXPECT_NO_THROW(q.validate());
  }
}

TEST(QuantProperty, OutlierIsolation) {
  // Per-IC: exactly the groups of the scaled column change. Per-OC: the changed
  // set is exactly the row groups holding that column whose zero-widened range
  // moved, i.e. wherever the scaled weight became the group extreme.
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::size_t oc = 16, ic = 16, g = 4, col = seed % ic;
    const float alpha = 8.0f + float(seed);
    auto w = random_tensor(oc, ic, 500 + seed);
    auto scaled = w;
    for (std::size_t r = 0; r < oc; ++r) scaled(r, col) *= alpha;
    for (QuantDim dim : {QuantDim::PerOC, QuantDim::PerIC}) {
      auto a = rtn_quantize(w, cfg(3, GroupSize(g), dim));
      auto b = rtn_quantize(scaled, cfg(3, GroupSize(g), dim));
      std::set<std::size_t> changed, expected, containing;
      for (std::size_t i = 0; i < a.params.count(); ++i)
        if (a.params.scales[i] != b.params.scales[i]) changed.insert(i);
      for (std::size_t r = 0; r < oc; ++r) {
        if (dim == QuantDim::PerIC) {
          expected.insert((r / g) * ic + col);
          continue;
        }
        const std::size_t k = col / g;
        containing.insert(r * (ic / g) + k);
        double lo0 = 0, hi0 = 0, lo1 = 0, hi1 = 0;
        for (std::size_t c = k * g; c < (k + 1) * g; ++c) {
          lo0 = std::min<double>(lo0, w(r, c)), hi0 = std::max<double>(hi0, w(r, c));
          lo1 = std::min<double>(lo1, scaled(r, c)), hi1 = std::max<double>(hi1, scaled(r, c));
        }
        if (lo0 != lo1 || hi0 != hi1) expected.insert(r * (ic / g) + k);
      }
      EXPECT_EQ(changed, expected) << dim_name(dim) << " seed " << seed;
      if (dim == QuantDim::PerOC) {
        EXPECT_TRUE(std::includes(containing.begin(), containing.end(), changed.begin(), changed.end()));
        EXPECT_GE(changed.size(), oc / 2);
      }
    }
  }
}

TEST(QuantProperty, EightBitFullLatticeExact) {
  Tensor2D w(3, 256);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 256; ++c) w(r, c) = float(int(c) - 100) * 0.25f;
  for (QuantDim dim : {QuantDim::PerOC}) {
    EXPECT_EQ(dequantize_layer(rtn_quantize(w, cfg(8, GroupSize::full(), dim))), w);
  }
}

TEST(ReconstructionError, LosslessIsZero) {
  auto w = lattice8();
  auto q = rtn_quantize(w, cfg(3, GroupSize::full(), QuantDim::PerIC));
  EXPECT_EQ(reconstruction_error(w, q, random_tensor(5, 8, 13)), 0.0);
}

TEST(ReconstructionError, ZeroInputIsZero) {
  auto w = random_tensor(4, 8, 14);
  auto q = rtn_quantize(w, cfg(2, GroupSize(4), QuantDim::PerOC));
  EXPECT_EQ(reconstruction_error(w, q, Tensor2D(3, 8)), 0.0);
}

TEST(ReconstructionError, MatchesComposedOracle) {
  auto w = random_tensor(4, 4, 15);
  auto x = random_tensor(6, 4, 16);
  auto q = rtn_quantize(w, cfg(2, GroupSize(2), QuantDim::PerIC));
  const auto deq = dequantize_layer(q);
  double acc = 0;
  for (std::size_t t = 0; t < 6; ++t)
    for (std::size_t o = 0; o < 4; ++o) {
      double y = 0, yq = 0;
      for (std::size_t i = 0; i < 4; ++i) {
        y += double(x(t, i)) * w(o, i);
        yq += double(x(t, i)) * deq(o, i);
      }
      const double d = double(float(y)) - double(float(yq));
      acc += d * d;
    }
  EXPECT_DOUBLE_EQ(reconstruction_error(w, q, x), acc / 24);
}

TEST(ReconstructionError, ShapeMismatch) {
  auto w = random_tensor(4, 4, 17);
  auto q = rtn_quantize(w, cfg(3, GroupSize(2), QuantDim::PerOC));
  EXPECT_THROW(reconstruction_error(w, q, Tensor2D(2, 5)), Error);
}

TEST(QuantConfig, RejectsBadBits) {
  EXPECT_THROW(rtn_quantize(Tensor2D(2, 2), cfg(5, GroupSize(2), QuantDim::PerOC)), Error);
  EXPECT_THROW(GroupSize(0), Error);
}
