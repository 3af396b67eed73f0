#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "adadim/error.hpp"
#include "adadim/linalg.hpp"
#include "adadim/quant.hpp"
#include "adadim/tensor.hpp"

namespace adadim {

struct GptqOptions {
  bool act_order = true;
  bool static_groups = true;
  double damp_percent = 0.01;

  // PerIC: reorder, dynamic groups. PerOC: reorder with static groups.
  static GptqOptions defaults_for(QuantDim dim, double damp = 0.01) {
    return {true, dim == QuantDim::PerOC, damp};
  }

  void validate(QuantDim dim) const {
    if (static_groups && dim != QuantDim::PerOC) {
      throw Error(Errc::Config, "static groups are only defined for per-OC quantization");
    }
    if (!(damp_percent >= 0.0) || !std::isfinite(damp_percent)) {
      throw Error(Errc::Config, "damp_percent must be a finite non-negative number");
    }
  }
};

// Running H = 2 * sum X^T X over calibration batches.
struct HessianState {
  Matrix64 h;
  std::size_t nsamples = 0;

  HessianState() = default;
  explicit HessianState(std::size_t ic) : h(ic) {}

  std::size_t ic() const noexcept { return h.n; }
};

inline HessianState accumulate_hessian(HessianState state, const Tensor2D& input) {
  const std::size_t n = state.ic();
  if (input.cols() != n) {
    throw Error(Errc::ShapeMismatch, "accumulate_hessian: input " + input.shape() + " does not have " +
                                         std::to_string(n) + " columns");
  }
  std::vector<double> x(n);
  for (std::size_t t = 0; t < input.rows(); ++t) {
    auto row = input.row(t);
    for (std::size_t i = 0; i < n; ++i) x[i] = row[i];
    for (std::size_t i = 0; i < n; ++i) {
      const double xi = 2.0 * x[i];
      if (xi == 0.0) continue;
      double* hrow = &state.h.a[i * n];
      for (std::size_t j = i; j < n; ++j) hrow[j] += xi * x[j];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) state.h(i, j) = state.h(j, i);
  }
  state.nsamples += input.rows();
  return state;
}

struct PreparedHessian {
  Matrix64 upper;  // U with U^T U = (H + damp)^-1
  std::vector<std::size_t> dead;
};

// Dead columns (zero diagonal) get unit diagonal; lambda = damp * mean(diag) is
// added to the diagonal; returns the upper Cholesky factor of the inverse.
inline PreparedHessian prepare_hessian(const HessianState& state, double damp_percent) {
  Matrix64 h = state.h;
  const std::size_t n = h.n;
  PreparedHessian out;
  for (std::size_t j = 0; j < n; ++j) {
    if (h(j, j) == 0.0) {
      out.dead.push_back(j);
      h(j, j) = 1.0;
    }
  }
  double mean_diag = 0.0;
  for (std::size_t j = 0; j < n; ++j) mean_diag += h(j, j);
  mean_diag = n == 0 ? 0.0 : mean_diag / static_cast<double>(n);
  const double lambda = damp_percent * mean_diag;
  for (std::size_t j = 0; j < n; ++j) h(j, j) += lambda;

  try {
    const Matrix64 inv = cholesky_inverse(cholesky_lower(h));
    out.upper = transpose(cholesky_lower(inv));
  } catch (const Error& e) {
    throw Error(Errc::Numeric, std::string("damped Hessian is not positive-definite; raise damp_percent (") +
                                   e.what() + ")");
  }
  return out;
}

// Columns by descending diag(H); ties keep ascending original index.
inline std::vector<std::uint32_t> act_order_perm(const HessianState& state) {
  std::vector<std::uint32_t> perm(state.ic());
  std::iota(perm.begin(), perm.end(), 0u);
  std::stable_sort(perm.begin(), perm.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return state.h(a, a) > state.h(b, b); });
  return perm;
}

inline QuantParams static_group_params(const Tensor2D& weight, const QuantConfig& config) {
  if (config.dim != QuantDim::PerOC) {
    throw Error(Errc::InvalidArgument, "static_group_params requires per-OC grouping");
  }
  return rtn_quantize(weight, config).params;
}

// Per-column diagnostics, indexed by original column id.
struct UpdateTrace {
  std::vector<double> err_mag;
  std::vector<std::uint32_t> permutation;
  double total_mass = 0.0;

  double share_of(std::span<const std::size_t> columns) const {
    if (total_mass <= 0.0) return 0.0;
    double s = 0.0;
    for (auto c : columns) s += err_mag[c];
    return s / total_mass;
  }
};

struct GptqResult {
  QuantizedLayer layer;
  UpdateTrace trace;
};

inline GptqResult gptq_quantize(const Tensor2D& weight, const HessianState& state, const QuantConfig& config,
                                const GptqOptions& opts) {
  config.validate();
  opts.validate(config.dim);
  const std::size_t oc = weight.rows();
  const std::size_t ic = weight.cols();
  if (weight.empty()) throw Error(Errc::InvalidArgument, "gptq_quantize: empty weight");
  if (state.ic() != ic) {
    throw Error(Errc::ShapeMismatch, "gptq_quantize: Hessian is " + std::to_string(state.ic()) +
                                         " wide but weight " + weight.shape());
  }
  const int bits = config.bits;

  std::vector<std::uint32_t> perm(ic);
  std::iota(perm.begin(), perm.end(), 0u);
  if (opts.act_order) perm = act_order_perm(state);

  HessianState permuted(ic);
  permuted.nsamples = state.nsamples;
  for (std::size_t i = 0; i < ic; ++i) {
    for (std::size_t j = 0; j < ic; ++j) permuted.h(i, j) = state.h(perm[i], perm[j]);
  }
  const PreparedHessian prepared = prepare_hessian(permuted, opts.damp_percent);
  const Matrix64& u = prepared.upper;

  // Working copy in quantization order.
  std::vector<double> w(oc * ic);
  for (std::size_t r = 0; r < oc; ++r) {
    for (std::size_t j = 0; j < ic; ++j) w[r * ic + j] = weight(r, perm[j]);
  }
  for (auto j : prepared.dead) {
    for (std::size_t r = 0; r < oc; ++r) w[r * ic + j] = 0.0;
  }

  QuantizedLayer q;
  q.oc = oc;
  q.ic = ic;
  q.config = config;
  q.codes.assign(oc * ic, 0);
  q.params = QuantParams::shaped(config.dim, oc, ic, config.group_size);
  const std::size_t g = q.group_extent();
  const bool static_groups = config.dim == QuantDim::PerOC && opts.static_groups;
  if (static_groups) q.params = static_group_params(weight, config);

  UpdateTrace trace;
  trace.err_mag.assign(ic, 0.0);
  trace.permutation = perm;

  std::vector<float> values;
  std::vector<GroupParams> row_params(oc);
  std::vector<double> err(oc);

  for (std::size_t j = 0; j < ic; ++j) {
    const std::size_t orig = perm[j];
    if (config.dim == QuantDim::PerIC) {
      for (std::size_t k = 0; k < q.params.group_rows; ++k) {
        const std::size_t begin = k * g;
        const std::size_t len = std::min(g, oc - begin);
        values.resize(len);
        for (std::size_t i = 0; i < len; ++i) values[i] = static_cast<float>(w[(begin + i) * ic + j]);
        const auto p = fit_group_params(values, bits);
        q.params.set(k * ic + orig, p);
        for (std::size_t i = 0; i < len; ++i) row_params[begin + i] = p;
      }
    } else if (static_groups) {
      for (std::size_t r = 0; r < oc; ++r) row_params[r] = q.params.at(r * q.params.group_cols + orig / g);
    } else if (j % g == 0) {
      const std::size_t len = std::min(g, ic - j);
      values.resize(len);
      for (std::size_t r = 0; r < oc; ++r) {
        for (std::size_t i = 0; i < len; ++i) values[i] = static_cast<float>(w[r * ic + j + i]);
        row_params[r] = fit_group_params(values, bits);
        q.params.set(r * q.params.group_cols + j / g, row_params[r]);
      }
    }

    const double d = u(j, j);
    double norm2 = 0.0;
    for (std::size_t r = 0; r < oc; ++r) {
      const double current = w[r * ic + j];
      const auto code = quantize_value(static_cast<float>(current), row_params[r], bits);
      q.codes[r * ic + orig] = code;
      err[r] = (current - static_cast<double>(dequantize_value(code, row_params[r]))) / d;
      norm2 += err[r] * err[r];
    }
    trace.err_mag[orig] = std::sqrt(norm2);

    const double* urow = &u.a[j * ic];
    for (std::size_t r = 0; r < oc; ++r) {
      const double e = err[r];
      if (e == 0.0) continue;
      double* wrow = &w[r * ic];
      for (std::size_t c = j + 1; c < ic; ++c) wrow[c] -= e * urow[c];
    }
  }

  const bool reordered = !std::is_sorted(perm.begin(), perm.end());
  if (config.dim == QuantDim::PerOC && !static_groups && reordered) q.column_order = perm;
  for (double m : trace.err_mag) trace.total_mass += m;
  q.validate();
  return {std::move(q), std::move(trace)};
}

}  // namespace adadim
