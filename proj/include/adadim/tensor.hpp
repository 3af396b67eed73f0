#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "adadim/error.hpp"

namespace adadim {

// Dense row-major matrix of 32-bit floats. Weights are OC x IC, activations T x IC.
class Tensor2D {
 public:
  Tensor2D() = default;

  Tensor2D(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0f) {}

  Tensor2D(std::size_t rows, std::size_t cols, std::vector<float> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw Error(Errc::ShapeMismatch, "tensor data length " + std::to_string(data_.size()) +
                                           " does not match shape " + shape_string(rows_, cols_));
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  float& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  float operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<float> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const float> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  std::span<float> values() noexcept { return data_; }
  std::span<const float> values() const noexcept { return data_; }

  bool all_finite() const noexcept {
    for (float v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  std::string shape() const { return shape_string(rows_, cols_); }

  static std::string shape_string(std::size_t rows, std::size_t cols) {
    return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
  }

  friend bool operator==(const Tensor2D&, const Tensor2D&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

// Bitwise comparison; distinguishes -0.0 from 0.0.
inline bool identical(const Tensor2D& a, const Tensor2D& b) noexcept {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         (a.size() == 0 || std::memcmp(a.values().data(), b.values().data(), a.size() * sizeof(float)) == 0);
}

namespace detail {
inline thread_local std::uint64_t forward_calls = 0;
}

// Number of forward() invocations made on the calling thread so far.
inline std::uint64_t forward_call_count() noexcept { return detail::forward_calls; }

// Y = X * W^T with float64 accumulation in ascending input-channel order.
inline Tensor2D forward(const Tensor2D& weight, const Tensor2D& input) {
  if (weight.cols() != input.cols()) {
    throw Error(Errc::ShapeMismatch, "forward: weight " + weight.shape() + " and input " + input.shape() +
                                         " disagree on input channels");
  }
  ++detail::forward_calls;
  const std::size_t tokens = input.rows();
  const std::size_t out_ch = weight.rows();
  const std::size_t in_ch = weight.cols();
  Tensor2D out(tokens, out_ch);
  for (std::size_t t = 0; t < tokens; ++t) {
    const float* x = input.row(t).data();
    for (std::size_t o = 0; o < out_ch; ++o) {
      const float* w = weight.row(o).data();
      double acc = 0.0;
      for (std::size_t i = 0; i < in_ch; ++i) {
        acc += static_cast<double>(x[i]) * static_cast<double>(w[i]);
      }
      out(t, o) = static_cast<float>(acc);
    }
  }
  return out;
}

// Mean of squared elementwise differences; 0 for empty tensors.
inline double mse(const Tensor2D& a, const Tensor2D& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(Errc::ShapeMismatch, "mse: shapes " + a.shape() + " and " + b.shape() + " differ");
  }
  if (a.empty()) return 0.0;
  double acc = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = static_cast<double>(av[i]) - static_cast<double>(bv[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(av.size());
}

}  // namespace adadim
