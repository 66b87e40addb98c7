#include "msq/tensor.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "msq/error.hpp"

namespace msq {

Matrix2D::Matrix2D(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
  if (!std::isfinite(fill)) throw NumericError("Matrix2D: non-finite fill value");
}

Matrix2D::Matrix2D(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("Matrix2D: data length " + std::to_string(data_.size()) +
                     " != " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  if (!all_finite()) throw NumericError("Matrix2D: non-finite value in data");
}

Matrix2D Matrix2D::identity(std::size_t n) {
  Matrix2D m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool Matrix2D::all_finite() const noexcept {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

double Matrix2D::max_abs() const noexcept {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

// SplitMix64: state_i = seed + i * gamma, output = mix(state_i).
std::uint64_t Rng::next_u64() noexcept {
  std::uint64_t z = seed_ + (++counter_) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double Rng::uniform() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t n) noexcept {
  // Rejection sampling on the top of the range keeps the result unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() noexcept {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Matrix2D matmul(const Matrix2D& a, const Matrix2D& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " times " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  Matrix2D out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
      out(i, j) = acc;
    }
  }
  if (!out.all_finite()) throw NumericError("matmul: non-finite result");
  return out;
}

Matrix2D transpose(const Matrix2D& a) {
  Matrix2D out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

std::vector<double> row_variance(const Matrix2D& w) {
  if (w.rows() < 1 || w.cols() < 2) {
    throw InputError("row_variance: need rows >= 1 and cols >= 2, got " +
                     std::to_string(w.rows()) + "x" + std::to_string(w.cols()));
  }
  std::vector<double> out(w.rows());
  for (std::size_t r = 0; r < w.rows(); ++r) {
    // Welford update
    double mean = 0.0, m2 = 0.0;
    std::size_t n = 0;
    for (double x : w.row(r)) {
      ++n;
      const double delta = x - mean;
      mean += delta / static_cast<double>(n);
      m2 += delta * (x - mean);
    }
    out[r] = m2 / static_cast<double>(n);
  }
  return out;
}

Dataset make_synthetic(const BlobSpec& spec, std::size_t n, Rng& rng) {
  if (n == 0) throw InputError("make_synthetic: n must be >= 1");
  if (spec.num_classes < 2) throw ConfigError("make_synthetic: need at least 2 classes");
  if (spec.features < (spec.num_classes + 1) / 2) {
    throw ConfigError("make_synthetic: features must be >= ceil(num_classes/2)");
  }
  if (!(spec.noise >= 0.0)) throw ConfigError("make_synthetic: noise must be >= 0");

  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % spec.num_classes);
  rng.shuffle(labels);

  const auto f = static_cast<std::size_t>(spec.features);
  Matrix2D x(n, f);
  for (std::size_t i = 0; i < n; ++i) {
    const int c = labels[i];
    const double sign = (c % 2 == 0) ? 1.0 : -1.0;
    const auto axis = static_cast<std::size_t>(c / 2);
    for (std::size_t j = 0; j < f; ++j) {
      const double mean = (j == axis) ? sign * spec.separation : 0.0;
      x(i, j) = mean + spec.noise * rng.normal();
    }
  }
  return Dataset{std::move(x), std::move(labels), spec.num_classes};
}

Matrix2D gather_rows(const Matrix2D& m, std::span<const std::size_t> idx) {
  Matrix2D out(idx.size(), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= m.rows()) throw ShapeError("gather_rows: index out of range");
    auto src = m.row(idx[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace msq
