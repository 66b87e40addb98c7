#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace msq {

/// Dense row-major real matrix. For weight matrices, rows are output
/// channels and cols are the flattened input fan-in (Cin*K*K for a lowered
/// convolution).
class Matrix2D {
 public:
  Matrix2D() = default;
  Matrix2D(std::size_t rows, std::size_t cols, double fill = 0.0);
  /// Throws ShapeError if data.size() != rows*cols, NumericError on NaN/Inf.
  Matrix2D(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix2D identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  bool all_finite() const noexcept;
  double max_abs() const noexcept;

  friend bool operator==(const Matrix2D&, const Matrix2D&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Row-major matrix of signed integers (activation codes, accumulator outputs).
struct IntMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::int64_t> data;

  IntMatrix() = default;
  IntMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0) {}

  std::int64_t& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  std::int64_t operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  friend bool operator==(const IntMatrix&, const IntMatrix&) = default;
};

/// Counter-based generator (SplitMix64 finalizer over seed + counter*gamma).
/// The stream depends only on the seed, never on the platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_u64() noexcept;
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Unbiased integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) noexcept;
  /// Standard normal via Box-Muller (one draw per call, no cached pair).
  double normal() noexcept;

  template <typename T>
  void shuffle(std::vector<T>& v) noexcept {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

struct Dataset {
  Matrix2D inputs;  // samples x features
  std::vector<int> labels;
  int num_classes = 0;

  std::size_t size() const noexcept { return labels.size(); }
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Gaussian-blob classification task. Class c is centred at
/// separation * (+/-1) * e_{c/2}, sign alternating with c, so the class
/// means are fixed by the BlobSpec and only the noise depends on the seed.
struct BlobSpec {
  int num_classes = 2;
  int features = 2;
  double separation = 3.0;
  double noise = 1.0;
};

Matrix2D matmul(const Matrix2D& a, const Matrix2D& b);
Matrix2D transpose(const Matrix2D& a);

/// Population variance (divide by cols) of every row. Requires cols >= 2.
std::vector<double> row_variance(const Matrix2D& w);

/// Balanced labels (i mod classes) in shuffled order. Throws InputError for n == 0.
Dataset make_synthetic(const BlobSpec& spec, std::size_t n, Rng& rng);

/// Extract samples by index, used for minibatching.
Matrix2D gather_rows(const Matrix2D& m, std::span<const std::size_t> idx);

}  // namespace msq
