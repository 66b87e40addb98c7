#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "msq/tensor.hpp"

namespace msq {

enum class RowScheme : std::uint8_t { kFixed, kSp2 };

std::string_view to_string(RowScheme s) noexcept;
/// Accepts "fixed" / "sp2". Throws InputError otherwise.
RowScheme row_scheme_from_string(std::string_view s);

/// Per-row scheme assignment for one weight matrix.
///
/// Rows are ranked by variance (ties by lower row index) and the first
/// round(pr_sp2 * rows) of them go to SP2. `theta` sits between the last SP2
/// variance and the first Fixed variance, so every row strictly below it is
/// SP2 and every row strictly above it is Fixed; it is descriptive only.
struct RowPartition {
  std::vector<RowScheme> assignments;
  double theta = 0.0;
  double pr_sp2 = 0.0;

  std::size_t rows() const noexcept { return assignments.size(); }
  std::size_t sp2_count() const noexcept;

  static RowPartition uniform(std::size_t rows, RowScheme s);

  friend bool operator==(const RowPartition&, const RowPartition&) = default;
};

RowPartition partition_rows(std::span<const double> variances, double pr_sp2);
RowPartition partition_layer(const Matrix2D& w, double pr_sp2);

}  // namespace msq
