#include "msq/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "msq/error.hpp"

namespace msq {

std::string_view to_string(RowScheme s) noexcept {
  return s == RowScheme::kSp2 ? "sp2" : "fixed";
}

RowScheme row_scheme_from_string(std::string_view s) {
  if (s == "sp2") return RowScheme::kSp2;
  if (s == "fixed") return RowScheme::kFixed;
  throw InputError("unknown row scheme '" + std::string(s) + "'");
}

std::size_t RowPartition::sp2_count() const noexcept {
  return static_cast<std::size_t>(std::count(assignments.begin(), assignments.end(), RowScheme::kSp2));
}

RowPartition RowPartition::uniform(std::size_t rows, RowScheme s) {
  RowPartition p;
  p.assignments.assign(rows, s);
  p.pr_sp2 = s == RowScheme::kSp2 ? 1.0 : 0.0;
  return p;
}

RowPartition partition_rows(std::span<const double> variances, double pr_sp2) {
  if (variances.empty()) throw InputError("partition_rows: empty variance list");
  if (!(pr_sp2 >= 0.0 && pr_sp2 <= 1.0)) {
    throw ConfigError("partition_rows: pr_sp2 must lie in [0, 1], got " + std::to_string(pr_sp2));
  }
  for (double v : variances)
    if (!std::isfinite(v)) throw NumericError("partition_rows: non-finite variance");

  const std::size_t rows = variances.size();
  std::vector<std::size_t> order(rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return variances[a] < variances[b]; });

  const auto k = static_cast<std::size_t>(std::lround(pr_sp2 * static_cast<double>(rows)));

  RowPartition p;
  p.pr_sp2 = pr_sp2;
  p.assignments.assign(rows, RowScheme::kFixed);
  for (std::size_t i = 0; i < k; ++i) p.assignments[order[i]] = RowScheme::kSp2;

  if (k == 0) {
    p.theta = variances[order.front()];
  } else if (k == rows) {
    p.theta = variances[order.back()];
  } else {
    p.theta = 0.5 * (variances[order[k - 1]] + variances[order[k]]);
  }
  return p;
}

RowPartition partition_layer(const Matrix2D& w, double pr_sp2) {
  const auto v = row_variance(w);
  return partition_rows(v, pr_sp2);
}

}  // namespace msq
