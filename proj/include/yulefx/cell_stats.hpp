#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "yulefx/dgp.hpp"

namespace yulefx {

/// Sufficient statistics of the dummy-plus-covariate regression y ~ cell + v.
///
/// Categories are mapped onto cells (identity for plain fixed effects, merged
/// cells for aggregation). Because dummy columns are orthogonal, every
/// estimator built on the cell design needs only these per-cell sums plus the
/// global covariate moments.
struct CellStats {
  Eigen::VectorXd count;
  Eigen::VectorXd sum_y;
  Eigen::VectorXd sum_v;
  double n = 0.0;
  double sum_y_all = 0.0;
  double sum_v_all = 0.0;
  double sum_vv = 0.0;
  double sum_vy = 0.0;
  double sum_yy = 0.0;

  [[nodiscard]] Eigen::Index cells() const noexcept { return count.size(); }

  /// Statistics over all rows with cell_of[c] giving the cell of category c.
  static CellStats collect(const SyntheticDataset& ds, std::span<const std::uint32_t> cell_of, Eigen::Index cells);
  /// Statistics over a subset of rows.
  static CellStats collect_rows(const SyntheticDataset& ds, std::span<const std::uint32_t> cell_of,
                                Eigen::Index cells, std::span<const std::size_t> rows);

  CellStats& operator-=(const CellStats& other);
  friend CellStats operator-(CellStats lhs, const CellStats& rhs) {
    lhs -= rhs;
    return lhs;
  }
};

/// Identity mapping category c -> cell c.
std::vector<std::uint32_t> identity_cells(std::size_t categories);

}  // namespace yulefx
