#include "yulefx/cell_stats.hpp"

#include <numeric>

namespace yulefx {

namespace {

CellStats empty_stats(Eigen::Index cells) {
  CellStats s;
  s.count = Eigen::VectorXd::Zero(cells);
  s.sum_y = Eigen::VectorXd::Zero(cells);
  s.sum_v = Eigen::VectorXd::Zero(cells);
  return s;
}

void add_row(CellStats& s, const SyntheticDataset& ds, std::span<const std::uint32_t> cell_of, std::size_t i) {
  const auto cell = static_cast<Eigen::Index>(cell_of[ds.category_id[i]]);
  const double y = ds.y[i];
  const double v = ds.v[i];
  s.count(cell) += 1.0;
  s.sum_y(cell) += y;
  s.sum_v(cell) += v;
  s.n += 1.0;
  s.sum_y_all += y;
  s.sum_v_all += v;
  s.sum_vv += v * v;
  s.sum_vy += v * y;
  s.sum_yy += y * y;
}

}  // namespace

CellStats CellStats::collect(const SyntheticDataset& ds, std::span<const std::uint32_t> cell_of, Eigen::Index cells) {
  CellStats s = empty_stats(cells);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    add_row(s, ds, cell_of, i);
  }
  return s;
}

CellStats CellStats::collect_rows(const SyntheticDataset& ds, std::span<const std::uint32_t> cell_of,
                                  Eigen::Index cells, std::span<const std::size_t> rows) {
  CellStats s = empty_stats(cells);
  for (std::size_t i : rows) {
    add_row(s, ds, cell_of, i);
  }
  return s;
}

CellStats& CellStats::operator-=(const CellStats& other) {
  count -= other.count;
  sum_y -= other.sum_y;
  sum_v -= other.sum_v;
  n -= other.n;
  sum_y_all -= other.sum_y_all;
  sum_v_all -= other.sum_v_all;
  sum_vv -= other.sum_vv;
  sum_vy -= other.sum_vy;
  sum_yy -= other.sum_yy;
  return *this;
}

std::vector<std::uint32_t> identity_cells(std::size_t categories) {
  std::vector<std::uint32_t> cells(categories);
  std::iota(cells.begin(), cells.end(), 0U);
  return cells;
}

}  // namespace yulefx
