#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace yulefx {

/// Reinforcement probability p (chance a step repeats an earlier draw) and seed.
struct ReinforcementParams {
  double p = 0.99;
  std::uint64_t seed = 0;

  /// Throws ParameterError unless 0 <= p <= 1.
  void validate() const;
};

/// One realization of the Yule-Simon linear reinforcement process.
///
/// Step 0 is always an innovation. A later step either copies the value of a
/// uniformly chosen earlier step (repetition) or draws a fresh Uniform[0,1]
/// value (innovation). Categories are tracked structurally: category_id[k] is
/// the index of the innovation whose value step k carries, so categories are
/// numbered 0, 1, ... in order of first appearance.
///
/// source_index is 0-based: a repetition at step k copies step
/// source_index[k] in {0, ..., k-1}.
struct DrawSequence {
  std::vector<double> draws;
  std::vector<bool> is_innovation;
  std::vector<std::uint32_t> category_id;
  std::vector<std::optional<std::uint32_t>> source_index;
  /// Value of each category's innovation, indexed by category id.
  std::vector<double> category_value;

  [[nodiscard]] std::size_t size() const noexcept { return draws.size(); }
  [[nodiscard]] bool empty() const noexcept { return draws.empty(); }
  [[nodiscard]] std::size_t category_count() const noexcept { return category_value.size(); }
};

/// Run the reinforcement recursion for n steps.
DrawSequence generate_draws(const ReinforcementParams& params, std::size_t n);

/// Running innovation count: element k is the number of innovations among steps 0..k.
std::vector<std::size_t> innovation_count(const DrawSequence& seq);

/// Centered, scaled empirical process n^{-1/2} sum_i (1{draw_i <= u} - u) at each grid point.
std::vector<double> empirical_process(const DrawSequence& seq, std::span<const double> u_grid);

/// Equally spaced grid on [0, 1] including both endpoints.
std::vector<double> uniform_grid(std::size_t points = 1001);

/// sup_u |F_n(u) - u| over the grid, with F_n the empirical CDF of the draws.
double sup_cdf_deviation(const DrawSequence& seq, std::span<const double> u_grid);

std::map<std::uint32_t, std::size_t> category_counts(const DrawSequence& seq);

/// Columns step,draw,is_innovation,category_id,source_index.
void write_csv(std::ostream& out, const DrawSequence& seq);

}  // namespace yulefx
