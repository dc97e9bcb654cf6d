#include "yulefx/yulesim.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "yulefx/errors.hpp"
#include "yulefx/rng.hpp"

namespace yulefx {

void ReinforcementParams::validate() const {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ParameterError(fmt::format("reinforcement parameter p must lie in [0, 1], got {}", p));
  }
}

DrawSequence generate_draws(const ReinforcementParams& params, std::size_t n) {
  params.validate();
  if (n == 0) {
    throw ArgumentError("generate_draws: n must be at least 1");
  }

  Rng rng(derive_seed(params.seed, Stream::draws));
  DrawSequence seq;
  seq.draws.reserve(n);
  seq.is_innovation.reserve(n);
  seq.category_id.reserve(n);
  seq.source_index.reserve(n);

  auto innovate = [&] {
    const double u = rng.uniform();
    const auto id = static_cast<std::uint32_t>(seq.category_value.size());
    seq.category_value.push_back(u);
    seq.draws.push_back(u);
    seq.is_innovation.push_back(true);
    seq.category_id.push_back(id);
    seq.source_index.emplace_back(std::nullopt);
  };

  innovate();
  for (std::size_t step = 1; step < n; ++step) {
    if (rng.bernoulli(params.p)) {
      const auto src = static_cast<std::uint32_t>(rng.below(step));
      seq.draws.push_back(seq.draws[src]);
      seq.is_innovation.push_back(false);
      seq.category_id.push_back(seq.category_id[src]);
      seq.source_index.emplace_back(src);
    } else {
      innovate();
    }
  }
  return seq;
}

std::vector<std::size_t> innovation_count(const DrawSequence& seq) {
  if (seq.empty()) {
    throw ArgumentError("innovation_count: empty sequence");
  }
  std::vector<std::size_t> counts(seq.size());
  std::size_t running = 0;
  for (std::size_t k = 0; k < seq.size(); ++k) {
    running += seq.is_innovation[k] ? 1 : 0;
    counts[k] = running;
  }
  return counts;
}

namespace {

void check_grid(std::span<const double> u_grid) {
  for (double u : u_grid) {
    if (!(u >= 0.0 && u <= 1.0)) {
      throw ArgumentError(fmt::format("grid value {} outside [0, 1]", u));
    }
  }
}

// Number of sorted draws <= u.
std::size_t count_at_most(const std::vector<double>& sorted, double u) {
  return static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), u) - sorted.begin());
}

}  // namespace

std::vector<double> empirical_process(const DrawSequence& seq, std::span<const double> u_grid) {
  check_grid(u_grid);
  if (seq.empty()) {
    throw ArgumentError("empirical_process: empty sequence");
  }
  std::vector<double> sorted = seq.draws;
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  const double scale = 1.0 / std::sqrt(n);

  std::vector<double> out;
  out.reserve(u_grid.size());
  for (double u : u_grid) {
    const auto count = static_cast<double>(count_at_most(sorted, u));
    out.push_back((count - n * u) * scale);
  }
  return out;
}

std::vector<double> uniform_grid(std::size_t points) {
  if (points < 2) {
    throw ArgumentError("uniform_grid: need at least two points");
  }
  std::vector<double> grid(points);
  const double step = 1.0 / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) {
    grid[i] = static_cast<double>(i) * step;
  }
  grid.back() = 1.0;
  return grid;
}

double sup_cdf_deviation(const DrawSequence& seq, std::span<const double> u_grid) {
  const auto process = empirical_process(seq, u_grid);
  const double scale = 1.0 / std::sqrt(static_cast<double>(seq.size()));
  double sup = 0.0;
  for (double g : process) {
    sup = std::max(sup, std::abs(g) * scale);
  }
  return sup;
}

std::map<std::uint32_t, std::size_t> category_counts(const DrawSequence& seq) {
  std::map<std::uint32_t, std::size_t> counts;
  for (auto id : seq.category_id) {
    ++counts[id];
  }
  return counts;
}

void write_csv(std::ostream& out, const DrawSequence& seq) {
  out << "step,draw,is_innovation,category_id,source_index\n";
  for (std::size_t k = 0; k < seq.size(); ++k) {
    out << fmt::format("{},{},{},{},", k, seq.draws[k], seq.is_innovation[k] ? 1 : 0, seq.category_id[k]);
    if (seq.source_index[k]) {
      out << *seq.source_index[k];
    }
    out << '\n';
  }
}

}  // namespace yulefx
