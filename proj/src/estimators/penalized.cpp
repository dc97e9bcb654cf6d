#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "yulefx/errors.hpp"
#include "yulefx/estimators.hpp"
#include "yulefx/rng.hpp"

namespace yulefx {

namespace {

double soft_threshold(double x, double lambda) {
  if (x > lambda) return x - lambda;
  if (x < -lambda) return x + lambda;
  return 0.0;
}

// Profiled intercept for the lasso (alpha, effects) block given covariate-adjusted
// cell sums t_c. With effects at their soft-threshold optimum, the intercept
// stationarity condition reads
//
//   phi(alpha) = sum_c clip(t_c - n_c alpha, -lambda, lambda) = 0,
//
// a continuous non-increasing piecewise-linear function. Breakpoints are
// (t_c -+ lambda) / n_c; sweeping them in order locates the root exactly.
double profile_intercept_sorted(const Eigen::VectorXd& t, const Eigen::VectorXd& count, double lambda) {
  struct Breakpoint {
    double at;
    Eigen::Index cell;
    bool enters;  // true: saturated-high -> interior; false: interior -> saturated-low
  };
  std::vector<Breakpoint> points;
  points.reserve(static_cast<std::size_t>(2 * t.size()));
  double upper = 0.0;  // cells with clip = +lambda
  for (Eigen::Index c = 0; c < t.size(); ++c) {
    if (count(c) <= 0.0) continue;
    points.push_back({(t(c) - lambda) / count(c), c, true});
    points.push_back({(t(c) + lambda) / count(c), c, false});
    upper += 1.0;
  }
  if (points.empty()) return 0.0;
  std::sort(points.begin(), points.end(), [](const Breakpoint& a, const Breakpoint& b) {
    return a.at < b.at || (a.at == b.at && a.enters && !b.enters);
  });

  double sum_t = 0.0;  // over interior cells
  double sum_n = 0.0;
  double lower = 0.0;
  auto phi = [&](double alpha) { return sum_t - sum_n * alpha + lambda * (upper - lower); };

  for (std::size_t k = 0; k < points.size(); ++k) {
    const auto& bp = points[k];
    if (bp.enters) {
      upper -= 1.0;
      sum_t += t(bp.cell);
      sum_n += count(bp.cell);
    } else {
      lower += 1.0;
      sum_t -= t(bp.cell);
      sum_n -= count(bp.cell);
    }
    const double next = k + 1 < points.size() ? points[k + 1].at : std::numeric_limits<double>::infinity();
    if (phi(next) <= 0.0) {
      if (sum_n <= 0.0) return bp.at;  // flat zero segment; any point in it is optimal
      return std::clamp((sum_t + lambda * (upper - lower)) / sum_n, bp.at, next);
    }
  }
  return points.back().at;
}

// Same root by safeguarded Newton from a warm start: within the right linear
// piece one step lands on the root, so this is exact at O(C) per step. Falls
// back to the sorted sweep if the iteration stalls.
double profile_intercept(const Eigen::VectorXd& t, const Eigen::VectorXd& count, double lambda, double guess) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < t.size(); ++c) {
    if (count(c) <= 0.0) continue;
    lo = std::min(lo, (t(c) - lambda) / count(c));
    hi = std::max(hi, (t(c) + lambda) / count(c));
  }
  if (!(lo <= hi)) return 0.0;
  double alpha = std::clamp(std::isfinite(guess) ? guess : 0.5 * (lo + hi), lo, hi);
  for (int iter = 0; iter < 100; ++iter) {
    double phi = 0.0;
    double slope = 0.0;
    for (Eigen::Index c = 0; c < t.size(); ++c) {
      if (count(c) <= 0.0) continue;
      const double r = t(c) - count(c) * alpha;
      if (r > lambda) {
        phi += lambda;
      } else if (r < -lambda) {
        phi -= lambda;
      } else {
        phi += r;
        slope += count(c);
      }
    }
    if (phi == 0.0) return alpha;
    if (phi > 0.0) {
      lo = alpha;
    } else {
      hi = alpha;
    }
    double next = slope > 0.0 ? alpha + phi / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - alpha) <= 1e-15 * (1.0 + std::abs(alpha)) || hi - lo <= 1e-15 * (1.0 + std::abs(alpha))) {
      return next;
    }
    alpha = next;
  }
  return profile_intercept_sorted(t, count, lambda);
}

// Unpenalized (intercept, covariate) least squares with all effects at zero.
void fit_unpenalized(const CellStats& s, const PenaltyDesign& design, double& intercept, double& covariate) {
  intercept = 0.0;
  covariate = 0.0;
  if (design.intercept && design.covariate) {
    const double var_v = s.sum_vv - s.sum_v_all * s.sum_v_all / s.n;
    covariate = var_v > 0.0 ? (s.sum_vy - s.sum_v_all * s.sum_y_all / s.n) / var_v : 0.0;
    intercept = (s.sum_y_all - covariate * s.sum_v_all) / s.n;
  } else if (design.intercept) {
    intercept = s.sum_y_all / s.n;
  } else if (design.covariate && s.sum_vv > 0.0) {
    covariate = s.sum_vy / s.sum_vv;
  }
}

}  // namespace

PenalizedSolution solve_lasso(const CellStats& s, double lambda, const PenaltyDesign& design,
                              const PenalizedSolution* warm_start) {
  if (!(lambda >= 0.0)) {
    throw ArgumentError("solve_lasso: lambda must be non-negative");
  }
  const bool use_intercept = design.intercept && lambda > 0.0;
  const bool use_covariate = design.covariate && s.sum_vv > 0.0;

  PenalizedSolution sol;
  sol.effects = Eigen::VectorXd::Zero(s.cells());
  if (warm_start != nullptr) {
    sol.intercept = use_intercept ? warm_start->intercept : 0.0;
    sol.covariate = use_covariate ? warm_start->covariate : 0.0;
  } else {
    fit_unpenalized(s, {use_intercept, use_covariate}, sol.intercept, sol.covariate);
  }

  constexpr int max_sweeps = 10000;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    const Eigen::VectorXd t = s.sum_y - sol.covariate * s.sum_v;
    const double prev_intercept = sol.intercept;
    if (use_intercept) {
      sol.intercept = profile_intercept(t, s.count, lambda, sol.intercept);
    }
    for (Eigen::Index c = 0; c < s.cells(); ++c) {
      sol.effects(c) = s.count(c) > 0.0 ? soft_threshold(t(c) - s.count(c) * sol.intercept, lambda) / s.count(c) : 0.0;
    }
    if (!use_covariate) break;

    const double prev_covariate = sol.covariate;
    sol.covariate = (s.sum_vy - sol.intercept * s.sum_v_all - s.sum_v.dot(sol.effects)) / s.sum_vv;
    const double change = std::max(std::abs(sol.covariate - prev_covariate), std::abs(sol.intercept - prev_intercept));
    if (change <= 1e-14 * (1.0 + std::abs(sol.covariate) + std::abs(sol.intercept))) {
      // Final effects consistent with the final covariate.
      const Eigen::VectorXd t_final = s.sum_y - sol.covariate * s.sum_v;
      if (use_intercept) sol.intercept = profile_intercept(t_final, s.count, lambda, sol.intercept);
      for (Eigen::Index c = 0; c < s.cells(); ++c) {
        sol.effects(c) =
            s.count(c) > 0.0 ? soft_threshold(t_final(c) - s.count(c) * sol.intercept, lambda) / s.count(c) : 0.0;
      }
      break;
    }
  }
  return sol;
}

PenalizedSolution solve_ridge(const CellStats& s, double lambda, const PenaltyDesign& design) {
  if (!(lambda >= 0.0)) {
    throw ArgumentError("solve_ridge: lambda must be non-negative");
  }
  const bool use_intercept = design.intercept && lambda > 0.0;
  const bool use_covariate = design.covariate;

  // Effects given (alpha, zeta): b_c = (S_yc - n_c alpha - zeta S_vc) / (n_c + lambda).
  // Substituting into the unpenalized normal equations leaves a system of size <= 2.
  Eigen::ArrayXd weight = (s.count.array() + lambda).inverse();
  for (Eigen::Index c = 0; c < s.cells(); ++c) {
    if (s.count(c) + lambda <= 0.0) weight(c) = 0.0;
  }
  const Eigen::ArrayXd shrink = lambda * weight;  // 1 - n_c / (n_c + lambda)

  const int k = (use_intercept ? 1 : 0) + (use_covariate ? 1 : 0);
  double intercept = 0.0;
  double covariate = 0.0;
  if (k > 0) {
    Eigen::MatrixXd m(k, k);
    Eigen::VectorXd rhs(k);
    int ia = -1;
    int iz = -1;
    int next = 0;
    if (use_intercept) ia = next++;
    if (use_covariate) iz = next++;
    if (ia >= 0) {
      m(ia, ia) = (s.count.array() * shrink).sum();
      rhs(ia) = (s.sum_y.array() * shrink).sum();
    }
    if (iz >= 0) {
      m(iz, iz) = s.sum_vv - (s.sum_v.array().square() * weight).sum();
      rhs(iz) = s.sum_vy - (s.sum_v.array() * s.sum_y.array() * weight).sum();
    }
    if (ia >= 0 && iz >= 0) {
      m(ia, iz) = m(iz, ia) = (s.sum_v.array() * shrink).sum();
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m);
    qr.setThreshold(1e-12);
    if (qr.rank() < k) {
      throw LinearAlgebraError("solve_ridge: penalized normal equations are singular");
    }
    const Eigen::VectorXd theta = qr.solve(rhs);
    if (ia >= 0) intercept = theta(ia);
    if (iz >= 0) covariate = theta(iz);
  }

  PenalizedSolution sol;
  sol.intercept = intercept;
  sol.covariate = covariate;
  sol.effects = ((s.sum_y.array() - s.count.array() * intercept - covariate * s.sum_v.array()) * weight).matrix();
  return sol;
}

double max_gradient_at_zero(const CellStats& s, const PenaltyDesign& design) {
  double intercept = 0.0;
  double covariate = 0.0;
  fit_unpenalized(s, design, intercept, covariate);
  const Eigen::ArrayXd r = s.sum_y.array() - s.count.array() * intercept - covariate * s.sum_v.array();
  return r.abs().maxCoeff();
}

std::vector<double> default_lambda_grid(const CellStats& s, const PenaltyDesign& design, std::size_t count,
                                        double lo, double hi) {
  if (count < 1 || !(lo > 0.0) || !(hi >= lo)) {
    throw ArgumentError("default_lambda_grid: need count >= 1 and 0 < lo <= hi");
  }
  double scale = max_gradient_at_zero(s, design);
  // A gradient at roundoff level (e.g. a single category absorbed by the intercept) carries no scale.
  if (!(scale > 1e-10 * std::sqrt(s.n * s.sum_yy))) scale = 1.0;
  std::vector<double> grid(count);
  const double log_lo = std::log(lo * scale);
  const double log_hi = std::log(hi * scale);
  for (std::size_t i = 0; i < count; ++i) {
    const double frac = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
    grid[i] = std::exp(log_hi + frac * (log_lo - log_hi));
  }
  return grid;
}

namespace {

double residual_ss(const SyntheticDataset& ds, const PenalizedSolution& sol, std::span<const std::size_t> rows) {
  double rss = 0.0;
  for (std::size_t i : rows) {
    const double r = ds.y[i] - sol.intercept - sol.effects(ds.category_id[i]) - sol.covariate * ds.v[i];
    rss += r * r;
  }
  return rss;
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

void check_grid(std::span<const double> grid) {
  for (double lambda : grid) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
      throw ArgumentError(fmt::format("lambda grid values must be positive and finite, got {}", lambda));
    }
  }
}

}  // namespace

CrossValidation cross_validate(const SyntheticDataset& ds, Method method, std::span<const double> lambda_grid,
                               int folds, const RegularizedOptions& options) {
  if (method != Method::lasso && method != Method::ridge) {
    throw UnsupportedMethodError("cross_validate: only lasso and ridge are penalized");
  }
  if (folds < 2) {
    throw ArgumentError("cross_validate: need at least 2 folds");
  }
  if (lambda_grid.empty()) {
    throw ArgumentError("cross_validate: empty lambda grid");
  }
  check_grid(lambda_grid);
  const std::size_t n = ds.size();
  const auto k = static_cast<std::size_t>(folds);
  if (n < k) {
    throw ResamplingError(fmt::format("cannot split {} rows into {} non-empty folds", n, folds));
  }

  // Shuffled round-robin assignment.
  std::vector<std::size_t> order = all_rows(n);
  Rng rng(derive_seed(options.seed.value_or(ds.config.reinforcement.seed), Stream::folds));
  for (std::size_t i = n - 1; i > 0; --i) {
    std::swap(order[i], order[rng.below(i + 1)]);
  }
  std::vector<std::vector<std::size_t>> fold_rows(k);
  for (std::size_t i = 0; i < n; ++i) fold_rows[i % k].push_back(order[i]);

  // Solve from the largest lambda down so lasso can warm start.
  std::vector<std::size_t> by_lambda(lambda_grid.size());
  std::iota(by_lambda.begin(), by_lambda.end(), std::size_t{0});
  std::sort(by_lambda.begin(), by_lambda.end(),
            [&](std::size_t a, std::size_t b) { return lambda_grid[a] > lambda_grid[b]; });

  const auto cells = identity_cells(ds.category_count());
  const auto cell_count = static_cast<Eigen::Index>(ds.category_count());
  const CellStats full = CellStats::collect(ds, cells, cell_count);

  CrossValidation cv;
  cv.lambdas.assign(lambda_grid.begin(), lambda_grid.end());
  cv.mean_squared_error.assign(lambda_grid.size(), 0.0);
  for (const auto& test : fold_rows) {
    if (test.empty()) {
      throw ResamplingError("cross-validation fold without data");
    }
    const CellStats train = full - CellStats::collect_rows(ds, cells, cell_count, test);
    PenalizedSolution previous;
    bool have_previous = false;
    for (std::size_t idx : by_lambda) {
      const double lambda = lambda_grid[idx];
      PenalizedSolution sol = method == Method::lasso
                                  ? solve_lasso(train, lambda, options.design, have_previous ? &previous : nullptr)
                                  : solve_ridge(train, lambda, options.design);
      cv.mean_squared_error[idx] += residual_ss(ds, sol, test) / static_cast<double>(test.size()) / static_cast<double>(k);
      previous = std::move(sol);
      have_previous = true;
    }
  }

  // Ties resolve to the larger penalty.
  std::size_t best = by_lambda.front();
  for (std::size_t idx : by_lambda) {
    if (cv.mean_squared_error[idx] < cv.mean_squared_error[best]) best = idx;
  }
  cv.best_lambda = lambda_grid[best];
  return cv;
}

namespace {

FitResult penalized_fit_result(const SyntheticDataset& ds, Method method, double lambda, const PenaltyDesign& design,
                               const PenalizedSolution& sol) {
  const bool use_intercept = design.intercept && lambda > 0.0;
  const std::size_t categories = ds.category_count();
  const double n = static_cast<double>(ds.size());

  FitResult out;
  out.method = method;
  out.lambda = lambda;
  out.total_categories = categories;
  out.fixed_effects.resize(categories);
  if (use_intercept) out.coefficients.push_back({"intercept", sol.intercept, {}, {}, {}});
  if (design.covariate) out.coefficients.push_back({"covariate", sol.covariate, {}, {}, {}});

  double effective_params = (use_intercept ? 1.0 : 0.0) + (design.covariate ? 1.0 : 0.0);
  const auto sizes = ds.category_sizes();
  for (std::size_t c = 0; c < categories; ++c) {
    const double b = sol.effects(static_cast<Eigen::Index>(c));
    if (method == Method::lasso && b == 0.0) continue;
    const double estimate = sol.intercept + b;
    out.fixed_effects[c] = estimate;
    Coefficient coef{category_name(static_cast<std::uint32_t>(c)), estimate, {}, {}, static_cast<std::uint32_t>(c)};
    out.coefficients.push_back(std::move(coef));
    ++out.retained_categories;
    // Ridge degrees of freedom approximated by the diagonal of the hat matrix of the dummy block.
    effective_params += method == Method::ridge ? sizes[c] / (sizes[c] + lambda) : 1.0;
  }

  const double rss = residual_ss(ds, sol, all_rows(ds.size()));
  out.dof = static_cast<long>(std::lround(n - effective_params));
  out.r_squared = detail::centered_r_squared(rss, ds);
  const double dof = std::max<double>(static_cast<double>(out.dof), 1.0);
  out.adjusted_r_squared = 1.0 - (1.0 - out.r_squared) * (n - 1.0) / dof;
  out.residual_sd = std::sqrt(rss / dof);
  return out;
}

FitResult fit_penalized(const SyntheticDataset& ds, Method method, std::span<const double> lambda_grid, int folds,
                        const RegularizedOptions& options) {
  std::vector<double> grid(lambda_grid.begin(), lambda_grid.end());
  if (grid.empty()) {
    const auto cells = identity_cells(ds.category_count());
    grid = default_lambda_grid(CellStats::collect(ds, cells, static_cast<Eigen::Index>(cells.size())), options.design);
  }
  const CrossValidation cv = cross_validate(ds, method, grid, folds, options);
  return method == Method::lasso ? fit_lasso_at(ds, cv.best_lambda, options.design)
                                 : fit_ridge_at(ds, cv.best_lambda, options.design);
}

}  // namespace

FitResult fit_lasso_at(const SyntheticDataset& ds, double lambda, const PenaltyDesign& design) {
  const auto cells = identity_cells(ds.category_count());
  const CellStats stats = CellStats::collect(ds, cells, static_cast<Eigen::Index>(cells.size()));
  return penalized_fit_result(ds, Method::lasso, lambda, design, solve_lasso(stats, lambda, design));
}

FitResult fit_ridge_at(const SyntheticDataset& ds, double lambda, const PenaltyDesign& design) {
  const auto cells = identity_cells(ds.category_count());
  const CellStats stats = CellStats::collect(ds, cells, static_cast<Eigen::Index>(cells.size()));
  return penalized_fit_result(ds, Method::ridge, lambda, design, solve_ridge(stats, lambda, design));
}

FitResult fit_lasso(const SyntheticDataset& ds, std::span<const double> lambda_grid, int folds,
                    const RegularizedOptions& options) {
  return fit_penalized(ds, Method::lasso, lambda_grid, folds, options);
}

FitResult fit_ridge(const SyntheticDataset& ds, std::span<const double> lambda_grid, int folds,
                    const RegularizedOptions& options) {
  return fit_penalized(ds, Method::ridge, lambda_grid, folds, options);
}

}  // namespace yulefx
