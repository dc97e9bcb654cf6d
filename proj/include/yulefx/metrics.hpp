#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "yulefx/estimators.hpp"

namespace yulefx {

/// Percentiles of |estimate - truth| over categories present in both inputs.
struct ErrorSummary {
  std::map<double, double> percentiles;
  std::size_t compared = 0;
  /// Categories with a true value but no estimate.
  std::size_t dropped = 0;
};

/// Type-7 (linear interpolation between order statistics) percentile of unsorted data, level in [0, 100].
double percentile(std::vector<double> values, double level);

/// Estimates and truth are indexed by category id; absent estimates count as dropped.
ErrorSummary abs_error_percentiles(std::span<const std::optional<double>> estimates, std::span<const double> truth,
                                   std::span<const double> levels = std::span<const double>());

/// Default reporting levels 10, 25, 50, 75, 90.
std::span<const double> default_percentile_levels() noexcept;

/// Differential entropy D/2 (1 + log 2 pi) + 1/2 log det Sigma of N(mu, Sigma), via Cholesky.
/// Throws FactorizationError when Sigma is not positive definite.
double mvn_entropy(const Eigen::Ref<const Eigen::MatrixXd>& sigma);

/// Same quantity for the structured covariance of a cell-means fit.
double mvn_entropy(const CellMeansCovariance& sigma);

/// Fixed-effect entropy of an ols_fe fit. When known_sigma2 is set it replaces the residual variance.
double fixed_effect_entropy(const FitResult& fit, std::optional<double> known_sigma2 = std::nullopt);

/// Fraction of fixed-effect p-values strictly greater than each threshold.
/// Throws UnsupportedMethodError when the fit carries no per-category p-values.
std::map<double, double> pvalue_summary(const FitResult& fit, std::span<const double> thresholds);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r = 0.0;
};

/// Least-squares line of estimates on truth over categories present in both.
/// Throws ArgumentError with fewer than 3 pairs, DegenerateRegressorError when truth is constant.
LineFit slope_intercept(std::span<const std::optional<double>> estimates, std::span<const double> truth);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// One-sample Kolmogorov-Smirnov test against Uniform[0, 1] with the asymptotic p-value.
KsResult ks_uniformity(std::span<const double> samples);

/// Kolmogorov survival function Q(x) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 x^2).
double kolmogorov_survival(double x);

/// Spearman rank correlation (average ranks for ties).
double spearman(std::span<const double> a, std::span<const double> b);

struct PairedTest {
  double mean_difference = 0.0;
  double t_statistic = 0.0;
  /// One-sided p-value for H1: mean(a - b) > 0.
  double p_value = 1.0;
};

PairedTest paired_t_test(std::span<const double> a, std::span<const double> b);

}  // namespace yulefx
