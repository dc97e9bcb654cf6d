#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "yulefx/cell_stats.hpp"
#include "yulefx/dgp.hpp"

namespace yulefx {

enum class Method { ols_fe, lasso, ridge, aggregate, kernel_model };

std::string_view to_string(Method method) noexcept;
Method parse_method(std::string_view name);

struct Coefficient {
  std::string name;
  double estimate = 0.0;
  std::optional<double> std_error;
  std::optional<double> p_value;
  /// Set for per-category fixed-effect coefficients.
  std::optional<std::uint32_t> category;
};

/// Covariance of the cell-mean estimates of y ~ cell + v:
///
///   sigma2 * (diag(1 / count) + a a^T / within_ss),
///
/// where a_c is the covariate mean of cell c and within_ss the within-cell sum
/// of squares of the covariate. Kept in structured form because the dense
/// matrix is C x C and C reaches thousands at high innovation rates.
struct CellMeansCovariance {
  Eigen::VectorXd count;
  Eigen::VectorXd covariate_mean;
  double within_ss = 0.0;
  double sigma2 = 0.0;

  [[nodiscard]] Eigen::Index dim() const noexcept { return count.size(); }
  [[nodiscard]] Eigen::MatrixXd dense() const;
  /// log det via the matrix determinant lemma.
  [[nodiscard]] double log_det() const;
};

struct FitResult {
  Method method = Method::ols_fe;
  /// Named parameters in report order (intercept/pooled, covariate, category_<id> ...).
  std::vector<Coefficient> coefficients;
  /// Estimated effect per category id; nullopt when the category was dropped or merged.
  std::vector<std::optional<double>> fixed_effects;
  double r_squared = 0.0;
  double adjusted_r_squared = 0.0;
  std::optional<double> log_likelihood;
  double residual_sd = 0.0;
  std::optional<double> lambda;
  long dof = 0;
  std::size_t retained_categories = 0;
  std::size_t total_categories = 0;
  /// Present for unpenalized cell-means fits (ols_fe and aggregate).
  std::optional<CellMeansCovariance> cell_covariance;

  [[nodiscard]] const Coefficient* find(std::string_view name) const;
  [[nodiscard]] bool is_retained(std::size_t category) const;
  /// p-values of the per-category coefficients (covariate and intercept excluded).
  [[nodiscard]] std::vector<double> fixed_effect_p_values() const;
};

std::string category_name(std::uint32_t category);

// ---------------------------------------------------------------------------
// Unpenalized fixed effects

enum class Coding {
  cell_means,  ///< one indicator per category, no global intercept
  reference,   ///< intercept = category 0, remaining coefficients are contrasts
};

struct OlsOptions {
  Coding coding = Coding::cell_means;
};

/// Least squares on y ~ category dummies + v, solved from per-category sums.
/// Throws UnderidentifiedError when n <= C + 1 or the covariate has no within-category variation.
FitResult fit_ols_fe(const SyntheticDataset& ds, const OlsOptions& options = {});

/// Rule-of-thumb aggregation: categories with fewer than min_count rows share one pooled cell.
FitResult fit_aggregated(const SyntheticDataset& ds, std::size_t min_count = 5);

// ---------------------------------------------------------------------------
// Penalized fixed effects

/// Solution of the penalized problem on the cell design y ~ [intercept] + cell + [v].
struct PenalizedSolution {
  double intercept = 0.0;
  double covariate = 0.0;
  Eigen::VectorXd effects;
};

struct PenaltyDesign {
  /// Unpenalized global intercept. With it the cell effects are deviations
  /// from a common level, so shrinkage pulls estimates toward that level.
  bool intercept = true;
  /// Include the unpenalized covariate v.
  bool covariate = true;
};

/// argmin 1/2 RSS + lambda * sum_c |effect_c|, by exact block coordinate descent.
PenalizedSolution solve_lasso(const CellStats& stats, double lambda, const PenaltyDesign& design = {},
                              const PenalizedSolution* warm_start = nullptr);

/// argmin RSS + lambda * sum_c effect_c^2, closed form. With lambda = 0 the
/// intercept is not identified next to a full set of cell effects and is fixed at 0.
PenalizedSolution solve_ridge(const CellStats& stats, double lambda, const PenaltyDesign& design = {});

/// Largest |d (1/2 RSS) / d effect_c| at effects = 0 with the unpenalized terms refitted.
double max_gradient_at_zero(const CellStats& stats, const PenaltyDesign& design = {});

/// `count` points log-spaced over [lo, hi] * max_gradient_at_zero, in decreasing order.
std::vector<double> default_lambda_grid(const CellStats& stats, const PenaltyDesign& design = {},
                                        std::size_t count = 50, double lo = 1e-4, double hi = 1e2);

struct RegularizedOptions {
  PenaltyDesign design;
  /// Fold-assignment seed; defaults to the dataset's reinforcement seed.
  std::optional<std::uint64_t> seed;
};

struct CrossValidation {
  std::vector<double> lambdas;
  std::vector<double> mean_squared_error;
  double best_lambda = 0.0;
};

/// k-fold CV of a penalized solver over a lambda grid. Throws ResamplingError if a fold is empty.
CrossValidation cross_validate(const SyntheticDataset& ds, Method method, std::span<const double> lambda_grid,
                               int folds, const RegularizedOptions& options = {});

/// LASSO with CV-selected lambda; an empty grid selects the default grid.
FitResult fit_lasso(const SyntheticDataset& ds, std::span<const double> lambda_grid, int folds,
                    const RegularizedOptions& options = {});
/// Ridge with CV-selected lambda; an empty grid selects the default grid.
FitResult fit_ridge(const SyntheticDataset& ds, std::span<const double> lambda_grid, int folds,
                    const RegularizedOptions& options = {});

/// Penalized fits at a fixed lambda (lambda >= 0), no cross-validation.
FitResult fit_lasso_at(const SyntheticDataset& ds, double lambda, const PenaltyDesign& design = {});
FitResult fit_ridge_at(const SyntheticDataset& ds, double lambda, const PenaltyDesign& design = {});

// ---------------------------------------------------------------------------
// Serialization

/// Columns method,name,estimate,std_error,p_value.
void write_coefficients_csv(std::ostream& out, const FitResult& fit, bool header = true);
/// Columns method,category_id,true_beta,estimate,retained.
void write_fixed_effects_csv(std::ostream& out, const FitResult& fit, const SyntheticDataset& ds,
                             bool header = true);

namespace detail {

/// Two-sided p-value of a t statistic with dof degrees of freedom.
double two_sided_p_value(double t, double dof);

/// 1 - rss / tss with tss taken around the mean of y.
double centered_r_squared(double rss, const SyntheticDataset& ds);

}  // namespace detail

}  // namespace yulefx
