#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "yulefx/dgp.hpp"
#include "yulefx/estimators.hpp"
#include "yulefx/kernels.hpp"

namespace yulefx {

struct OptimizerConfig {
  int restarts = 20;
  int max_iterations = 500;
  /// Stop when the gradient norm of RSS / (2n) falls below this.
  double gradient_tolerance = 1e-8;
  /// Stop when an accepted step lowers the objective by less than this fraction.
  double relative_tolerance = 1e-10;
  /// Linear family only: fit an intercept. Unset means: fit one unless the
  /// dataset's true effects are its draws (whose model has none).
  std::optional<bool> intercept;
  /// Restart seed; defaults to the dataset's reinforcement seed.
  std::optional<std::uint64_t> seed;
};

struct ParameterEstimate {
  std::string name;
  double estimate = 0.0;
  std::optional<double> std_error;
  std::optional<double> p_value;
};

/// Single-component kernel model y = intercept + influence * K(z; center) + covariate * v + noise.
struct KernelFitResult {
  KernelSpec spec;
  double covariate_coef = 0.0;
  /// intercept (if fitted), influence (non-linear families), w_0..w_{d-1}, covariate.
  std::vector<ParameterEstimate> parameters;
  double rss = 0.0;
  double log_likelihood = 0.0;
  double r_squared = 0.0;
  double adjusted_r_squared = 0.0;
  double residual_sd = 0.0;
  /// Overall F statistic of the non-intercept regressors (linear family).
  std::optional<double> f_statistic;
  long dof = 0;
  std::size_t n = 0;
  int n_restarts_used = 0;
  bool converged = false;
  /// False when the information matrix is singular at the optimum (affected standard
  /// errors are then absent) or the influence is not significant at 5%, in which
  /// case the center carries no usable information about y.
  bool identified = true;
  double gradient_norm = 0.0;

  [[nodiscard]] const ParameterEstimate* find(const std::string& name) const;
};

/// Least squares objective RSS(theta) / (2n) over theta = (intercept, influence, w, covariate),
/// evaluated from per-category sums so its cost is independent of n.
class KernelObjective {
 public:
  KernelObjective(const SyntheticDataset& ds, KernelFamily family);

  [[nodiscard]] Eigen::Index parameter_count() const noexcept { return 3 + dim_; }
  [[nodiscard]] Eigen::Index dim() const noexcept { return dim_; }
  [[nodiscard]] double observations() const noexcept { return n_; }

  [[nodiscard]] double value(const Eigen::VectorXd& theta) const;
  [[nodiscard]] Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const;
  /// Exact Hessian of the objective.
  [[nodiscard]] Eigen::MatrixXd hessian(const Eigen::VectorXd& theta) const;
  /// Gauss-Newton approximation J^T J / n.
  [[nodiscard]] Eigen::MatrixXd gauss_newton(const Eigen::VectorXd& theta) const;

  [[nodiscard]] double rss(const Eigen::VectorXd& theta) const { return 2.0 * n_ * value(theta); }

 private:
  struct Terms;
  [[nodiscard]] Terms evaluate(const Eigen::VectorXd& theta, bool second_order) const;

  KernelFamily family_;
  Eigen::Index dim_;
  Eigen::MatrixXd z_;  // category embeddings
  Eigen::VectorXd count_, sum_y_, sum_v_;
  double n_ = 0.0, sum_yy_ = 0.0, sum_vv_ = 0.0, sum_vy_ = 0.0;
};

KernelFitResult fit_kernel_model(const SyntheticDataset& ds, KernelFamily family, const OptimizerConfig& opt = {});

/// influence * K(z; center): the conditional-mean shift of a category embedded at z.
double predict_fixed_effect(const KernelFitResult& fit, const Eigen::Ref<const Eigen::VectorXd>& z);

/// Common FitResult view: parameters as coefficients, predicted effects for every category.
FitResult to_fit_result(const KernelFitResult& fit, const SyntheticDataset& ds);

}  // namespace yulefx
