#pragma once

#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace yulefx {

enum class KernelFamily { linear, gaussian_rbf, multiquadric_rbf };

std::string_view to_string(KernelFamily family) noexcept;
/// Parses "linear", "gaussian_rbf" or "multiquadric_rbf"; throws ArgumentError otherwise.
KernelFamily parse_kernel_family(std::string_view name);

/// A single-component kernel model: intercept + influence * K(z; center).
///
/// For the linear family `center` holds the weight vector and the influence is
/// fixed at 1, so the model is intercept + center . z.
struct KernelSpec {
  KernelFamily family = KernelFamily::linear;
  Eigen::VectorXd center;
  double influence = 1.0;
  double intercept = 0.0;

  [[nodiscard]] Eigen::Index dim() const noexcept { return center.size(); }
  /// Throws ArgumentError if the center is empty or any parameter is non-finite.
  void validate() const;
};

/// Raw kernel value at z: linear w.z, gaussian exp(-|z-w|^2), multiquadric sqrt(1+|z-w|^2).
double eval(const KernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& z);

/// Conditional-mean shift influence * K(z; w); the influence is taken as 1 for the linear family.
double effect(const KernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& z);

/// Pairwise kernel K(a, b) with b in place of the center.
double pairwise(KernelFamily family, const Eigen::Ref<const Eigen::VectorXd>& a,
                const Eigen::Ref<const Eigen::VectorXd>& b);

/// Gram matrix over the rows of `points`, each pair evaluated once and mirrored.
Eigen::MatrixXd gram(KernelFamily family, const Eigen::Ref<const Eigen::MatrixXd>& points);

/// Gram matrix of an arbitrary symmetric function; used for non-kernel controls.
template <typename Fn>
Eigen::MatrixXd gram_from(const Eigen::Ref<const Eigen::MatrixXd>& points, Fn&& fn) {
  const Eigen::Index m = points.rows();
  Eigen::MatrixXd g(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double value = fn(points.row(i).transpose(), points.row(j).transpose());
      g(i, j) = value;
      g(j, i) = value;
    }
  }
  return g;
}

struct PsdReport {
  bool is_psd = false;
  double min_eigenvalue = 0.0;
  double max_abs_eigenvalue = 0.0;
};

/// Mercer check for a symmetric matrix.
///
/// The matrix is PSD when its smallest eigenvalue is >= -tol * max|eigenvalue|
/// (tol relative, so roundoff from the eigensolver is absorbed independent of
/// scale). Throws ArgumentError for non-square input or asymmetry larger than
/// tol relative to the largest entry.
PsdReport check_psd(const Eigen::Ref<const Eigen::MatrixXd>& matrix, double tol = 1e-8);

namespace detail {

/// Gradient of K(z; w) with respect to the center w.
Eigen::VectorXd center_gradient(KernelFamily family, const Eigen::Ref<const Eigen::VectorXd>& z,
                                const Eigen::Ref<const Eigen::VectorXd>& w);

/// Hessian of K(z; w) with respect to the center w.
Eigen::MatrixXd center_hessian(KernelFamily family, const Eigen::Ref<const Eigen::VectorXd>& z,
                               const Eigen::Ref<const Eigen::VectorXd>& w);

}  // namespace detail

}  // namespace yulefx
