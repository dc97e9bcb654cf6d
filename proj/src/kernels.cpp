#include "yulefx/kernels.hpp"

#include <cmath>

#include <fmt/format.h>

#include "yulefx/errors.hpp"

namespace yulefx {

std::string_view to_string(KernelFamily family) noexcept {
  switch (family) {
    case KernelFamily::linear:
      return "linear";
    case KernelFamily::gaussian_rbf:
      return "gaussian_rbf";
    case KernelFamily::multiquadric_rbf:
      return "multiquadric_rbf";
  }
  return "unknown";
}

KernelFamily parse_kernel_family(std::string_view name) {
  if (name == "linear") return KernelFamily::linear;
  if (name == "gaussian_rbf") return KernelFamily::gaussian_rbf;
  if (name == "multiquadric_rbf") return KernelFamily::multiquadric_rbf;
  throw ArgumentError(fmt::format("unknown kernel family '{}'", name));
}

void KernelSpec::validate() const {
  if (center.size() < 1) {
    throw ArgumentError("kernel center must have dimension >= 1");
  }
  if (!center.allFinite() || !std::isfinite(influence) || !std::isfinite(intercept)) {
    throw ArgumentError("kernel parameters must be finite");
  }
}

namespace {

void check_dims(Eigen::Index expected, Eigen::Index got) {
  if (expected != got) {
    throw ArgumentError(fmt::format("dimension mismatch: kernel has d={}, point has d={}", expected, got));
  }
}

}  // namespace

double pairwise(KernelFamily family, const Eigen::Ref<const Eigen::VectorXd>& a,
                const Eigen::Ref<const Eigen::VectorXd>& b) {
  check_dims(a.size(), b.size());
  switch (family) {
    case KernelFamily::linear:
      return a.dot(b);
    case KernelFamily::gaussian_rbf:
      return std::exp(-(a - b).squaredNorm());
    case KernelFamily::multiquadric_rbf:
      return std::sqrt(1.0 + (a - b).squaredNorm());
  }
  return 0.0;
}

double eval(const KernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& z) {
  check_dims(spec.dim(), z.size());
  return pairwise(spec.family, z, spec.center);
}

double effect(const KernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& z) {
  const double k = eval(spec, z);
  return spec.family == KernelFamily::linear ? k : spec.influence * k;
}

Eigen::MatrixXd gram(KernelFamily family, const Eigen::Ref<const Eigen::MatrixXd>& points) {
  if (points.rows() == 0 || points.cols() == 0) {
    throw ArgumentError("gram: empty point set");
  }
  return gram_from(points, [family](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return pairwise(family, a, b);
  });
}

PsdReport check_psd(const Eigen::Ref<const Eigen::MatrixXd>& matrix, double tol) {
  if (matrix.rows() != matrix.cols() || matrix.rows() == 0) {
    throw ArgumentError(fmt::format("check_psd: expected a non-empty square matrix, got {}x{}", matrix.rows(),
                                    matrix.cols()));
  }
  if (tol < 0.0) {
    throw ArgumentError("check_psd: tolerance must be non-negative");
  }
  const double scale = std::max(1.0, matrix.cwiseAbs().maxCoeff());
  const double asymmetry = (matrix - matrix.transpose()).cwiseAbs().maxCoeff();
  if (asymmetry > tol * scale) {
    throw ArgumentError(fmt::format("check_psd: matrix is not symmetric (max |A - A^T| = {})", asymmetry));
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(matrix, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw LinearAlgebraError("check_psd: eigen-decomposition failed");
  }
  const auto& eigenvalues = solver.eigenvalues();
  PsdReport report;
  report.min_eigenvalue = eigenvalues.minCoeff();
  report.max_abs_eigenvalue = eigenvalues.cwiseAbs().maxCoeff();
  report.is_psd = report.min_eigenvalue >= -tol * report.max_abs_eigenvalue;
  return report;
}

namespace detail {

// d/dw of the radial kernels via the chain rule through r2 = |z - w|^2,
// where d r2 / dw = -2 (z - w).
Eigen::VectorXd center_gradient(KernelFamily family, const Eigen::Ref<const Eigen::VectorXd>& z,
                                const Eigen::Ref<const Eigen::VectorXd>& w) {
  check_dims(w.size(), z.size());
  const Eigen::VectorXd diff = z - w;
  const double r2 = diff.squaredNorm();
  switch (family) {
    case KernelFamily::linear:
      return z;
    case KernelFamily::gaussian_rbf:
      return 2.0 * std::exp(-r2) * diff;
    case KernelFamily::multiquadric_rbf:
      return -diff / std::sqrt(1.0 + r2);
  }
  return Eigen::VectorXd::Zero(w.size());
}

Eigen::MatrixXd center_hessian(KernelFamily family, const Eigen::Ref<const Eigen::VectorXd>& z,
                               const Eigen::Ref<const Eigen::VectorXd>& w) {
  check_dims(w.size(), z.size());
  const Eigen::Index d = w.size();
  const Eigen::VectorXd diff = z - w;
  const double r2 = diff.squaredNorm();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
  switch (family) {
    case KernelFamily::linear:
      return Eigen::MatrixXd::Zero(d, d);
    case KernelFamily::gaussian_rbf: {
      const double k = std::exp(-r2);
      return k * (4.0 * diff * diff.transpose() - 2.0 * eye);
    }
    case KernelFamily::multiquadric_rbf: {
      const double s = std::sqrt(1.0 + r2);
      return eye / s - diff * diff.transpose() / (s * s * s);
    }
  }
  return Eigen::MatrixXd::Zero(d, d);
}

}  // namespace detail

}  // namespace yulefx
