#include "yulefx/kernel_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <fmt/format.h>

#include "yulefx/errors.hpp"
#include "yulefx/rng.hpp"

namespace yulefx {

const ParameterEstimate* KernelFitResult::find(const std::string& name) const {
  for (const auto& p : parameters) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

// Parameter layout: theta = (intercept, influence, w_0..w_{d-1}, covariate).
namespace {

constexpr Eigen::Index kIntercept = 0;
constexpr Eigen::Index kInfluence = 1;
constexpr Eigen::Index kCenter = 2;

std::vector<std::string> parameter_names(Eigen::Index d) {
  std::vector<std::string> names{"intercept", "influence"};
  for (Eigen::Index k = 0; k < d; ++k) names.push_back(fmt::format("w_{}", k));
  names.emplace_back("covariate");
  return names;
}

}  // namespace

struct KernelObjective::Terms {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd gauss_newton;
  Eigen::MatrixXd hessian;
};

KernelObjective::KernelObjective(const SyntheticDataset& ds, KernelFamily family)
    : family_(family), dim_(ds.dim()), z_(ds.embeddings) {
  if (ds.size() == 0) throw ArgumentError("KernelObjective: empty dataset");
  const auto cells = identity_cells(ds.category_count());
  const CellStats s = CellStats::collect(ds, cells, static_cast<Eigen::Index>(cells.size()));
  count_ = s.count;
  n_ = s.n;
  // Cell means and within-cell (centered) cross products keep the RSS free of
  // the large cancellation that raw second moments would introduce.
  sum_y_ = (s.sum_y.array() / s.count.array()).matrix();
  sum_v_ = (s.sum_v.array() / s.count.array()).matrix();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto c = ds.category_id[i];
    const double dy = ds.y[i] - sum_y_(c);
    const double dv = ds.v[i] - sum_v_(c);
    sum_yy_ += dy * dy;
    sum_vy_ += dv * dy;
    sum_vv_ += dv * dv;
  }
}

// sum_y_ / sum_v_ hold cell means; sum_yy_, sum_vy_, sum_vv_ hold within-cell sums.
// With e_c = ybar_c - zeta vbar_c - m_c and m_c = intercept + influence K_c,
//   RSS = Wyy - 2 zeta Wvy + zeta^2 Wvv + sum_c n_c e_c^2.
KernelObjective::Terms KernelObjective::evaluate(const Eigen::VectorXd& theta, bool second_order) const {
  const Eigen::Index p = parameter_count();
  const Eigen::Index iz = p - 1;
  const double intercept = theta(kIntercept);
  const double influence = theta(kInfluence);
  const Eigen::VectorXd w = theta.segment(kCenter, dim_);
  const double zeta = theta(iz);

  Terms t;
  t.gradient = Eigen::VectorXd::Zero(p);
  t.gauss_newton = Eigen::MatrixXd::Zero(p, p);
  if (second_order) t.hessian = Eigen::MatrixXd::Zero(p, p);

  double between = 0.0;
  Eigen::VectorXd g(p);  // d m_c / d theta + vbar_c e_zeta
  for (Eigen::Index c = 0; c < count_.size(); ++c) {
    const double nc = count_(c);
    if (nc <= 0.0) continue;
    const auto zc = z_.row(c).transpose();
    const double k = pairwise(family_, zc, w);
    const Eigen::VectorXd dk = detail::center_gradient(family_, zc, w);
    const double e = sum_y_(c) - zeta * sum_v_(c) - (intercept + influence * k);
    between += nc * e * e;

    g.setZero();
    g(kIntercept) = 1.0;
    g(kInfluence) = k;
    g.segment(kCenter, dim_) = influence * dk;
    g(iz) = sum_v_(c);
    t.gradient -= nc * e * g;
    t.gauss_newton.noalias() += nc * g * g.transpose();
    if (second_order) {
      // Residual curvature: only the (influence, w) block of m_c is non-linear.
      t.hessian.block(kInfluence, kCenter, 1, dim_) -= nc * e * dk.transpose();
      t.hessian.block(kCenter, kInfluence, dim_, 1) -= nc * e * dk;
      t.hessian.block(kCenter, kCenter, dim_, dim_) -=
          nc * e * influence * detail::center_hessian(family_, zc, w);
    }
  }
  const double rss = sum_yy_ - 2.0 * zeta * sum_vy_ + zeta * zeta * sum_vv_ + between;
  t.gradient(iz) += zeta * sum_vv_ - sum_vy_;
  t.gauss_newton(iz, iz) += sum_vv_;

  t.value = rss / (2.0 * n_);
  t.gradient /= n_;
  t.gauss_newton /= n_;
  if (second_order) {
    t.hessian = t.hessian / n_ + t.gauss_newton;
  }
  return t;
}

double KernelObjective::value(const Eigen::VectorXd& theta) const { return evaluate(theta, false).value; }

Eigen::VectorXd KernelObjective::gradient(const Eigen::VectorXd& theta) const {
  return evaluate(theta, false).gradient;
}

Eigen::MatrixXd KernelObjective::hessian(const Eigen::VectorXd& theta) const {
  return evaluate(theta, true).hessian;
}

Eigen::MatrixXd KernelObjective::gauss_newton(const Eigen::VectorXd& theta) const {
  return evaluate(theta, false).gauss_newton;
}

namespace {

struct LocalFit {
  Eigen::VectorXd theta;
  double value = std::numeric_limits<double>::infinity();
  double gradient_norm = std::numeric_limits<double>::infinity();
  bool converged = false;
};

// Levenberg-Marquardt with Marquardt's diagonal scaling on the Gauss-Newton matrix.
LocalFit levenberg_marquardt(const KernelObjective& objective, Eigen::VectorXd theta, const OptimizerConfig& opt) {
  const Eigen::Index p = objective.parameter_count();
  double mu = 1e-3;
  LocalFit fit;
  double value = objective.value(theta);
  int small_steps = 0;
  for (int iter = 0; iter < opt.max_iterations; ++iter) {
    const Eigen::VectorXd grad = objective.gradient(theta);
    if (grad.norm() <= opt.gradient_tolerance) break;
    const Eigen::MatrixXd gn = objective.gauss_newton(theta);
    const double diag_floor = 1e-12 * std::max(gn.diagonal().maxCoeff(), 1e-300);

    bool accepted = false;
    while (mu < 1e20) {
      Eigen::MatrixXd damped = gn;
      for (Eigen::Index k = 0; k < p; ++k) damped(k, k) += mu * std::max(gn(k, k), diag_floor);
      const Eigen::LDLT<Eigen::MatrixXd> ldlt(damped);
      if (ldlt.info() == Eigen::Success) {
        const Eigen::VectorXd step = ldlt.solve(-grad);
        const Eigen::VectorXd candidate = theta + step;
        const double candidate_value = objective.value(candidate);
        if (std::isfinite(candidate_value) && candidate_value < value) {
          const double decrease = (value - candidate_value) / std::max(std::abs(value), 1e-300);
          theta = candidate;
          value = candidate_value;
          mu = std::max(mu / 3.0, 1e-15);
          accepted = true;
          small_steps = decrease < opt.relative_tolerance ? small_steps + 1 : 0;
          break;
        }
      }
      mu *= 4.0;
    }
    if (!accepted) break;
    if (small_steps >= 2) {
      fit.converged = true;
      break;
    }
  }
  fit.theta = theta;
  fit.value = value;
  fit.gradient_norm = objective.gradient(theta).norm();
  fit.converged = fit.converged || fit.gradient_norm <= opt.gradient_tolerance;
  return fit;
}

void fill_statistics(KernelFitResult& out, const SyntheticDataset& ds, double rss, Eigen::Index regressors,
                     bool has_intercept) {
  const double n = static_cast<double>(ds.size());
  const Eigen::Index params = regressors + (has_intercept ? 1 : 0);
  out.n = ds.size();
  out.rss = rss;
  out.dof = static_cast<long>(ds.size()) - static_cast<long>(params);
  out.log_likelihood = -0.5 * n * (std::log(2.0 * std::numbers::pi * rss / n) + 1.0);
  out.r_squared = detail::centered_r_squared(rss, ds);
  if (out.dof > 0) {
    out.adjusted_r_squared = 1.0 - (1.0 - out.r_squared) * (n - 1.0) / static_cast<double>(out.dof);
    out.residual_sd = std::sqrt(rss / static_cast<double>(out.dof));
  }
}

ParameterEstimate make_estimate(std::string name, double estimate, std::optional<double> variance, long dof) {
  ParameterEstimate p{std::move(name), estimate, {}, {}};
  if (variance && *variance >= 0.0 && dof > 0) {
    p.std_error = std::sqrt(*variance);
    if (*p.std_error > 0.0) {
      p.p_value = detail::two_sided_p_value(estimate / *p.std_error, static_cast<double>(dof));
    }
  }
  return p;
}

KernelFitResult fit_linear(const SyntheticDataset& ds, const OptimizerConfig& opt) {
  const bool intercept = opt.intercept.value_or(ds.config.mode != EffectMode::draws_as_effects);
  const Eigen::Index d = ds.dim();
  const Eigen::Index off = intercept ? 1 : 0;
  const Eigen::Index k = off + d + 1;

  const auto cells = identity_cells(ds.category_count());
  const CellStats s = CellStats::collect(ds, cells, static_cast<Eigen::Index>(cells.size()));

  // Normal equations accumulated per category: x_c = ([1], z_c) is constant within a category.
  Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXd xty = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd xc(off + d);
  for (Eigen::Index c = 0; c < s.cells(); ++c) {
    if (intercept) xc(0) = 1.0;
    xc.tail(d) = ds.embeddings.row(c).transpose();
    xtx.topLeftCorner(off + d, off + d).noalias() += s.count(c) * xc * xc.transpose();
    xtx.block(0, k - 1, off + d, 1) += s.sum_v(c) * xc;
    xty.head(off + d) += s.sum_y(c) * xc;
  }
  xtx.block(k - 1, 0, 1, off + d) = xtx.block(0, k - 1, off + d, 1).transpose();
  xtx(k - 1, k - 1) = s.sum_vv;
  xty(k - 1) = s.sum_vy;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xtx);
  qr.setThreshold(1e-10);
  if (qr.rank() < k || static_cast<long>(ds.size()) <= static_cast<long>(k)) {
    throw UnderidentifiedError(fmt::format("linear kernel design is rank deficient (rank {} of {}, n = {})",
                                           qr.rank(), k, ds.size()));
  }
  const Eigen::VectorXd beta = qr.solve(xty);

  double rss = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    double fitted = (intercept ? beta(0) : 0.0) + beta(k - 1) * ds.v[i];
    fitted += ds.embeddings.row(ds.category_id[i]).dot(beta.segment(off, d));
    rss += (ds.y[i] - fitted) * (ds.y[i] - fitted);
  }

  KernelFitResult out;
  out.spec.family = KernelFamily::linear;
  out.spec.center = beta.segment(off, d);
  out.spec.influence = 1.0;
  out.spec.intercept = intercept ? beta(0) : 0.0;
  out.covariate_coef = beta(k - 1);
  fill_statistics(out, ds, rss, d + 1, intercept);

  const double sigma2 = rss / static_cast<double>(out.dof);
  const Eigen::MatrixXd cov = sigma2 * qr.inverse();
  if (intercept) out.parameters.push_back(make_estimate("intercept", beta(0), cov(0, 0), out.dof));
  for (Eigen::Index j = 0; j < d; ++j) {
    out.parameters.push_back(make_estimate(fmt::format("w_{}", j), beta(off + j), cov(off + j, off + j), out.dof));
  }
  out.parameters.push_back(make_estimate("covariate", beta(k - 1), cov(k - 1, k - 1), out.dof));
  if (out.r_squared < 1.0) {
    out.f_statistic = (out.r_squared / static_cast<double>(d + 1)) /
                      ((1.0 - out.r_squared) / static_cast<double>(out.dof));
  }
  out.n_restarts_used = 0;
  out.converged = true;
  out.gradient_norm = 0.0;
  return out;
}

KernelFitResult fit_radial(const SyntheticDataset& ds, KernelFamily family, const OptimizerConfig& opt) {
  if (opt.restarts < 1) throw ArgumentError("fit_kernel_model: need at least one restart");
  const KernelObjective objective(ds, family);
  const Eigen::Index d = objective.dim();
  const Eigen::Index p = objective.parameter_count();

  const double n = static_cast<double>(ds.size());
  const double mean_y = std::accumulate(ds.y.begin(), ds.y.end(), 0.0) / n;
  double svv = 0.0;
  double svy = 0.0;
  const double mean_v = std::accumulate(ds.v.begin(), ds.v.end(), 0.0) / n;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    svv += (ds.v[i] - mean_v) * (ds.v[i] - mean_v);
    svy += (ds.v[i] - mean_v) * (ds.y[i] - mean_y);
  }
  const double zeta0 = svv > 0.0 ? svy / svv : 0.0;
  const Eigen::VectorXd lo = ds.embeddings.colwise().minCoeff().transpose();
  const Eigen::VectorXd hi = ds.embeddings.colwise().maxCoeff().transpose();
  constexpr std::array<double, 4> kInfluenceStarts{0.1, -0.1, 1.0, -1.0};

  Rng rng(derive_seed(opt.seed.value_or(ds.config.reinforcement.seed), Stream::restarts));
  LocalFit best;
  for (int r = 0; r < opt.restarts; ++r) {
    Eigen::VectorXd theta(p);
    theta(kIntercept) = mean_y;
    theta(kInfluence) = kInfluenceStarts[static_cast<std::size_t>(r) % kInfluenceStarts.size()];
    for (Eigen::Index j = 0; j < d; ++j) theta(kCenter + j) = lo(j) + rng.uniform() * (hi(j) - lo(j));
    theta(p - 1) = zeta0;
    LocalFit local = levenberg_marquardt(objective, theta, opt);
    if (local.value < best.value) best = std::move(local);
  }

  KernelFitResult out;
  out.spec.family = family;
  out.spec.intercept = best.theta(kIntercept);
  out.spec.influence = best.theta(kInfluence);
  out.spec.center = best.theta.segment(kCenter, d);
  out.covariate_coef = best.theta(p - 1);
  out.n_restarts_used = opt.restarts;
  out.converged = best.converged;
  out.gradient_norm = best.gradient_norm;
  fill_statistics(out, ds, objective.rss(best.theta), p - 1, true);

  // Inverse observed information: Cov(theta) = sigma^2 H^{-1} / n for H the Hessian of RSS / (2n).
  const double sigma2 = out.rss / static_cast<double>(out.dof);
  const Eigen::MatrixXd hess = objective.hessian(best.theta);
  const auto names = parameter_names(d);
  std::vector<std::optional<double>> variance(static_cast<std::size_t>(p));

  auto invert_block = [&](const std::vector<Eigen::Index>& idx) -> bool {
    const auto m = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd block(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
      for (Eigen::Index b = 0; b < m; ++b) block(a, b) = hess(idx[a], idx[b]);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(block);
    if (eig.info() != Eigen::Success) return false;
    const double max_eig = eig.eigenvalues().cwiseAbs().maxCoeff();
    if (!(eig.eigenvalues().minCoeff() > 1e-10 * max_eig)) return false;
    const Eigen::MatrixXd inv = eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
                                eig.eigenvectors().transpose();
    for (Eigen::Index a = 0; a < m; ++a) variance[static_cast<std::size_t>(idx[a])] = sigma2 * inv(a, a) / n;
    return true;
  };

  std::vector<Eigen::Index> all(static_cast<std::size_t>(p));
  std::iota(all.begin(), all.end(), Eigen::Index{0});
  out.identified = invert_block(all);
  if (!out.identified) {
    // Conditional on the center: intercept, influence and covariate remain estimable.
    invert_block({kIntercept, kInfluence, p - 1});
  }
  for (Eigen::Index j = 0; j < p; ++j) {
    out.parameters.push_back(make_estimate(names[static_cast<std::size_t>(j)], best.theta(j),
                                           variance[static_cast<std::size_t>(j)], out.dof));
  }
  // A non-significant influence leaves the center carrying no information about y.
  const auto& influence = out.parameters[kInfluence];
  if (!influence.p_value || *influence.p_value >= 0.05) out.identified = false;
  return out;
}

}  // namespace

KernelFitResult fit_kernel_model(const SyntheticDataset& ds, KernelFamily family, const OptimizerConfig& opt) {
  if (ds.size() == 0 || ds.dim() < 1) {
    throw ArgumentError("fit_kernel_model: dataset needs rows and embeddings");
  }
  return family == KernelFamily::linear ? fit_linear(ds, opt) : fit_radial(ds, family, opt);
}

double predict_fixed_effect(const KernelFitResult& fit, const Eigen::Ref<const Eigen::VectorXd>& z) {
  return effect(fit.spec, z);
}

FitResult to_fit_result(const KernelFitResult& fit, const SyntheticDataset& ds) {
  FitResult out;
  out.method = Method::kernel_model;
  for (const auto& p : fit.parameters) {
    out.coefficients.push_back({p.name, p.estimate, p.std_error, p.p_value, {}});
  }
  out.total_categories = ds.category_count();
  out.retained_categories = ds.category_count();
  out.fixed_effects.resize(ds.category_count());
  for (std::size_t c = 0; c < ds.category_count(); ++c) {
    out.fixed_effects[c] = predict_fixed_effect(fit, ds.embeddings.row(static_cast<Eigen::Index>(c)).transpose());
  }
  out.r_squared = fit.r_squared;
  out.adjusted_r_squared = fit.adjusted_r_squared;
  out.log_likelihood = fit.log_likelihood;
  out.residual_sd = fit.residual_sd;
  out.dof = fit.dof;
  return out;
}

}  // namespace yulefx
