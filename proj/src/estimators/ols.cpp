#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "yulefx/errors.hpp"
#include "yulefx/estimators.hpp"

namespace yulefx {

namespace {

// Unpenalized y ~ cell + v fitted from cell sums. Within transformation:
// zeta = (S_vy - sum_c S_vc S_yc / n_c) / W, effect_c = (S_yc - zeta S_vc) / n_c.
struct CellFit {
  Eigen::VectorXd effects;
  double covariate = 0.0;
  double rss = 0.0;
  long dof = 0;
  CellMeansCovariance covariance;
};

CellFit fit_cells(const SyntheticDataset& ds, std::span<const std::uint32_t> cell_of, Eigen::Index cells) {
  const CellStats s = CellStats::collect(ds, cell_of, cells);
  const long n = static_cast<long>(ds.size());
  const long dof = n - static_cast<long>(cells + 1);
  if (dof <= 0) {
    throw UnderidentifiedError(
        fmt::format("fixed-effects design is underidentified: n = {} but {} cells + covariate", n, cells));
  }
  if ((s.count.array() <= 0.0).any()) {
    throw UnderidentifiedError("every cell needs at least one observation");
  }

  const Eigen::ArrayXd inv_count = s.count.array().inverse();
  const double within_ss = s.sum_vv - (s.sum_v.array().square() * inv_count).sum();
  if (!(within_ss > 1e-12 * std::max(s.sum_vv, 1e-300))) {
    throw UnderidentifiedError("covariate has no within-category variation");
  }
  const double within_vy = s.sum_vy - (s.sum_v.array() * s.sum_y.array() * inv_count).sum();

  CellFit fit;
  fit.covariate = within_vy / within_ss;
  fit.effects = ((s.sum_y.array() - fit.covariate * s.sum_v.array()) * inv_count).matrix();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double r = ds.y[i] - fit.effects(cell_of[ds.category_id[i]]) - fit.covariate * ds.v[i];
    fit.rss += r * r;
  }
  fit.dof = dof;
  fit.covariance.count = s.count;
  fit.covariance.covariate_mean = (s.sum_v.array() * inv_count).matrix();
  fit.covariance.within_ss = within_ss;
  fit.covariance.sigma2 = fit.rss / static_cast<double>(dof);
  return fit;
}

Coefficient make_coefficient(std::string name, double estimate, double variance, long dof) {
  Coefficient c;
  c.name = std::move(name);
  c.estimate = estimate;
  c.std_error = std::sqrt(variance);
  c.p_value = detail::two_sided_p_value(estimate / *c.std_error, static_cast<double>(dof));
  return c;
}

void fill_fit_statistics(FitResult& out, const CellFit& fit, const SyntheticDataset& ds) {
  const double n = static_cast<double>(ds.size());
  out.r_squared = detail::centered_r_squared(fit.rss, ds);
  out.adjusted_r_squared = 1.0 - (1.0 - out.r_squared) * (n - 1.0) / static_cast<double>(fit.dof);
  out.log_likelihood = -0.5 * n * (std::log(2.0 * std::numbers::pi * fit.rss / n) + 1.0);
  out.residual_sd = std::sqrt(fit.covariance.sigma2);
  out.dof = fit.dof;
  out.cell_covariance = fit.covariance;
}

}  // namespace

FitResult fit_ols_fe(const SyntheticDataset& ds, const OlsOptions& options) {
  const std::size_t categories = ds.category_count();
  const auto cells = identity_cells(categories);
  const CellFit fit = fit_cells(ds, cells, static_cast<Eigen::Index>(categories));
  const CellMeansCovariance& cov = fit.covariance;
  const double sigma2 = cov.sigma2;

  FitResult out;
  out.method = Method::ols_fe;
  out.total_categories = categories;
  out.retained_categories = categories;
  out.fixed_effects.resize(categories);

  if (options.coding == Coding::cell_means) {
    for (std::size_t c = 0; c < categories; ++c) {
      const auto k = static_cast<Eigen::Index>(c);
      const double var = sigma2 * (1.0 / cov.count(k) + cov.covariate_mean(k) * cov.covariate_mean(k) / cov.within_ss);
      auto coef = make_coefficient(category_name(static_cast<std::uint32_t>(c)), fit.effects(k), var, fit.dof);
      coef.category = static_cast<std::uint32_t>(c);
      out.coefficients.push_back(std::move(coef));
      out.fixed_effects[c] = fit.effects(k);
    }
  } else {
    // Contrasts against category 0: Var(b_c - b_0) = s2 (1/n_c + 1/n_0 + (a_c - a_0)^2 / W).
    const double base = fit.effects(0);
    const double var0 = sigma2 * (1.0 / cov.count(0) + cov.covariate_mean(0) * cov.covariate_mean(0) / cov.within_ss);
    out.coefficients.push_back(make_coefficient("intercept", base, var0, fit.dof));
    out.fixed_effects[0] = 0.0;
    for (std::size_t c = 1; c < categories; ++c) {
      const auto k = static_cast<Eigen::Index>(c);
      const double da = cov.covariate_mean(k) - cov.covariate_mean(0);
      const double var = sigma2 * (1.0 / cov.count(k) + 1.0 / cov.count(0) + da * da / cov.within_ss);
      auto coef = make_coefficient(category_name(static_cast<std::uint32_t>(c)), fit.effects(k) - base, var, fit.dof);
      coef.category = static_cast<std::uint32_t>(c);
      out.coefficients.push_back(std::move(coef));
      out.fixed_effects[c] = fit.effects(k) - base;
    }
  }
  out.coefficients.push_back(make_coefficient("covariate", fit.covariate, sigma2 / cov.within_ss, fit.dof));
  fill_fit_statistics(out, fit, ds);
  return out;
}

FitResult fit_aggregated(const SyntheticDataset& ds, std::size_t min_count) {
  if (min_count < 1) {
    throw ArgumentError("fit_aggregated: min_count must be at least 1");
  }
  const std::size_t categories = ds.category_count();
  const auto sizes = ds.category_sizes();

  // Retained categories keep their own cell, in id order; the rest share the last cell.
  std::vector<std::uint32_t> cell_of(categories);
  std::vector<std::uint32_t> retained;
  for (std::size_t c = 0; c < categories; ++c) {
    if (sizes[c] >= min_count) {
      cell_of[c] = static_cast<std::uint32_t>(retained.size());
      retained.push_back(static_cast<std::uint32_t>(c));
    }
  }
  if (retained.empty()) {
    throw UnderidentifiedError(fmt::format("every category has fewer than {} rows; nothing left after merging",
                                           min_count));
  }
  const auto pooled_cell = static_cast<std::uint32_t>(retained.size());
  const bool has_pool = retained.size() < categories;
  for (std::size_t c = 0; c < categories; ++c) {
    if (sizes[c] < min_count) cell_of[c] = pooled_cell;
  }
  const auto cells = static_cast<Eigen::Index>(retained.size() + (has_pool ? 1 : 0));
  const CellFit fit = fit_cells(ds, cell_of, cells);
  const CellMeansCovariance& cov = fit.covariance;

  FitResult out;
  out.method = Method::aggregate;
  out.total_categories = categories;
  out.retained_categories = retained.size();
  out.fixed_effects.resize(categories);
  auto cell_variance = [&](Eigen::Index k) {
    return cov.sigma2 * (1.0 / cov.count(k) + cov.covariate_mean(k) * cov.covariate_mean(k) / cov.within_ss);
  };
  if (has_pool) {
    out.coefficients.push_back(make_coefficient("pooled", fit.effects(pooled_cell), cell_variance(pooled_cell), fit.dof));
  }
  for (std::size_t r = 0; r < retained.size(); ++r) {
    const auto k = static_cast<Eigen::Index>(r);
    auto coef = make_coefficient(category_name(retained[r]), fit.effects(k), cell_variance(k), fit.dof);
    coef.category = retained[r];
    out.coefficients.push_back(std::move(coef));
    out.fixed_effects[retained[r]] = fit.effects(k);
  }
  out.coefficients.push_back(make_coefficient("covariate", fit.covariate, cov.sigma2 / cov.within_ss, fit.dof));
  fill_fit_statistics(out, fit, ds);
  return out;
}

}  // namespace yulefx
