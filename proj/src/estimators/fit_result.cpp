#include <cmath>
#include <numeric>
#include <ostream>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "yulefx/errors.hpp"
#include "yulefx/estimators.hpp"

namespace yulefx {

std::string_view to_string(Method method) noexcept {
  switch (method) {
    case Method::ols_fe:
      return "ols_fe";
    case Method::lasso:
      return "lasso";
    case Method::ridge:
      return "ridge";
    case Method::aggregate:
      return "aggregate";
    case Method::kernel_model:
      return "kernel_model";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  if (name == "ols_fe") return Method::ols_fe;
  if (name == "lasso") return Method::lasso;
  if (name == "ridge") return Method::ridge;
  if (name == "aggregate") return Method::aggregate;
  if (name == "kernel_model") return Method::kernel_model;
  throw ArgumentError(fmt::format("unknown estimator '{}'", name));
}

std::string category_name(std::uint32_t category) { return fmt::format("category_{}", category); }

const Coefficient* FitResult::find(std::string_view name) const {
  for (const auto& c : coefficients) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

bool FitResult::is_retained(std::size_t category) const {
  return category < fixed_effects.size() && fixed_effects[category].has_value();
}

std::vector<double> FitResult::fixed_effect_p_values() const {
  std::vector<double> out;
  for (const auto& c : coefficients) {
    if (c.category && c.p_value) out.push_back(*c.p_value);
  }
  return out;
}

Eigen::MatrixXd CellMeansCovariance::dense() const {
  Eigen::MatrixXd m = (covariate_mean * covariate_mean.transpose()) / within_ss;
  m.diagonal() += count.cwiseInverse();
  return sigma2 * m;
}

double CellMeansCovariance::log_det() const {
  // det(D + a a^T / W) = det(D) (1 + a^T D^{-1} a / W) with D = diag(1 / count).
  const double quad = (covariate_mean.array().square() * count.array()).sum() / within_ss;
  const double d = static_cast<double>(dim());
  return d * std::log(sigma2) - count.array().log().sum() + std::log1p(quad);
}

namespace detail {

double two_sided_p_value(double t, double dof) {
  if (!std::isfinite(t)) return 0.0;
  if (dof <= 0.0) throw ArgumentError("two_sided_p_value: dof must be positive");
  const boost::math::students_t dist(dof);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

double centered_r_squared(double rss, const SyntheticDataset& ds) {
  const double n = static_cast<double>(ds.size());
  const double mean = std::accumulate(ds.y.begin(), ds.y.end(), 0.0) / n;
  double tss = 0.0;
  for (double y : ds.y) tss += (y - mean) * (y - mean);
  if (tss == 0.0) return rss == 0.0 ? 1.0 : -std::numeric_limits<double>::infinity();
  return 1.0 - rss / tss;
}

}  // namespace detail

namespace {

std::string optional_field(const std::optional<double>& v) { return v ? fmt::format("{}", *v) : std::string(); }

}  // namespace

void write_coefficients_csv(std::ostream& out, const FitResult& fit, bool header) {
  if (header) out << "method,name,estimate,std_error,p_value\n";
  for (const auto& c : fit.coefficients) {
    out << fmt::format("{},{},{},{},{}\n", to_string(fit.method), c.name, c.estimate, optional_field(c.std_error),
                       optional_field(c.p_value));
  }
}

void write_fixed_effects_csv(std::ostream& out, const FitResult& fit, const SyntheticDataset& ds, bool header) {
  if (header) out << "method,category_id,true_beta,estimate,retained\n";
  for (std::size_t c = 0; c < fit.fixed_effects.size(); ++c) {
    const std::optional<double> truth =
        c < ds.true_beta.size() ? std::optional<double>(ds.true_beta[c]) : std::nullopt;
    const auto& est = fit.fixed_effects[c];
    out << fmt::format("{},{},{},{},{}\n", to_string(fit.method), c, optional_field(truth), optional_field(est),
                       fit.is_retained(c) ? 1 : 0);
  }
}

}  // namespace yulefx
