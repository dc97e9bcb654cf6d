#include "yulefx/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "yulefx/errors.hpp"

namespace yulefx {

namespace {

constexpr std::array<double, 5> kDefaultLevels{10.0, 25.0, 50.0, 75.0, 90.0};

double entropy_constant(double dim) { return 0.5 * dim * (1.0 + std::log(2.0 * std::numbers::pi)); }

}  // namespace

std::span<const double> default_percentile_levels() noexcept { return kDefaultLevels; }

double percentile(std::vector<double> values, double level) {
  if (values.empty()) throw ArgumentError("percentile of an empty set");
  if (!(level >= 0.0 && level <= 100.0)) throw ArgumentError(fmt::format("percentile level {} outside [0, 100]", level));
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * level / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

ErrorSummary abs_error_percentiles(std::span<const std::optional<double>> estimates, std::span<const double> truth,
                                   std::span<const double> levels) {
  if (levels.empty()) levels = kDefaultLevels;
  std::vector<double> errors;
  ErrorSummary out;
  const std::size_t m = std::min(estimates.size(), truth.size());
  for (std::size_t c = 0; c < m; ++c) {
    if (estimates[c]) {
      errors.push_back(std::abs(*estimates[c] - truth[c]));
    } else {
      ++out.dropped;
    }
  }
  out.dropped += truth.size() > m ? truth.size() - m : 0;
  if (errors.empty()) throw ArgumentError("abs_error_percentiles: no category has both an estimate and a truth");
  out.compared = errors.size();
  std::sort(errors.begin(), errors.end());
  for (double level : levels) out.percentiles[level] = percentile(errors, level);
  return out;
}

double mvn_entropy(const Eigen::Ref<const Eigen::MatrixXd>& sigma) {
  if (sigma.rows() != sigma.cols() || sigma.rows() == 0) {
    throw ArgumentError("mvn_entropy: covariance must be a non-empty square matrix");
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw FactorizationError("mvn_entropy: covariance is not positive definite; parameters are unidentified");
  }
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  if (!std::isfinite(log_det)) {
    throw FactorizationError("mvn_entropy: covariance is numerically singular");
  }
  return entropy_constant(static_cast<double>(sigma.rows())) + 0.5 * log_det;
}

double mvn_entropy(const CellMeansCovariance& sigma) {
  if (!(sigma.sigma2 > 0.0) || !(sigma.within_ss > 0.0) || (sigma.count.array() <= 0.0).any()) {
    throw FactorizationError("mvn_entropy: structured covariance is not positive definite");
  }
  return entropy_constant(static_cast<double>(sigma.dim())) + 0.5 * sigma.log_det();
}

double fixed_effect_entropy(const FitResult& fit, std::optional<double> known_sigma2) {
  if (!fit.cell_covariance) {
    throw UnsupportedMethodError(fmt::format("{} fits carry no sampling covariance", to_string(fit.method)));
  }
  CellMeansCovariance cov = *fit.cell_covariance;
  if (known_sigma2) cov.sigma2 = *known_sigma2;
  return mvn_entropy(cov);
}

std::map<double, double> pvalue_summary(const FitResult& fit, std::span<const double> thresholds) {
  const auto p = fit.fixed_effect_p_values();
  if (p.empty()) {
    throw UnsupportedMethodError(fmt::format("{} fit reports no fixed-effect p-values", to_string(fit.method)));
  }
  std::map<double, double> out;
  for (double t : thresholds) {
    const auto above = std::count_if(p.begin(), p.end(), [t](double v) { return v > t; });
    out[t] = static_cast<double>(above) / static_cast<double>(p.size());
  }
  return out;
}

LineFit slope_intercept(std::span<const std::optional<double>> estimates, std::span<const double> truth) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t c = 0; c < std::min(estimates.size(), truth.size()); ++c) {
    if (!estimates[c]) continue;
    xs.push_back(truth[c]);
    ys.push_back(*estimates[c]);
  }
  if (xs.size() < 3) throw ArgumentError(fmt::format("slope_intercept: need >= 3 shared categories, got {}", xs.size()));
  const double m = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / m;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / m;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) throw DegenerateRegressorError("slope_intercept: true values have zero variance");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r = syy > 0.0 ? sxy / std::sqrt(sxx * syy) : 0.0;
  return fit;
}

double kolmogorov_survival(double x) {
  if (x <= 0.0) return 1.0;
  if (x < 0.2) return 1.0;  // series converges slowly there; Q(0.2) = 1 - 1e-15
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_uniformity(std::span<const double> samples) {
  if (samples.size() < 10) throw ArgumentError("ks_uniformity: need at least 10 samples");
  std::vector<double> sorted(samples.begin(), samples.end());
  for (double u : sorted) {
    if (!(u >= 0.0 && u <= 1.0)) throw ArgumentError(fmt::format("ks_uniformity: sample {} outside [0, 1]", u));
  }
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double upper = static_cast<double>(i + 1) / n - sorted[i];
    const double lower = sorted[i] - static_cast<double>(i) / n;
    d = std::max({d, upper, lower});
  }
  const double root_n = std::sqrt(n);
  // Stephens' finite-sample adjustment of the asymptotic argument.
  return {d, kolmogorov_survival((root_n + 0.12 + 0.11 / root_n) * d)};
}

namespace {

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw ArgumentError("spearman: need two equal-length samples of size >= 2");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double m = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / m;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / m;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

PairedTest paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw ArgumentError("paired_t_test: need two equal-length samples of size >= 2");
  const double m = static_cast<double>(a.size());
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
  const double mean = std::accumulate(diff.begin(), diff.end(), 0.0) / m;
  double ss = 0.0;
  for (double d : diff) ss += (d - mean) * (d - mean);
  const double se = std::sqrt(ss / (m - 1.0) / m);
  PairedTest out;
  out.mean_difference = mean;
  if (se == 0.0) {
    out.t_statistic = mean > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    out.p_value = mean > 0.0 ? 0.0 : 1.0;
    return out;
  }
  out.t_statistic = mean / se;
  const boost::math::students_t dist(m - 1.0);
  out.p_value = boost::math::cdf(boost::math::complement(dist, out.t_statistic));
  return out;
}

}  // namespace yulefx
