#include <algorithm>
#include <cmath>
#include <ctime>
#include <fstream>
#include <sstream>

#include <boost/math/distributions/fisher_f.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>
#include <json.hpp>

#include "bench/json_io.hpp"
#include "bench/sweep_io.hpp"
#include "yulefx/bench.hpp"

namespace yulefx::bench {

namespace {

constexpr int kLabelWidth = 28;
constexpr int kValueWidth = 24;

std::string stars(std::optional<double> p) {
  if (!p) return "";
  if (*p < 0.01) return "***";
  if (*p < 0.05) return "**";
  if (*p < 0.1) return "*";
  return "";
}

// Integer part with thousands separators, as regression tables print counts.
std::string grouped(long long value) {
  std::string digits = std::to_string(value < 0 ? -value : value);
  for (int i = static_cast<int>(digits.size()) - 3; i > 0; i -= 3) digits.insert(static_cast<std::size_t>(i), ",");
  return value < 0 ? "-" + digits : digits;
}

std::string grouped_fixed(double value) {
  const double whole = std::trunc(value);
  const std::string frac = fmt::format("{:.3f}", std::abs(value - whole)).substr(1);
  return grouped(static_cast<long long>(whole)) + frac;
}

std::string row(std::string_view label, std::string_view value) {
  return fmt::format("{:<{}}{:>{}}\n", label, kLabelWidth, value, kValueWidth);
}

std::string label_for(const std::string& name, Eigen::Index dim) {
  if (name == "intercept") return "Constant";
  if (name == "covariate") return "Continuous Covariate";
  if (name == "w_0" && dim == 1) return "Yule-Simon Draws";
  if (name == "influence") return "Influence";
  return "Embedding " + name;
}

}  // namespace

std::string format_table1(const KernelFitResult& fit, const SyntheticDataset& ds) {
  const std::string rule(kLabelWidth + kValueWidth, '-');
  std::string out;
  out += fmt::format("Regression Results (kernel model, {} family)\n", to_string(fit.spec.family));
  out += row("", "Dependent variable: y");
  out += rule + "\n";
  for (const ParameterEstimate& p : fit.parameters) {
    out += row(label_for(p.name, ds.dim()), fmt::format("{:.3f}{:<3}", p.estimate, stars(p.p_value)));
    out += row("", p.std_error ? fmt::format("({:.3f}){:3}", *p.std_error, "") : std::string("(n/a)   "));
  }
  out += rule + "\n";
  out += row("Observations", grouped(static_cast<long long>(fit.n)));
  out += row("R2", fmt::format("{:.3f}", fit.r_squared));
  out += row("Adjusted R2", fmt::format("{:.3f}", fit.adjusted_r_squared));
  out += row("Residual Std. Error", fmt::format("{:.3f} (df = {})", fit.residual_sd, fit.dof));
  if (fit.f_statistic) {
    const bool has_intercept = fit.find("intercept") != nullptr;
    const auto k = static_cast<long>(fit.parameters.size()) - (has_intercept ? 1 : 0);
    std::optional<double> p;
    if (k > 0 && fit.dof > 0 && std::isfinite(*fit.f_statistic)) {
      const boost::math::fisher_f dist(static_cast<double>(k), static_cast<double>(fit.dof));
      p = boost::math::cdf(boost::math::complement(dist, *fit.f_statistic));
    }
    out += row("F Statistic",
               fmt::format("{}{} (df = {}; {})", grouped_fixed(*fit.f_statistic), stars(p), k, fit.dof));
  }
  out += rule + "\n";
  out += row("Note:", "*p<0.1; **p<0.05; ***p<0.01");
  return out;
}

Table1Result run_table1(const BenchConfig& config, const RunOptions& options) {
  if (config.dgp.embedding != EmbeddingKind::identity_scalar) {
    throw ConfigFileError("/dgp/embedding", "the draws table needs the identity_scalar embedding");
  }
  if (config.estimators.kernel_family != KernelFamily::linear) {
    throw ConfigFileError("/estimators/kernel_model/family", "the draws table needs the linear family");
  }
  DgpConfig dgp = config.dgp;
  if (options.seed) dgp.reinforcement.seed = *options.seed;

  const SyntheticDataset ds = synthesize(dgp);
  Table1Result result;
  result.kernel_fit = fit_kernel_model(ds, KernelFamily::linear, config.estimators.kernel_optimizer);
  result.fit = to_fit_result(result.kernel_fit, ds);
  result.table = format_table1(result.kernel_fit, ds);

  const auto dir = sweep_dir(options.out_dir.value_or(config.output.dir), config.sweep.sweep_id);
  // Never clobber a sweep that shares the id: its report depends on that manifest.
  if (std::filesystem::exists(dir / "manifest.json")) {
    const auto previous = read_manifest(dir / "manifest.json");
    if (std::find(previous.result_files.begin(), previous.result_files.end(), kCellsFile) !=
        previous.result_files.end()) {
      throw ConfigFileError("/sweep/sweep_id",
                            fmt::format("'{}' already holds a sweep; give Table 1 its own sweep_id", previous.sweep_id));
    }
  }
  std::filesystem::create_directories(dir);
  std::filesystem::remove(dir / "manifest.json");
  {
    std::ofstream out(dir / kTable1File, std::ios::binary | std::ios::trunc);
    out << result.table;
    std::ofstream coef(dir / kCoefficientsFile, std::ios::binary | std::ios::trunc);
    write_coefficients_csv(coef, result.fit);
    if (!out || !coef) throw Error(fmt::format("cannot write Table 1 artifacts under {}", dir.string()));
  }

  SweepManifest m;
  m.sweep_id = config.sweep.sweep_id;
  m.base_seed = dgp.reinforcement.seed;
  m.sizes = {dgp.n};
  m.reinforcement_values = {dgp.reinforcement.p};
  m.estimators = {Method::kernel_model};
  m.replications = 1;
  m.created_at = fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::time(nullptr)));
  m.result_files = {std::string(kTable1File), std::string(kCoefficientsFile)};
  nlohmann::json extra;
  extra["dgp"] = to_json(dgp);
  write_manifest(dir, m, extra);
  return result;
}

Table1Result run_table1(const std::filesystem::path& config_path, const RunOptions& options) {
  return run_table1(load_config(config_path), options);
}

}  // namespace yulefx::bench
