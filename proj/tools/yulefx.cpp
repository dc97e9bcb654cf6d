// Command-line front end: simulate, fit, sweep, table1, report, psd-check.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "yulefx/bench.hpp"
#include "yulefx/csv.hpp"
#include "yulefx/dgp.hpp"
#include "yulefx/errors.hpp"
#include "yulefx/kernels.hpp"
#include "yulefx/yulesim.hpp"

namespace fs = std::filesystem;
using namespace yulefx;

namespace {

constexpr int kConfigExit = 2;
constexpr int kRuntimeExit = 3;

struct Globals {
  std::string config;
  std::string out;
  unsigned jobs = 0;
  std::optional<std::uint64_t> seed;
};

bench::BenchConfig load_or_default(const Globals& g) {
  return g.config.empty() ? bench::BenchConfig{} : bench::load_config(g.config);
}

fs::path out_dir(const Globals& g, const bench::BenchConfig& cfg) { return g.out.empty() ? cfg.output.dir : fs::path(g.out); }

std::ofstream create(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  return out;
}

int simulate(const Globals& g) {
  const auto cfg = load_or_default(g);
  DgpConfig dgp = cfg.dgp;
  if (g.seed) dgp.reinforcement.seed = *g.seed;
  const SyntheticDataset ds = synthesize(dgp);
  const fs::path dir = out_dir(g, cfg);
  fs::create_directories(dir);

  auto data = create(dir / "dataset.csv");
  write_dataset_csv(data, ds);
  auto draws = create(dir / "draws.csv");
  write_csv(draws, generate_draws(dgp.reinforcement, dgp.n));
  auto meta = create(dir / "dataset.json");
  meta << bench::dgp_json_text(dgp) << '\n';
  if (!data || !draws || !meta) throw Error("failed writing simulation output");
  fmt::print("wrote {} rows, {} categories to {}\n", ds.size(), ds.category_count(), (dir / "dataset.csv").string());
  return 0;
}

int fit(const Globals& g, const std::string& data_path, const std::string& method_name, std::string sidecar) {
  const auto cfg = load_or_default(g);
  const Method method = parse_method(method_name);
  if (sidecar.empty()) {
    const fs::path guess = fs::path(data_path).replace_extension(".json");
    if (fs::exists(guess)) sidecar = guess.string();
  }
  std::optional<DgpConfig> dgp;
  if (!sidecar.empty()) dgp = bench::load_dgp_json(sidecar);

  std::ifstream in(data_path, std::ios::binary);
  if (!in) throw NotFoundError(fmt::format("cannot read {}", data_path));
  const SyntheticDataset ds = read_dataset_csv(in, dgp);

  bench::EstimatorSettings settings = cfg.estimators;
  // Without generating metadata nothing says the outcome lacks a level, so fit one.
  if (!dgp && !settings.kernel_optimizer.intercept) settings.kernel_optimizer.intercept = true;
  if (g.seed) settings.kernel_optimizer.seed = *g.seed;
  const FitResult result = bench::run_estimator(ds, method, settings);

  const fs::path dir = out_dir(g, cfg);
  fs::create_directories(dir);
  auto coef = create(dir / "coefficients.csv");
  write_coefficients_csv(coef, result);
  auto effects = create(dir / "fixed_effects.csv");
  write_fixed_effects_csv(effects, result, ds);
  if (!coef || !effects) throw Error("failed writing fit output");
  fmt::print("{}: n={} categories={} retained={} R2={:.4f} residual_sd={:.4f}{}\n", to_string(method), ds.size(),
             result.total_categories, result.retained_categories, result.r_squared, result.residual_sd,
             result.lambda ? fmt::format(" lambda={:.6g}", *result.lambda) : std::string());
  return 0;
}

int sweep(const Globals& g) {
  if (g.config.empty()) throw bench::ConfigFileError("--config", "sweep needs a config file");
  bench::RunOptions opt;
  const auto cfg = bench::load_config(g.config);
  opt.out_dir = out_dir(g, cfg);
  opt.seed = g.seed;
  opt.jobs = g.jobs;
  const auto m = bench::run_sweep(cfg, opt);
  fmt::print("sweep {} finished: {} cells, {} failed; manifest at {}\n", m.sweep_id,
             m.sizes.size() * m.reinforcement_values.size() * static_cast<std::size_t>(m.replications), m.failed_cells,
             (bench::sweep_dir(*opt.out_dir, m.sweep_id) / "manifest.json").string());
  return 0;
}

int table1(const Globals& g) {
  const auto cfg = load_or_default(g);
  bench::RunOptions opt;
  opt.out_dir = out_dir(g, cfg);
  opt.seed = g.seed;
  const auto result = bench::run_table1(cfg, opt);
  std::cout << result.table;
  return 0;
}

int report(const Globals& g, const std::string& sweep_id) {
  const fs::path dir = g.out.empty() ? fs::path("out") : fs::path(g.out);
  for (const auto& path : bench::report(sweep_id, dir)) fmt::print("{}\n", path.string());
  return 0;
}

int psd_check(const std::string& points_path, const std::string& kernel, double tol) {
  std::ifstream in(points_path, std::ios::binary);
  if (!in) throw NotFoundError(fmt::format("cannot read {}", points_path));
  std::string line;
  std::vector<std::vector<double>> rows;
  bool first = true;
  while (csv::next_record(in, line)) {
    const auto fields = csv::split(line);
    std::vector<double> row;
    try {
      for (const auto& f : fields) row.push_back(csv::to_double(f));
    } catch (const ArgumentError&) {
      if (first) {  // header row
        first = false;
        continue;
      }
      throw;
    }
    first = false;
    if (!rows.empty() && row.size() != rows.front().size()) throw ArgumentError("points CSV rows differ in length");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ArgumentError("points CSV has no rows");
  Eigen::MatrixXd points(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    for (Eigen::Index k = 0; k < points.cols(); ++k) points(i, k) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
  }
  Eigen::MatrixXd g;
  if (kernel == "neg_euclidean") {
    g = gram_from(points, [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return -(a - b).norm(); });
  } else {
    g = gram(parse_kernel_family(kernel), points);
  }
  const PsdReport r = check_psd(g, tol);
  fmt::print("kernel={} points={} psd={} min_eigenvalue={} max_abs_eigenvalue={}\n", kernel, points.rows(),
             r.is_psd ? "true" : "false", r.min_eigenvalue, r.max_abs_eigenvalue);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Yule-Simon fixed-effects simulation and estimation toolkit"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Experiment config (JSON)");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--jobs", g.jobs, "Worker threads (default: hardware parallelism)");
  app.add_option("--seed", g.seed, "Override the base seed");
  app.fallthrough();

  auto* sim = app.add_subcommand("simulate", "Synthesize a dataset from the dgp section");
  std::string data;
  std::string method;
  std::string sidecar;
  auto* fit_cmd = app.add_subcommand("fit", "Fit one estimator to a dataset CSV");
  fit_cmd->add_option("--data", data, "Dataset CSV")->required();
  fit_cmd->add_option("--method", method, "ols_fe, lasso, ridge, aggregate or kernel_model")
      ->required()
      ->check(CLI::IsMember({"ols_fe", "lasso", "ridge", "aggregate", "kernel_model"}));
  fit_cmd->add_option("--meta", sidecar, "Generating config JSON (defaults to the dataset's .json sibling)");
  auto* sweep_cmd = app.add_subcommand("sweep", "Run a configured sweep");
  auto* table_cmd = app.add_subcommand("table1", "Single proposed-method regression table");
  std::string sweep_id;
  auto* report_cmd = app.add_subcommand("report", "Plot-ready CSVs for a finished sweep");
  report_cmd->add_option("--sweep-id", sweep_id, "Sweep identifier")->required();
  std::string points;
  std::string kernel = "gaussian_rbf";
  double tol = 1e-8;
  auto* psd_cmd = app.add_subcommand("psd-check", "PSD verdict for a kernel Gram on a points CSV");
  psd_cmd->add_option("--points", points, "Points CSV, one point per row")->required();
  psd_cmd->add_option("--kernel", kernel, "linear, gaussian_rbf, multiquadric_rbf or neg_euclidean")
      ->check(CLI::IsMember({"linear", "gaussian_rbf", "multiquadric_rbf", "neg_euclidean"}));
  psd_cmd->add_option("--tol", tol, "Relative eigenvalue tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigExit;
  }

  try {
    if (sim->parsed()) return simulate(g);
    if (fit_cmd->parsed()) return fit(g, data, method, sidecar);
    if (sweep_cmd->parsed()) return sweep(g);
    if (table_cmd->parsed()) return table1(g);
    if (report_cmd->parsed()) return report(g, sweep_id);
    if (psd_cmd->parsed()) return psd_check(points, kernel, tol);
  } catch (const ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kConfigExit;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kRuntimeExit;
  }
  return 0;
}
