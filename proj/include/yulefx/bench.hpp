#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "yulefx/dgp.hpp"
#include "yulefx/errors.hpp"
#include "yulefx/estimators.hpp"
#include "yulefx/kernel_model.hpp"

namespace yulefx::bench {

/// Invalid experiment configuration, with the offending location.
class ConfigFileError : public ConfigError {
 public:
  ConfigFileError(const std::string& where, const std::string& what)
      : ConfigError(where.empty() ? what : where + ": " + what), where_(where), message_(what) {}
  [[nodiscard]] const std::string& where() const noexcept { return where_; }
  [[nodiscard]] const std::string& message() const noexcept { return message_; }

 private:
  std::string where_;
  std::string message_;
};

struct PenalizedSettings {
  int folds = 10;
  /// Explicit grid; when empty the default log-spaced grid of grid_size points is used.
  std::vector<double> lambda_grid;
  std::size_t grid_size = 50;
  PenaltyDesign design;
};

struct EstimatorSettings {
  std::vector<Method> methods{Method::ols_fe};
  PenalizedSettings lasso;
  PenalizedSettings ridge;
  std::size_t aggregate_min_count = 5;
  KernelFamily kernel_family = KernelFamily::linear;
  OptimizerConfig kernel_optimizer;
};

struct SweepSettings {
  std::string sweep_id = "sweep";
  std::uint64_t base_seed = 0;
  std::vector<std::size_t> sizes;
  std::vector<double> reinforcement_values;
  int replications = 20;
};

struct OutputSettings {
  std::filesystem::path dir = "out";
  bool entropy = true;
  std::optional<double> known_sigma2;
  std::vector<double> percentiles{10.0, 25.0, 50.0, 75.0, 90.0};
  std::vector<double> pvalue_thresholds{0.05, 0.1};
  bool fixed_effects = true;
};

/// Declarative experiment file with sections dgp, sweep, estimators, output.
struct BenchConfig {
  DgpConfig dgp;
  SweepSettings sweep;
  EstimatorSettings estimators;
  OutputSettings output;
};

/// Parses JSON text. Unknown keys, wrong types and invalid values raise
/// ConfigFileError naming the line/column (syntax) or JSON pointer (schema).
BenchConfig parse_config(std::string_view text);
BenchConfig load_config(const std::filesystem::path& path);

/// DgpConfig as {"dgp": {...}}, the metadata file written next to simulated datasets.
std::string dgp_json_text(const DgpConfig& config);
/// Reads a file written by dgp_json_text (or any config file with a dgp section).
DgpConfig load_dgp_json(const std::filesystem::path& path);

/// Log-spaced integer sizes round(10^x) for x evenly spaced over [from, to].
std::vector<std::size_t> log_spaced_sizes(double log10_from, double log10_to, std::size_t count);

/// Seed of one sweep cell, a pure function of its key.
std::uint64_t cell_seed(std::uint64_t base_seed, std::size_t size, double p, int replication) noexcept;

std::string run_id(std::string_view sweep_id, std::size_t size, double p, int replication);

/// Fits one estimator with the configured settings.
FitResult run_estimator(const SyntheticDataset& ds, Method method, const EstimatorSettings& settings);

struct SweepManifest {
  std::string sweep_id;
  std::uint64_t base_seed = 0;
  std::vector<std::size_t> sizes;
  std::vector<double> reinforcement_values;
  std::vector<Method> estimators;
  int replications = 0;
  std::string created_at;
  std::vector<std::string> result_files;
  std::size_t failed_cells = 0;
};

struct RunOptions {
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::uint64_t> seed;
  /// Worker threads; 0 selects the available hardware parallelism.
  unsigned jobs = 0;
};

/// Runs every (size, p, replication) cell: synthesize, fit each estimator, compute
/// metrics. Rows are written in cell-key order regardless of scheduling; the
/// manifest is written last, atomically.
SweepManifest run_sweep(const BenchConfig& config, const RunOptions& options = {});
SweepManifest run_sweep(const std::filesystem::path& config_path, const RunOptions& options = {});

/// Directory holding a sweep's artifacts.
std::filesystem::path sweep_dir(const std::filesystem::path& out_dir, std::string_view sweep_id);

SweepManifest read_manifest(const std::filesystem::path& path);

struct Table1Result {
  FitResult fit;
  KernelFitResult kernel_fit;
  std::string table;
};

/// Single proposed-method regression formatted like a regression summary table.
Table1Result run_table1(const BenchConfig& config, const RunOptions& options = {});
Table1Result run_table1(const std::filesystem::path& config_path, const RunOptions& options = {});

std::string format_table1(const KernelFitResult& fit, const SyntheticDataset& ds);

/// Emits plot-ready CSVs for a finished sweep under <out>/<sweep_id>/report.
/// Throws NotFoundError when the sweep has no manifest.
std::vector<std::filesystem::path> report(std::string_view sweep_id, const std::filesystem::path& out_dir);

}  // namespace yulefx::bench
