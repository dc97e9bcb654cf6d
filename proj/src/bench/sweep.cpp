#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <condition_variable>
#include <ctime>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <json.hpp>

#include "bench/json_io.hpp"
#include "bench/sweep_io.hpp"
#include "yulefx/bench.hpp"
#include "yulefx/metrics.hpp"
#include "yulefx/rng.hpp"

namespace yulefx::bench {

using nlohmann::json;

namespace {

std::string opt(const std::optional<double>& v) { return v ? fmt::format("{}", *v) : std::string(); }

struct CellKey {
  std::size_t size;
  double p;
  int replication;
};

struct CellOutput {
  std::string cells;
  std::string metrics;
  std::string effects;
  bool failed = false;
};

std::vector<double> effective_grid(const SyntheticDataset& ds, const PenalizedSettings& s) {
  if (!s.lambda_grid.empty() || s.grid_size == 50) return s.lambda_grid;
  const auto stats = CellStats::collect(ds, identity_cells(ds.category_count()),
                                        static_cast<Eigen::Index>(ds.category_count()));
  return default_lambda_grid(stats, s.design, s.grid_size);
}

std::string sanitize(std::string message) {
  std::replace_if(message.begin(), message.end(), [](char c) { return c == ',' || c == '\n' || c == '\r'; }, ';');
  return message;
}

class CellRunner {
 public:
  CellRunner(const BenchConfig& cfg, std::uint64_t base_seed) : cfg_(cfg), base_seed_(base_seed) {}

  CellOutput run(const CellKey& key) const {
    CellOutput out;
    const std::uint64_t seed = cell_seed(base_seed_, key.size, key.p, key.replication);
    const std::string id = run_id(cfg_.sweep.sweep_id, key.size, key.p, key.replication);
    const std::string cell_prefix = fmt::format("{},{},{},{},{}", id, key.size, key.p, key.replication, seed);

    std::optional<SyntheticDataset> ds;
    std::string synth_error;
    try {
      DgpConfig dgp = cfg_.dgp;
      dgp.n = key.size;
      dgp.reinforcement.p = key.p;
      dgp.reinforcement.seed = seed;
      ds = synthesize(dgp);
    } catch (const std::exception& e) {
      synth_error = e.what();
    }

    for (const Method method : cfg_.estimators.methods) {
      std::string error = synth_error;
      if (ds) {
        try {
          const FitResult fit = run_estimator(*ds, method, cfg_.estimators);
          append_metrics(out, id, key, *ds, fit);
        } catch (const std::exception& e) {
          error = e.what();
        }
      }
      const bool ok = ds && error.empty();
      out.failed = out.failed || !ok;
      out.cells += fmt::format("{},{},{},{}\n", cell_prefix, to_string(method), ok ? "ok" : "failed", sanitize(error));
    }
    return out;
  }

 private:
  void append_metrics(CellOutput& out, const std::string& id, const CellKey& key, const SyntheticDataset& ds,
                      const FitResult& fit) const {
    const auto method = to_string(fit.method);
    const OutputSettings& o = cfg_.output;
    const bool has_truth = !ds.true_beta.empty();
    const std::string prefix = fmt::format("{},{},{},{}", id, method, key.size, key.p);
    std::string rows;
    auto put = [&](std::string_view metric, std::optional<double> level, std::optional<double> value) {
      if (value) rows += fmt::format("{},{},{},{}\n", prefix, metric, opt(level), *value);
    };

    put("categories", std::nullopt, static_cast<double>(fit.total_categories));
    put("retained", std::nullopt, static_cast<double>(fit.retained_categories));
    put("r_squared", std::nullopt, fit.r_squared);
    put("adjusted_r_squared", std::nullopt, fit.adjusted_r_squared);
    put("residual_sd", std::nullopt, fit.residual_sd);
    put("lambda", std::nullopt, fit.lambda);
    if (const Coefficient* c = fit.find("covariate")) put("covariate", std::nullopt, c->estimate);

    if (has_truth && !o.percentiles.empty()) {
      try {
        const ErrorSummary s = abs_error_percentiles(fit.fixed_effects, ds.true_beta, o.percentiles);
        for (double level : o.percentiles) put("abs_error", level, s.percentiles.at(level));
      } catch (const Error&) {
      }
    }
    if (o.entropy && fit.cell_covariance && fit.method == Method::ols_fe) {
      try {
        put("entropy", std::nullopt, fixed_effect_entropy(fit, o.known_sigma2));
      } catch (const Error&) {
      }
    }
    if (has_truth) {
      try {
        const LineFit line = slope_intercept(fit.fixed_effects, ds.true_beta);
        put("slope", std::nullopt, line.slope);
        put("intercept", std::nullopt, line.intercept);
        put("correlation", std::nullopt, line.r);
      } catch (const Error&) {
      }
    }
    if (!fit.fixed_effect_p_values().empty() && !o.pvalue_thresholds.empty()) {
      for (const auto& [t, fraction] : pvalue_summary(fit, o.pvalue_thresholds)) put("pvalue_frac_gt", t, fraction);
    }
    out.metrics += rows;

    if (o.fixed_effects) {
      std::vector<const Coefficient*> by_category(ds.category_count(), nullptr);
      for (const Coefficient& c : fit.coefficients) {
        if (c.category && *c.category < by_category.size()) by_category[*c.category] = &c;
      }
      const auto sizes = ds.category_sizes();
      for (std::size_t c = 0; c < ds.category_count(); ++c) {
        const auto& est = c < fit.fixed_effects.size() ? fit.fixed_effects[c] : std::optional<double>();
        const Coefficient* coef = by_category[c];
        out.effects += fmt::format("{},{},{},{},{},{},{},{},{}\n", id, method, c, sizes[c],
                                   has_truth ? fmt::format("{}", ds.true_beta[c]) : std::string(), opt(est),
                                   coef ? opt(coef->std_error) : std::string(),
                                   coef ? opt(coef->p_value) : std::string(), fit.is_retained(c) ? 1 : 0);
      }
    }
  }

  const BenchConfig& cfg_;
  std::uint64_t base_seed_;
};

constexpr std::string_view kCellsHeader = "run_id,n,p,replication,seed,method,status,message\n";
constexpr std::string_view kMetricsHeader = "run_id,method,n,p,metric,level,value\n";
constexpr std::string_view kEffectsHeader =
    "run_id,method,category_id,count,true_beta,estimate,std_error,p_value,retained\n";

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(t));
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  return out;
}

}  // namespace

std::uint64_t cell_seed(std::uint64_t base_seed, std::size_t size, double p, int replication) noexcept {
  return derive_seed(base_seed, {static_cast<std::uint64_t>(Stream::cell), static_cast<std::uint64_t>(size),
                                 std::bit_cast<std::uint64_t>(p), static_cast<std::uint64_t>(replication)});
}

std::string run_id(std::string_view sweep_id, std::size_t size, double p, int replication) {
  return fmt::format("{}-n{}-p{}-r{}", sweep_id, size, p, replication);
}

FitResult run_estimator(const SyntheticDataset& ds, Method method, const EstimatorSettings& s) {
  switch (method) {
    case Method::ols_fe:
      return fit_ols_fe(ds);
    case Method::lasso: {
      const auto grid = effective_grid(ds, s.lasso);
      return fit_lasso(ds, grid, s.lasso.folds, {s.lasso.design, std::nullopt});
    }
    case Method::ridge: {
      const auto grid = effective_grid(ds, s.ridge);
      return fit_ridge(ds, grid, s.ridge.folds, {s.ridge.design, std::nullopt});
    }
    case Method::aggregate:
      return fit_aggregated(ds, s.aggregate_min_count);
    case Method::kernel_model:
      return to_fit_result(fit_kernel_model(ds, s.kernel_family, s.kernel_optimizer), ds);
  }
  throw UnsupportedMethodError("unknown method");
}

std::filesystem::path sweep_dir(const std::filesystem::path& out_dir, std::string_view sweep_id) {
  return out_dir / std::filesystem::path(std::string(sweep_id));
}

void write_manifest(const std::filesystem::path& dir, const SweepManifest& m, const json& extra) {
  json j = extra;
  j["sweep_id"] = m.sweep_id;
  j["base_seed"] = m.base_seed;
  j["sizes"] = m.sizes;
  j["reinforcement_values"] = m.reinforcement_values;
  json methods = json::array();
  for (Method e : m.estimators) methods.push_back(std::string(to_string(e)));
  j["estimators"] = methods;
  j["replications"] = m.replications;
  j["created_at"] = m.created_at;
  j["result_files"] = m.result_files;
  j["failed_cells"] = m.failed_cells;

  for (const auto& f : m.result_files) {
    if (!std::filesystem::exists(dir / f)) throw Error(fmt::format("result file {} is missing", f));
  }
  const auto final_path = dir / "manifest.json";
  const auto tmp = dir / "manifest.json.tmp";
  {
    auto out = open_out(tmp);
    out << j.dump(2) << '\n';
    out.flush();
    if (!out) throw Error(fmt::format("failed writing {}", tmp.string()));
  }
  std::filesystem::rename(tmp, final_path);
}

SweepManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError(fmt::format("no manifest at {}", path.string()));
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(fmt::format("corrupt manifest {}: {}", path.string(), e.what()));
  }
  try {
    SweepManifest m;
    m.sweep_id = j.at("sweep_id").get<std::string>();
    m.base_seed = j.at("base_seed").get<std::uint64_t>();
    m.sizes = j.at("sizes").get<std::vector<std::size_t>>();
    m.reinforcement_values = j.at("reinforcement_values").get<std::vector<double>>();
    for (const auto& e : j.at("estimators")) m.estimators.push_back(parse_method(e.get<std::string>()));
    m.replications = j.at("replications").get<int>();
    m.created_at = j.at("created_at").get<std::string>();
    m.result_files = j.at("result_files").get<std::vector<std::string>>();
    m.failed_cells = j.value("failed_cells", std::size_t{0});
    return m;
  } catch (const json::exception& e) {
    throw Error(fmt::format("corrupt manifest {}: {}", path.string(), e.what()));
  }
}

SweepManifest run_sweep(const BenchConfig& config, const RunOptions& options) {
  const SweepSettings& sw = config.sweep;
  if (sw.sizes.empty()) throw ConfigFileError("/sweep/sizes", "required and non-empty");
  if (sw.reinforcement_values.empty()) throw ConfigFileError("/sweep/reinforcement_values", "required and non-empty");
  if (sw.replications < 1) throw ConfigFileError("/sweep/replications", "must be >= 1");
  if (config.estimators.methods.empty()) throw ConfigFileError("/estimators/methods", "required and non-empty");

  const std::uint64_t base_seed = options.seed.value_or(sw.base_seed);
  const auto dir = sweep_dir(options.out_dir.value_or(config.output.dir), sw.sweep_id);
  std::filesystem::create_directories(dir);
  std::filesystem::remove(dir / "manifest.json");

  std::vector<CellKey> cells;
  for (std::size_t size : sw.sizes) {
    for (double p : sw.reinforcement_values) {
      for (int r = 0; r < sw.replications; ++r) cells.push_back({size, p, r});
    }
  }

  SweepManifest manifest;
  manifest.sweep_id = sw.sweep_id;
  manifest.base_seed = base_seed;
  manifest.sizes = sw.sizes;
  manifest.reinforcement_values = sw.reinforcement_values;
  manifest.estimators = config.estimators.methods;
  manifest.replications = sw.replications;
  manifest.result_files = {std::string(kCellsFile), std::string(kMetricsFile)};
  if (config.output.fixed_effects) manifest.result_files.emplace_back(kEffectsFile);

  auto cells_out = open_out(dir / kCellsFile);
  auto metrics = open_out(dir / kMetricsFile);
  std::optional<std::ofstream> effects;
  if (config.output.fixed_effects) effects = open_out(dir / kEffectsFile);
  cells_out << kCellsHeader;
  metrics << kMetricsHeader;
  if (effects) *effects << kEffectsHeader;

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned jobs = std::clamp<unsigned>(options.jobs == 0 ? hw : options.jobs, 1u,
                                             static_cast<unsigned>(std::max<std::size_t>(1, cells.size())));
  // Workers may run at most `window` cells ahead of the writer, which bounds
  // buffered output independently of the grid size.
  const std::size_t window = 2 * static_cast<std::size_t>(jobs);

  const CellRunner runner(config, base_seed);
  std::mutex mutex;
  std::condition_variable ready_cv;
  std::condition_variable room_cv;
  std::map<std::size_t, CellOutput> ready;
  std::size_t written = 0;
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      {
        std::unique_lock lock(mutex);
        room_cv.wait(lock, [&] { return i < written + window; });
      }
      CellOutput out;
      try {
        out = runner.run(cells[i]);
      } catch (const std::exception& e) {
        out.failed = true;
        const CellKey& k = cells[i];
        for (const Method m : config.estimators.methods) {
          out.cells += fmt::format("{},{},{},{},{},{},failed,{}\n", run_id(sw.sweep_id, k.size, k.p, k.replication), k.size,
                                   k.p, k.replication, cell_seed(base_seed, k.size, k.p, k.replication), to_string(m),
                                   sanitize(e.what()));
        }
      }
      {
        std::lock_guard lock(mutex);
        ready.emplace(i, std::move(out));
      }
      ready_cv.notify_all();
    }
  };

  std::vector<std::jthread> pool;
  pool.reserve(jobs);
  for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);

  for (std::size_t i = 0; i < cells.size(); ++i) {
    CellOutput out;
    {
      std::unique_lock lock(mutex);
      ready_cv.wait(lock, [&] { return ready.contains(i); });
      out = std::move(ready.at(i));
      ready.erase(i);
    }
    // Metrics before the status rows: a cell listed as ok in cells.csv has all its rows on disk.
    metrics << out.metrics;
    if (effects) *effects << out.effects;
    metrics.flush();
    if (effects) effects->flush();
    cells_out << out.cells;
    cells_out.flush();
    if (out.failed) ++manifest.failed_cells;
    {
      std::lock_guard lock(mutex);
      written = i + 1;
    }
    room_cv.notify_all();
  }
  pool.clear();

  for (auto* s : {&metrics, &cells_out}) {
    s->close();
    if (!*s) throw Error("failed writing sweep results");
  }
  if (effects) {
    effects->close();
    if (!*effects) throw Error("failed writing fixed-effect results");
  }

  manifest.created_at = utc_now();
  json extra;
  extra["dgp"] = to_json(config.dgp);
  write_manifest(dir, manifest, extra);
  return manifest;
}

SweepManifest run_sweep(const std::filesystem::path& config_path, const RunOptions& options) {
  return run_sweep(load_config(config_path), options);
}

}  // namespace yulefx::bench
