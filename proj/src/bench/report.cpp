#include <algorithm>
#include <functional>
#include <tuple>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>

#include <fmt/format.h>

#include "bench/sweep_io.hpp"
#include "yulefx/bench.hpp"
#include "yulefx/csv.hpp"

namespace yulefx::bench {

namespace {

constexpr int kHistogramBins = 20;

// A CSV loaded as rows of fields with column lookup by name.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  [[nodiscard]] std::size_t col(std::string_view name) const { return csv::column(header, name); }
};

Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError(fmt::format("missing result file {}", path.string()));
  Table t;
  std::string line;
  if (!csv::next_record(in, line)) return t;
  t.header = csv::split(line);
  while (csv::next_record(in, line)) {
    auto fields = csv::split(line);
    if (fields.size() != t.header.size()) {
      throw Error(fmt::format("{}: row has {} fields, header has {}", path.string(), fields.size(), t.header.size()));
    }
    t.rows.push_back(std::move(fields));
  }
  return t;
}

struct Mean {
  double sum = 0.0;
  std::size_t count = 0;
  void add(double x) {
    sum += x;
    ++count;
  }
  [[nodiscard]] double value() const { return sum / static_cast<double>(count); }
};

class Emitter {
 public:
  Emitter(std::filesystem::path dir, const SweepManifest& m) : dir_(std::move(dir)), m_(m) {
    std::filesystem::create_directories(dir_);
  }

  std::ofstream open(std::string_view name, std::string_view source) {
    const auto path = dir_ / std::string(name);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(fmt::format("cannot write {}", path.string()));
    out << fmt::format("# sweep_id={} base_seed={} replications={} source={}\n", m_.sweep_id, m_.base_seed,
                       m_.replications, source);
    written_.push_back(path);
    return out;
  }

  [[nodiscard]] std::vector<std::filesystem::path> written() const { return written_; }

 private:
  std::filesystem::path dir_;
  const SweepManifest& m_;
  std::vector<std::filesystem::path> written_;
};

// Long-format metric rows joined with their cell's replication index.
struct MetricRow {
  std::string method;
  double n = 0.0;
  double p = 0.0;
  long long replication = 0;
  std::string metric;
  std::optional<double> level;
  double value = 0.0;
};

std::vector<MetricRow> load_metrics(const std::filesystem::path& dir) {
  const Table cells = read_table(dir / kCellsFile);
  std::map<std::string, long long, std::less<>> replication;
  const auto c_cell_run = cells.col("run_id");
  const auto c_rep = cells.col("replication");
  for (const auto& r : cells.rows) replication[r[c_cell_run]] = csv::to_int(r[c_rep]);

  const Table t = read_table(dir / kMetricsFile);
  const auto c_run = t.col("run_id");
  const auto c_method = t.col("method");
  const auto c_n = t.col("n");
  const auto c_p = t.col("p");
  const auto c_metric = t.col("metric");
  const auto c_level = t.col("level");
  const auto c_value = t.col("value");
  std::vector<MetricRow> out;
  out.reserve(t.rows.size());
  for (const auto& r : t.rows) {
    const auto it = replication.find(r[c_run]);
    if (it == replication.end()) continue;  // cell did not finish
    MetricRow m;
    m.method = r[c_method];
    m.n = csv::to_double(r[c_n]);
    m.p = csv::to_double(r[c_p]);
    m.replication = it->second;
    m.metric = r[c_metric];
    if (!r[c_level].empty()) m.level = csv::to_double(r[c_level]);
    m.value = csv::to_double(r[c_value]);
    out.push_back(std::move(m));
  }
  return out;
}

// Seed-averaged and per-seed OLS error percentiles grouped by a key (log10 n or p).
void emit_error_curves(Emitter& em, const std::vector<MetricRow>& rows, std::string_view key_name,
                       const std::function<double(const MetricRow&)>& key, std::string_view stem) {
  std::map<std::pair<double, double>, Mean> averaged;
  std::map<std::tuple<double, long long, double>, Mean> per_seed;
  for (const auto& r : rows) {
    if (r.method != "ols_fe" || r.metric != "abs_error" || !r.level) continue;
    averaged[{key(r), *r.level}].add(r.value);
    per_seed[{key(r), r.replication, *r.level}].add(r.value);
  }
  if (averaged.empty()) return;
  auto out = em.open(fmt::format("{}.csv", stem), kMetricsFile);
  out << fmt::format("{},percentile,mean_abs_error\n", key_name);
  for (const auto& [k, mean] : averaged) out << fmt::format("{},{},{}\n", k.first, k.second, mean.value());
  auto seeds = em.open(fmt::format("{}_per_seed.csv", stem), kMetricsFile);
  seeds << fmt::format("{},replication,percentile,abs_error\n", key_name);
  for (const auto& [k, mean] : per_seed) {
    seeds << fmt::format("{},{},{},{}\n", std::get<0>(k), std::get<1>(k), std::get<2>(k), mean.value());
  }
}

void emit_entropy(Emitter& em, const std::vector<MetricRow>& rows) {
  std::map<double, Mean> averaged;
  std::map<std::pair<double, long long>, Mean> per_seed;
  for (const auto& r : rows) {
    if (r.method != "ols_fe" || r.metric != "entropy") continue;
    const double x = std::log10(r.n);
    averaged[x].add(r.value);
    per_seed[{x, r.replication}].add(r.value);
  }
  if (averaged.empty()) return;
  auto out = em.open("entropy_vs_log10n.csv", kMetricsFile);
  out << "log10_n,mean_entropy\n";
  for (const auto& [x, mean] : averaged) out << fmt::format("{},{}\n", x, mean.value());
  auto seeds = em.open("entropy_vs_log10n_per_seed.csv", kMetricsFile);
  seeds << "log10_n,replication,entropy\n";
  for (const auto& [k, mean] : per_seed) seeds << fmt::format("{},{},{}\n", k.first, k.second, mean.value());
}

void emit_effects(Emitter& em, const Table& effects) {
  const auto c_method = effects.col("method");
  const auto c_p = effects.col("p_value");
  const auto c_retained = effects.col("retained");
  const auto c_truth = effects.col("true_beta");
  const auto c_est = effects.col("estimate");

  std::vector<long long> bins(kHistogramBins, 0);
  long long total = 0;
  std::map<std::string, std::vector<const std::vector<std::string>*>, std::less<>> by_method;
  for (const auto& r : effects.rows) {
    if (r[c_method] == "ols_fe" && !r[c_p].empty()) {
      const double p = csv::to_double(r[c_p]);
      const int b = std::clamp(static_cast<int>(p * kHistogramBins), 0, kHistogramBins - 1);
      ++bins[static_cast<std::size_t>(b)];
      ++total;
    }
    if (!r[c_est].empty() && !r[c_truth].empty()) by_method[r[c_method]].push_back(&r);
  }
  if (total > 0) {
    auto out = em.open("pvalue_histogram.csv", kEffectsFile);
    out << "bin_lower,bin_upper,count,fraction\n";
    for (int b = 0; b < kHistogramBins; ++b) {
      const auto count = bins[static_cast<std::size_t>(b)];
      out << fmt::format("{},{},{},{}\n", static_cast<double>(b) / kHistogramBins,
                         static_cast<double>(b + 1) / kHistogramBins, count,
                         static_cast<double>(count) / static_cast<double>(total));
    }
  }
  const auto c_run = effects.col("run_id");
  const auto c_cat = effects.col("category_id");
  for (const auto& [method, rows] : by_method) {
    auto out = em.open(fmt::format("estimates_vs_truth_{}.csv", method), kEffectsFile);
    out << "run_id,category_id,true_beta,estimate,retained\n";
    for (const auto* r : rows) {
      out << fmt::format("{},{},{},{},{}\n", (*r)[c_run], (*r)[c_cat], (*r)[c_truth], (*r)[c_est], (*r)[c_retained]);
    }
  }
}

}  // namespace

std::vector<std::filesystem::path> report(std::string_view sweep_id, const std::filesystem::path& out_dir) {
  const auto dir = sweep_dir(out_dir, sweep_id);
  const auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) {
    throw NotFoundError(fmt::format("unknown sweep '{}': no manifest under {}", sweep_id, dir.string()));
  }
  const SweepManifest m = read_manifest(manifest_path);
  Emitter em(dir / "report", m);
  const std::set<std::string, std::less<>> files(m.result_files.begin(), m.result_files.end());

  if (files.contains(kMetricsFile) && files.contains(kCellsFile)) {
    const auto rows = load_metrics(dir);
    if (m.sizes.size() > 1) {
      emit_error_curves(em, rows, "log10_n", [](const MetricRow& r) { return std::log10(r.n); }, "error_vs_log10n");
      emit_entropy(em, rows);
    }
    if (m.reinforcement_values.size() > 1) {
      emit_error_curves(em, rows, "p", [](const MetricRow& r) { return r.p; }, "error_vs_p");
    }
  }
  if (files.contains(kEffectsFile)) emit_effects(em, read_table(dir / kEffectsFile));
  if (files.contains(kTable1File)) {
    std::ifstream in(dir / kTable1File, std::ios::binary);
    std::string line;
    auto out = em.open(kTable1File, kTable1File);
    while (std::getline(in, line)) out << line << '\n';
  }
  return em.written();
}

}  // namespace yulefx::bench
