#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <fmt/format.h>

#include "oracles.hpp"
#include "yulefx/bench.hpp"
#include "yulefx/metrics.hpp"
#include "yulefx/rng.hpp"

using namespace yulefx;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream s(line);
  std::string f;
  while (std::getline(s, f, ',')) out.push_back(f);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Data rows of a CSV, skipping comment lines and the header.
std::vector<std::vector<std::string>> rows(const fs::path& path, std::vector<std::string>* header = nullptr) {
  std::ifstream in(path);
  std::string line;
  std::vector<std::vector<std::string>> out;
  bool seen_header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!seen_header) {
      seen_header = true;
      if (header) *header = fields(line);
      continue;
    }
    out.push_back(fields(line));
  }
  return out;
}

std::string sweep_config(const std::string& id, const std::string& sizes, const std::string& ps, int reps,
                         const std::string& methods = R"(["ols_fe"])") {
  return R"({
  "dgp": {"reinforcement": {"p": 0.99, "seed": 1}, "n": 5000},
  "sweep": {"sweep_id": ")" +
         id + R"(", "base_seed": 2024, "sizes": )" + sizes + R"(, "reinforcement_values": )" + ps +
         R"(, "replications": )" + std::to_string(reps) + R"(},
  "estimators": {"methods": )" +
         methods + R"(, "lasso": {"folds": 5, "grid_size": 10}, "ridge": {"folds": 5, "grid_size": 10},
                 "kernel_model": {"restarts": 2}},
  "output": {"percentiles": [10, 50, 90]}
})";
}

bench::RunOptions to(const fs::path& dir, unsigned jobs = 2) {
  bench::RunOptions opt;
  opt.out_dir = dir;
  opt.jobs = jobs;
  return opt;
}

std::string config_error_where(const std::string& text) {
  try {
    bench::parse_config(text);
  } catch (const bench::ConfigFileError& e) {
    return e.where();
  }
  return "<no error>";
}

int run_cli(const std::string& args, const fs::path& stdout_file = "/dev/null") {
  const std::string cmd = std::string(YULEFX_CLI) + " " + args + " > " + stdout_file.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config parsing fills every section") {
  const auto cfg = bench::parse_config(R"({
    "dgp": {"reinforcement": {"p": 0.5, "seed": 9}, "n": 1000, "noise_sd": 0.5, "covariate_coef": 2,
            "intercept": 0.1},
    "sweep": {"sweep_id": "fig3", "base_seed": 5, "sizes": [5000],
              "reinforcement_values": {"from": 0.01, "to": 0.99, "step": 0.01}, "replications": 3},
    "estimators": {"methods": ["ols_fe", "lasso"], "lasso": {"folds": 4, "lambda_grid": [2, 1, 0.5]},
                   "aggregate": {"min_count": 7}, "kernel_model": {"family": "gaussian_rbf", "restarts": 3}},
    "output": {"dir": "results", "entropy": false, "known_sigma2": 1, "pvalue_thresholds": [0.05]}
  })");
  CHECK(cfg.dgp.reinforcement.p == 0.5);
  CHECK(cfg.dgp.reinforcement.seed == 9);
  CHECK(cfg.dgp.n == 1000);
  CHECK(cfg.dgp.noise_sd == 0.5);
  CHECK(cfg.sweep.sweep_id == "fig3");
  REQUIRE(cfg.sweep.reinforcement_values.size() == 99);
  CHECK(cfg.sweep.reinforcement_values.front() == 0.01);
  CHECK(cfg.sweep.reinforcement_values[49] == 0.5);
  CHECK(cfg.sweep.reinforcement_values.back() == 0.99);
  CHECK(cfg.sweep.replications == 3);
  CHECK(cfg.estimators.methods == std::vector<Method>{Method::ols_fe, Method::lasso});
  CHECK(cfg.estimators.lasso.folds == 4);
  CHECK(cfg.estimators.lasso.lambda_grid == std::vector<double>{2, 1, 0.5});
  CHECK(cfg.estimators.aggregate_min_count == 7);
  CHECK(cfg.estimators.kernel_family == KernelFamily::gaussian_rbf);
  CHECK(cfg.estimators.kernel_optimizer.restarts == 3);
  CHECK(cfg.output.dir == fs::path("results"));
  CHECK_FALSE(cfg.output.entropy);
  CHECK(*cfg.output.known_sigma2 == 1.0);
}

TEST_CASE("log-spaced size grids") {
  const auto sizes = bench::log_spaced_sizes(2.5, 5.0, 10);
  REQUIRE(sizes.size() == 10);
  CHECK(sizes.front() == 316);
  CHECK(sizes.back() == 100000);
  CHECK(std::is_sorted(sizes.begin(), sizes.end()));
  const auto cfg = bench::parse_config(R"({"sweep": {"sizes": {"log10_from": 2.5, "log10_to": 5, "count": 10}}})");
  CHECK(cfg.sweep.sizes == sizes);
}

TEST_CASE("config errors name their location") {
  CHECK(config_error_where(R"({"dgp": {"nosie_sd": 1}})") == "/dgp/nosie_sd");
  CHECK(config_error_where(R"({"dgp": {"n": -5}})") == "/dgp/n");
  CHECK(config_error_where(R"({"dgp": {"embedding": "hsv"}})") == "/dgp/embedding");
  CHECK(config_error_where(R"({"sweep": {"replications": "many"}})") == "/sweep/replications");
  CHECK(config_error_where(R"({"estimators": {"methods": ["ols_fe", "probit"]}})").rfind("/estimators/methods", 0) == 0);
  CHECK(config_error_where(R"({"extra": {}})") == "/extra");
  CHECK(config_error_where(R"({"dgp": {"reinforcement": {"p": 1.5}}})").rfind("/dgp", 0) == 0);
  try {
    bench::parse_config("{\n  \"dgp\": {,}\n}");
    FAIL("expected a syntax error");
  } catch (const bench::ConfigFileError& e) {
    CHECK(std::string(e.what()).find("line 2, column") != std::string::npos);
  }
  CHECK_THROWS_AS(bench::load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("dgp metadata round trips through JSON") {
  DgpConfig d;
  d.reinforcement = {0.7, 123456789012345ULL};
  d.n = 777;
  d.embedding = EmbeddingKind::rgb_map;
  d.mode = EffectMode::kernel;
  KernelSpec k;
  k.family = KernelFamily::multiquadric_rbf;
  k.center = Eigen::Vector3d(0.1, 0.2, 0.3);
  k.influence = -0.4;
  d.outcome_kernel = k;
  d.noise_sd = 0.25;
  const auto dir = oracle::scratch_dir("dgp_json");
  spit(dir / "d.json", bench::dgp_json_text(d));
  const auto back = bench::load_dgp_json(dir / "d.json");
  CHECK(back.reinforcement.seed == d.reinforcement.seed);
  CHECK(back.reinforcement.p == d.reinforcement.p);
  CHECK(back.n == 777);
  CHECK(back.embedding == EmbeddingKind::rgb_map);
  REQUIRE(back.outcome_kernel.has_value());
  CHECK(back.outcome_kernel->center == k.center);
  CHECK(back.outcome_kernel->influence == k.influence);
  CHECK(back.noise_sd == 0.25);
  fs::remove_all(dir);
}

TEST_CASE("cell seeds and run ids are pure functions of the cell key") {
  CHECK(bench::cell_seed(1, 316, 0.99, 0) == bench::cell_seed(1, 316, 0.99, 0));
  CHECK(bench::cell_seed(1, 316, 0.99, 0) != bench::cell_seed(1, 316, 0.99, 1));
  CHECK(bench::cell_seed(1, 316, 0.99, 0) != bench::cell_seed(1, 317, 0.99, 0));
  CHECK(bench::cell_seed(1, 316, 0.99, 0) != bench::cell_seed(1, 316, 0.98, 0));
  CHECK(bench::cell_seed(1, 316, 0.99, 0) != bench::cell_seed(2, 316, 0.99, 0));
  CHECK(bench::run_id("fig1", 316, 0.99, 4) == "fig1-n316-p0.99-r4");
}

TEST_CASE("minimal sweep writes one cell and a complete manifest") {
  const auto dir = oracle::scratch_dir("minimal");
  const auto m = bench::run_sweep(bench::parse_config(sweep_config("mini", "[316]", "[0.99]", 1)), to(dir));
  const auto sd = bench::sweep_dir(dir, "mini");
  CHECK(m.failed_cells == 0);
  CHECK(m.replications == 1);
  REQUIRE(fs::exists(sd / "manifest.json"));
  for (const auto& f : m.result_files) CHECK(fs::exists(sd / f));

  const auto back = bench::read_manifest(sd / "manifest.json");
  CHECK(back.sweep_id == "mini");
  CHECK(back.base_seed == 2024);
  CHECK(back.sizes == std::vector<std::size_t>{316});
  CHECK(back.estimators == std::vector<Method>{Method::ols_fe});
  CHECK(back.result_files == m.result_files);
  CHECK_FALSE(back.created_at.empty());

  std::vector<std::string> header;
  const auto cells = rows(sd / "cells.csv", &header);
  CHECK(header == std::vector<std::string>{"run_id", "n", "p", "replication", "seed", "method", "status", "message"});
  REQUIRE(cells.size() == 1);
  CHECK(cells[0][0] == "mini-n316-p0.99-r0");
  CHECK(cells[0][6] == "ok");

  const auto metrics = rows(sd / "metrics.csv", &header);
  CHECK(header == std::vector<std::string>{"run_id", "method", "n", "p", "metric", "level", "value"});
  int abs_error_rows = 0;
  for (const auto& r : metrics) {
    CHECK(r[0] == "mini-n316-p0.99-r0");
    CHECK(r[1] == "ols_fe");
    abs_error_rows += r[4] == "abs_error" ? 1 : 0;
  }
  CHECK(abs_error_rows == 3);
  fs::remove_all(dir);
}

TEST_CASE("sweep output does not depend on the worker count and cells reproduce in isolation") {
  const auto dir = oracle::scratch_dir("determinism");
  const auto text = sweep_config("det", "[316, 1000]", "[0.5, 0.99]", 3, R"(["ols_fe", "lasso", "aggregate"])");
  const auto cfg = bench::parse_config(text);
  bench::run_sweep(cfg, to(dir / "one", 1));
  bench::run_sweep(cfg, to(dir / "four", 4));
  for (const char* f : {"cells.csv", "metrics.csv", "fixed_effects.csv"}) {
    CHECK(slurp(dir / "one" / "det" / f) == slurp(dir / "four" / "det" / f));
  }

  // Re-run a single cell by hand from its key.
  const std::size_t size = 1000;
  const double p = 0.99;
  const int rep = 2;
  DgpConfig d = cfg.dgp;
  d.n = size;
  d.reinforcement = {p, bench::cell_seed(cfg.sweep.base_seed, size, p, rep)};
  const auto ds = synthesize(d);
  const auto fit = fit_ols_fe(ds);
  const std::vector<double> levels{50.0};
  const double median = abs_error_percentiles(fit.fixed_effects, ds.true_beta, levels).percentiles.at(50.0);
  const auto id = bench::run_id("det", size, p, rep);
  bool found = false;
  for (const auto& r : rows(dir / "one" / "det" / "metrics.csv")) {
    if (r[0] == id && r[1] == "ols_fe" && r[4] == "abs_error" && std::stod(r[5]) == 50.0) {
      CHECK(std::stod(r[6]) == median);
      found = true;
    }
  }
  CHECK(found);
  fs::remove_all(dir);
}

TEST_CASE("a failing estimator marks its cell failed and the sweep continues") {
  const auto dir = oracle::scratch_dir("failing");
  // p = 0 makes every row its own category, so OLS has no residual degrees of freedom.
  const auto m = bench::run_sweep(bench::parse_config(sweep_config("fail", "[50]", "[0.0, 0.9]", 1)), to(dir));
  CHECK(m.failed_cells == 1);
  const auto sd = bench::sweep_dir(dir, "fail");
  CHECK(fs::exists(sd / "manifest.json"));
  const auto cells = rows(sd / "cells.csv");
  REQUIRE(cells.size() == 2);
  CHECK(cells[0][6] == "failed");
  CHECK_FALSE(cells[0][7].empty());
  CHECK(cells[1][6] == "ok");
  fs::remove_all(dir);
}

TEST_CASE("report aggregates the reinforcement sweep like a direct group-by") {
  const auto dir = oracle::scratch_dir("report");
  bench::run_sweep(bench::parse_config(sweep_config("fig3", "[800]", "[0.1, 0.5, 0.9]", 4)), to(dir));
  const auto files = bench::report("fig3", dir);
  const auto rd = bench::sweep_dir(dir, "fig3") / "report";
  CHECK(fs::exists(rd / "error_vs_p.csv"));
  CHECK(fs::exists(rd / "error_vs_p_per_seed.csv"));
  CHECK(fs::exists(rd / "pvalue_histogram.csv"));
  CHECK(fs::exists(rd / "estimates_vs_truth_ols_fe.csv"));
  CHECK_FALSE(fs::exists(rd / "error_vs_log10n.csv"));  // a single size has no size curve
  for (const auto& f : files) {
    const auto text = slurp(f);
    CHECK(text.rfind("# sweep_id=fig3 base_seed=2024 replications=4", 0) == 0);
  }

  std::map<std::pair<double, double>, std::pair<double, int>> groups;
  for (const auto& r : rows(bench::sweep_dir(dir, "fig3") / "metrics.csv")) {
    if (r[1] != "ols_fe" || r[4] != "abs_error") continue;
    auto& g = groups[{std::stod(r[3]), std::stod(r[5])}];
    g.first += std::stod(r[6]);
    g.second += 1;
  }
  std::vector<std::string> header;
  const auto curve = rows(rd / "error_vs_p.csv", &header);
  CHECK(header == std::vector<std::string>{"p", "percentile", "mean_abs_error"});
  REQUIRE(curve.size() == groups.size());
  for (const auto& r : curve) {
    const auto& g = groups.at({std::stod(r[0]), std::stod(r[1])});
    CHECK(g.second == 4);
    CHECK(std::stod(r[2]) == doctest::Approx(g.first / g.second).epsilon(1e-14));
  }

  double total = 0.0;
  for (const auto& r : rows(rd / "pvalue_histogram.csv")) total += std::stod(r[3]);
  CHECK(total == doctest::Approx(1.0));

  CHECK_THROWS_AS(bench::report("missing", dir), NotFoundError);
  fs::remove_all(dir);
}

TEST_CASE("report over sizes emits the error and entropy curves") {
  const auto dir = oracle::scratch_dir("report_n");
  bench::run_sweep(bench::parse_config(sweep_config("fig1", "[316, 1000, 3162]", "[0.99]", 2)), to(dir));
  bench::report("fig1", dir);
  const auto rd = bench::sweep_dir(dir, "fig1") / "report";
  std::vector<std::string> header;
  const auto curve = rows(rd / "error_vs_log10n.csv", &header);
  CHECK(header == std::vector<std::string>{"log10_n", "percentile", "mean_abs_error"});
  CHECK(curve.size() == 3 * 3);
  CHECK(rows(rd / "error_vs_log10n_per_seed.csv").size() == 3 * 2 * 3);
  CHECK(rows(rd / "entropy_vs_log10n.csv").size() == 3);
  CHECK(rows(rd / "entropy_vs_log10n_per_seed.csv").size() == 3 * 2);
  fs::remove_all(dir);
}

TEST_CASE("table 1 run") {
  const auto dir = oracle::scratch_dir("table1");
  auto cfg = bench::parse_config(R"({"sweep": {"sweep_id": "t1"}})");
  cfg.dgp.noise_sd = 0.0;
  const auto exact = bench::run_table1(cfg, to(dir));
  CHECK(exact.kernel_fit.r_squared == doctest::Approx(1.0).epsilon(1e-9));

  cfg.dgp.noise_sd = 1.0;
  const auto result = bench::run_table1(cfg, to(dir));
  for (const char* label : {"Yule-Simon Draws", "Continuous Covariate", "Observations", "R2", "Adjusted R2",
                            "Residual Std. Error", "F Statistic"}) {
    CHECK(result.table.find(label) != std::string::npos);
  }
  CHECK(result.table.find("5,000") != std::string::npos);
  const auto sd = bench::sweep_dir(dir, "t1");
  CHECK(slurp(sd / "table1.txt") == result.table);
  CHECK(fs::exists(sd / "manifest.json"));
  const auto files = bench::report("t1", dir);
  REQUIRE(files.size() == 1);
  CHECK(slurp(files[0]).find("Yule-Simon Draws") != std::string::npos);

  cfg.estimators.kernel_family = KernelFamily::gaussian_rbf;
  CHECK_THROWS_AS(bench::run_table1(cfg, to(dir)), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("table 1 refuses to overwrite a sweep with the same id") {
  const auto dir = oracle::scratch_dir("table1_clash");
  auto cfg = bench::parse_config(
      R"({"sweep": {"sweep_id": "shared", "sizes": [200], "reinforcement_values": [0.9], "replications": 1}})");
  bench::run_sweep(cfg, to(dir));
  const auto manifest = slurp(bench::sweep_dir(dir, "shared") / "manifest.json");
  CHECK_THROWS_AS(bench::run_table1(cfg, to(dir)), ConfigError);
  CHECK(slurp(bench::sweep_dir(dir, "shared") / "manifest.json") == manifest);
  fs::remove_all(dir);
}

TEST_CASE("command line exit codes") {
  const auto dir = oracle::scratch_dir("cli");
  const auto q = [](const fs::path& p) { return "'" + p.string() + "'"; };
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("") == 2);
  CHECK(run_cli("fit --method ols_fe") == 2);

  spit(dir / "typo.json", R"({"dgp": {"nosie_sd": 1}})");
  CHECK(run_cli("sweep --config " + q(dir / "typo.json"), dir / "typo.txt") == 2);
  CHECK(slurp(dir / "typo.txt").find("/dgp/nosie_sd") != std::string::npos);
  spit(dir / "broken.json", "{\n  \"dgp\": {,}\n}");
  CHECK(run_cli("--config " + q(dir / "broken.json") + " sweep", dir / "broken.txt") == 2);
  CHECK(slurp(dir / "broken.txt").find("line 2, column") != std::string::npos);
  CHECK(run_cli("sweep") == 2);

  CHECK(run_cli("report --sweep-id nothing --out " + q(dir)) == 3);
  CHECK(run_cli("fit --data " + q(dir / "absent.csv") + " --method ols_fe") == 3);

  spit(dir / "sim.json", R"({"dgp": {"reinforcement": {"p": 0.95, "seed": 3}, "n": 1500}})");
  CHECK(run_cli("simulate --config " + q(dir / "sim.json") + " --out " + q(dir / "data")) == 0);
  CHECK(fs::exists(dir / "data" / "dataset.csv"));
  CHECK(fs::exists(dir / "data" / "draws.csv"));
  CHECK(fs::exists(dir / "data" / "dataset.json"));
  for (const char* method : {"ols_fe", "lasso", "ridge", "aggregate", "kernel_model"}) {
    CHECK(run_cli(std::string("fit --data ") + q(dir / "data" / "dataset.csv") + " --method " + method + " --out " +
                  q(dir / "fit")) == 0);
    CHECK(slurp(dir / "fit" / "coefficients.csv").find(std::string("\n") + method + ",") != std::string::npos);
  }

  spit(dir / "sweep.json", sweep_config("cli", "[316]", "[0.99]", 2));
  CHECK(run_cli("sweep --config " + q(dir / "sweep.json") + " --out " + q(dir / "out") + " --jobs 2") == 0);
  CHECK(fs::exists(dir / "out" / "cli" / "manifest.json"));
  CHECK(run_cli("report --sweep-id cli --out " + q(dir / "out")) == 0);
  CHECK(fs::exists(dir / "out" / "cli" / "report" / "pvalue_histogram.csv"));

  std::string points = "x,y,z\n";
  Rng rng(3);
  for (int i = 0; i < 20; ++i) points += fmt::format("{},{},{}\n", rng.uniform(), rng.uniform(), rng.uniform());
  spit(dir / "points.csv", points);
  CHECK(run_cli("psd-check --points " + q(dir / "points.csv") + " --kernel gaussian_rbf", dir / "psd.txt") == 0);
  CHECK(slurp(dir / "psd.txt").find("psd=true") != std::string::npos);
  CHECK(run_cli("psd-check --points " + q(dir / "points.csv") + " --kernel neg_euclidean", dir / "psd.txt") == 0);
  CHECK(slurp(dir / "psd.txt").find("psd=false") != std::string::npos);
  fs::remove_all(dir);
}
