#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "bench/json_io.hpp"
#include "yulefx/bench.hpp"

namespace yulefx::bench {

using nlohmann::json;

namespace {

std::string describe(const json& j) { return j.type_name(); }

// Walks one JSON object, tracking which keys were consumed so leftovers can be
// reported as typos.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigFileError(where(), fmt::format("expected an object, got {}", describe(j_)));
  }

  [[nodiscard]] std::string where() const { return path_.empty() ? "/" : path_; }
  [[nodiscard]] std::string at(std::string_view key) const { return fmt::format("{}/{}", path_, key); }

  const json* find(std::string_view key) {
    seen_.emplace(key);
    const auto it = j_.find(std::string(key));
    if (it == j_.end() || it->is_null()) return nullptr;
    return &*it;
  }

  std::optional<double> number(std::string_view key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_number()) throw ConfigFileError(at(key), fmt::format("expected a number, got {}", describe(*v)));
    const double x = v->get<double>();
    if (!std::isfinite(x)) throw ConfigFileError(at(key), "must be finite");
    return x;
  }

  std::optional<std::uint64_t> unsigned_int(std::string_view key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_number_unsigned()) {
      throw ConfigFileError(at(key), fmt::format("expected a non-negative integer, got {}", v->dump()));
    }
    return v->get<std::uint64_t>();
  }

  std::optional<bool> boolean(std::string_view key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_boolean()) throw ConfigFileError(at(key), fmt::format("expected true or false, got {}", describe(*v)));
    return v->get<bool>();
  }

  std::optional<std::string> string(std::string_view key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_string()) throw ConfigFileError(at(key), fmt::format("expected a string, got {}", describe(*v)));
    return v->get<std::string>();
  }

  std::optional<std::vector<double>> numbers(std::string_view key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_array()) throw ConfigFileError(at(key), fmt::format("expected an array, got {}", describe(*v)));
    std::vector<double> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
      const json& e = (*v)[i];
      if (!e.is_number()) throw ConfigFileError(fmt::format("{}/{}", at(key), i), "expected a number");
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::optional<Section> section(std::string_view key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    return Section(*v, at(key));
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) throw ConfigFileError(at(key), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string, std::less<>> seen_;
};

template <class Fn>
auto with_path(const std::string& path, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigFileError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigFileError(path, e.what());
  }
}

KernelSpec parse_kernel(Section s) {
  KernelSpec k;
  if (auto v = s.string("family")) k.family = with_path(s.at("family"), [&] { return parse_kernel_family(*v); });
  if (auto v = s.numbers("center")) k.center = Eigen::Map<const Eigen::VectorXd>(v->data(), std::ssize(*v));
  if (auto v = s.number("influence")) k.influence = *v;
  if (auto v = s.number("intercept")) k.intercept = *v;
  s.finish();
  with_path(s.where(), [&] {
    k.validate();
    return 0;
  });
  return k;
}

void parse_dgp(Section s, DgpConfig& d) {
  if (auto r = s.section("reinforcement")) {
    if (auto v = r->number("p")) d.reinforcement.p = *v;
    if (auto v = r->unsigned_int("seed")) d.reinforcement.seed = *v;
    r->finish();
  }
  if (auto v = s.unsigned_int("n")) d.n = *v;
  if (auto v = s.string("embedding")) d.embedding = with_path(s.at("embedding"), [&] { return parse_embedding_kind(*v); });
  if (auto v = s.string("mode")) d.mode = with_path(s.at("mode"), [&] { return parse_effect_mode(*v); });
  if (auto k = s.section("outcome_kernel")) d.outcome_kernel = parse_kernel(*k);
  if (auto v = s.number("covariate_coef")) d.covariate_coef = *v;
  if (auto v = s.number("noise_sd")) d.noise_sd = *v;
  if (auto v = s.number("intercept")) d.intercept = *v;
  s.finish();
  with_path(s.where(), [&] {
    d.validate();
    return 0;
  });
}

std::vector<std::size_t> parse_sizes(Section& s) {
  const json* v = s.find("sizes");
  if (!v) return {};
  const std::string path = s.at("sizes");
  if (v->is_array()) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
      const json& e = (*v)[i];
      if (!e.is_number_unsigned() || e.get<std::uint64_t>() == 0) {
        throw ConfigFileError(fmt::format("{}/{}", path, i), "expected a positive integer");
      }
      out.push_back(e.get<std::size_t>());
    }
    return out;
  }
  Section g(*v, path);
  const auto from = g.number("log10_from");
  const auto to = g.number("log10_to");
  const auto count = g.unsigned_int("count");
  g.finish();
  if (!from || !to || !count) throw ConfigFileError(path, "log-spaced sizes need log10_from, log10_to and count");
  return with_path(path, [&] { return log_spaced_sizes(*from, *to, *count); });
}

std::vector<double> parse_reinforcement_values(Section& s) {
  const json* v = s.find("reinforcement_values");
  if (!v) return {};
  const std::string path = s.at("reinforcement_values");
  std::vector<double> out;
  if (v->is_array()) {
    out = *s.numbers("reinforcement_values");
  } else {
    Section g(*v, path);
    const auto from = g.number("from");
    const auto to = g.number("to");
    const auto step = g.number("step");
    g.finish();
    if (!from || !to || !step) throw ConfigFileError(path, "a p range needs from, to and step");
    if (!(*step > 0.0) || *to < *from) throw ConfigFileError(path, "need step > 0 and to >= from");
    // Integer stepping avoids accumulating round-off; values are rounded to 12 places
    // so 0.01 steps print as 0.07 rather than 0.07000000000000001.
    const auto count = static_cast<std::size_t>(std::floor((*to - *from) / *step + 1e-9)) + 1;
    for (std::size_t i = 0; i < count; ++i) {
      out.push_back(std::round((*from + static_cast<double>(i) * *step) * 1e12) / 1e12);
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(out[i] >= 0.0 && out[i] <= 1.0)) throw ConfigFileError(fmt::format("{}/{}", path, i), "must lie in [0, 1]");
  }
  return out;
}

void parse_sweep(Section s, SweepSettings& w) {
  if (auto v = s.string("sweep_id")) {
    if (v->empty() || v->find_first_of("/\\") != std::string::npos || *v == "." || *v == "..") {
      throw ConfigFileError(s.at("sweep_id"), "must be a non-empty plain name");
    }
    w.sweep_id = *v;
  }
  if (auto v = s.unsigned_int("base_seed")) w.base_seed = *v;
  w.sizes = parse_sizes(s);
  w.reinforcement_values = parse_reinforcement_values(s);
  if (auto v = s.unsigned_int("replications")) {
    if (*v == 0 || *v > 1'000'000) throw ConfigFileError(s.at("replications"), "must be in [1, 1000000]");
    w.replications = static_cast<int>(*v);
  }
  s.finish();
}

void parse_penalized(Section s, PenalizedSettings& p) {
  if (auto v = s.unsigned_int("folds")) {
    if (*v < 2) throw ConfigFileError(s.at("folds"), "need at least 2 folds");
    p.folds = static_cast<int>(*v);
  }
  if (auto v = s.numbers("lambda_grid")) {
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!((*v)[i] >= 0.0)) throw ConfigFileError(fmt::format("{}/{}", s.at("lambda_grid"), i), "must be >= 0");
    }
    p.lambda_grid = *v;
  }
  if (auto v = s.unsigned_int("grid_size")) {
    if (*v == 0) throw ConfigFileError(s.at("grid_size"), "must be positive");
    p.grid_size = *v;
  }
  if (auto v = s.boolean("intercept")) p.design.intercept = *v;
  if (auto v = s.boolean("covariate")) p.design.covariate = *v;
  s.finish();
}

void parse_estimators(Section s, EstimatorSettings& e) {
  if (const json* v = s.find("methods")) {
    if (!v->is_array() || v->empty()) throw ConfigFileError(s.at("methods"), "expected a non-empty array of method names");
    e.methods.clear();
    for (std::size_t i = 0; i < v->size(); ++i) {
      const std::string path = fmt::format("{}/{}", s.at("methods"), i);
      if (!(*v)[i].is_string()) throw ConfigFileError(path, "expected a method name");
      const Method m = with_path(path, [&] { return parse_method((*v)[i].get<std::string>()); });
      if (std::find(e.methods.begin(), e.methods.end(), m) != e.methods.end()) {
        throw ConfigFileError(path, "duplicate method");
      }
      e.methods.push_back(m);
    }
  }
  if (auto v = s.section("lasso")) parse_penalized(*v, e.lasso);
  if (auto v = s.section("ridge")) parse_penalized(*v, e.ridge);
  if (auto a = s.section("aggregate")) {
    if (auto v = a->unsigned_int("min_count")) {
      if (*v == 0) throw ConfigFileError(a->at("min_count"), "must be positive");
      e.aggregate_min_count = *v;
    }
    a->finish();
  }
  if (auto k = s.section("kernel_model")) {
    if (auto v = k->string("family")) {
      e.kernel_family = with_path(k->at("family"), [&] { return parse_kernel_family(*v); });
    }
    OptimizerConfig& o = e.kernel_optimizer;
    if (auto v = k->unsigned_int("restarts")) {
      if (*v == 0 || *v > 10'000) throw ConfigFileError(k->at("restarts"), "must be in [1, 10000]");
      o.restarts = static_cast<int>(*v);
    }
    if (auto v = k->unsigned_int("max_iterations")) {
      if (*v == 0 || *v > 1'000'000) throw ConfigFileError(k->at("max_iterations"), "must be in [1, 1000000]");
      o.max_iterations = static_cast<int>(*v);
    }
    if (auto v = k->number("gradient_tolerance")) o.gradient_tolerance = *v;
    if (auto v = k->number("relative_tolerance")) o.relative_tolerance = *v;
    if (auto v = k->boolean("intercept")) o.intercept = *v;
    if (auto v = k->unsigned_int("seed")) o.seed = *v;
    k->finish();
  }
  s.finish();
}

void parse_output(Section s, OutputSettings& o) {
  if (auto v = s.string("dir")) o.dir = *v;
  if (auto v = s.boolean("entropy")) o.entropy = *v;
  if (auto v = s.number("known_sigma2")) {
    if (!(*v > 0.0)) throw ConfigFileError(s.at("known_sigma2"), "must be positive");
    o.known_sigma2 = *v;
  }
  if (auto v = s.numbers("percentiles")) {
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!((*v)[i] >= 0.0 && (*v)[i] <= 100.0)) {
        throw ConfigFileError(fmt::format("{}/{}", s.at("percentiles"), i), "must lie in [0, 100]");
      }
    }
    o.percentiles = *v;
  }
  if (auto v = s.numbers("pvalue_thresholds")) o.pvalue_thresholds = *v;
  if (auto v = s.boolean("fixed_effects")) o.fixed_effects = *v;
  s.finish();
}

std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i + 1 < byte; ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

std::vector<std::size_t> log_spaced_sizes(double log10_from, double log10_to, std::size_t count) {
  if (count == 0 || !(log10_to >= log10_from) || !(log10_from >= 0.0) || !(log10_to <= 12.0)) {
    throw ArgumentError("log_spaced_sizes: need count >= 1 and 0 <= from <= to <= 12");
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < count; ++i) {
    const double t = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
    out.push_back(static_cast<std::size_t>(std::llround(std::pow(10.0, log10_from + t * (log10_to - log10_from)))));
  }
  return out;
}

BenchConfig parse_config(std::string_view text) {
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_column(text, e.byte);
    throw ConfigFileError(fmt::format("line {}, column {}", line, col), "malformed JSON");
  }
  BenchConfig cfg;
  Section s(root, "");
  if (auto v = s.section("dgp")) parse_dgp(*v, cfg.dgp);
  if (auto v = s.section("sweep")) parse_sweep(*v, cfg.sweep);
  if (auto v = s.section("estimators")) parse_estimators(*v, cfg.estimators);
  if (auto v = s.section("output")) parse_output(*v, cfg.output);
  s.finish();
  return cfg;
}

BenchConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigFileError(path.string(), "cannot read config file");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str());
  } catch (const ConfigFileError& e) {
    throw ConfigFileError(fmt::format("{}: {}", path.string(), e.where()), e.message());
  }
}

json to_json(const DgpConfig& d) {
  json j;
  j["reinforcement"] = {{"p", d.reinforcement.p}, {"seed", d.reinforcement.seed}};
  j["n"] = d.n;
  j["embedding"] = std::string(to_string(d.embedding));
  j["mode"] = std::string(to_string(d.mode));
  if (d.outcome_kernel) {
    const KernelSpec& k = *d.outcome_kernel;
    j["outcome_kernel"] = {{"family", std::string(to_string(k.family))},
                           {"center", std::vector<double>(k.center.data(), k.center.data() + k.center.size())},
                           {"influence", k.influence},
                           {"intercept", k.intercept}};
  }
  j["covariate_coef"] = d.covariate_coef;
  j["noise_sd"] = d.noise_sd;
  j["intercept"] = d.intercept;
  return j;
}

DgpConfig dgp_from_json(const json& j) {
  DgpConfig d;
  parse_dgp(Section(j, "/dgp"), d);
  return d;
}

std::string dgp_json_text(const DgpConfig& config) {
  json j;
  j["dgp"] = to_json(config);
  return j.dump(2);
}

DgpConfig load_dgp_json(const std::filesystem::path& path) { return load_config(path).dgp; }

}  // namespace yulefx::bench
