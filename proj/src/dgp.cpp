#include "yulefx/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include <fmt/format.h>

#include "yulefx/csv.hpp"
#include "yulefx/errors.hpp"
#include "yulefx/rng.hpp"

namespace yulefx {

std::string_view to_string(EmbeddingKind kind) noexcept {
  switch (kind) {
    case EmbeddingKind::identity_scalar:
      return "identity_scalar";
    case EmbeddingKind::rgb_map:
      return "rgb_map";
    case EmbeddingKind::standard_basis:
      return "standard_basis";
  }
  return "unknown";
}

EmbeddingKind parse_embedding_kind(std::string_view name) {
  if (name == "identity_scalar") return EmbeddingKind::identity_scalar;
  if (name == "rgb_map") return EmbeddingKind::rgb_map;
  if (name == "standard_basis") return EmbeddingKind::standard_basis;
  throw ConfigError(fmt::format("unknown embedding '{}'", name));
}

std::string_view to_string(EffectMode mode) noexcept {
  return mode == EffectMode::draws_as_effects ? "draws_as_effects" : "kernel";
}

EffectMode parse_effect_mode(std::string_view name) {
  if (name == "draws_as_effects") return EffectMode::draws_as_effects;
  if (name == "kernel") return EffectMode::kernel;
  throw ConfigError(fmt::format("unknown effect mode '{}'", name));
}

Eigen::Vector3d rgb_map(double u) {
  if (!(u >= 0.0 && u <= 1.0)) {
    throw ArgumentError(fmt::format("rgb_map: u = {} outside [0, 1]", u));
  }
  const double seven_u = 7.0 * u;
  const double blue = seven_u - std::floor(seven_u);
  return Eigen::Vector3d(u, u * u, blue).cwiseMax(0.0).cwiseMin(1.0);
}

Eigen::VectorXd embed_draw(EmbeddingKind kind, double u) {
  switch (kind) {
    case EmbeddingKind::identity_scalar:
      return Eigen::VectorXd::Constant(1, u);
    case EmbeddingKind::rgb_map:
      return rgb_map(u);
    case EmbeddingKind::standard_basis:
      break;
  }
  throw ArgumentError("standard_basis embeds categories, not draw values");
}

namespace {

Eigen::Index embedding_dim(EmbeddingKind kind) {
  switch (kind) {
    case EmbeddingKind::identity_scalar:
      return 1;
    case EmbeddingKind::rgb_map:
      return 3;
    case EmbeddingKind::standard_basis:
      return -1;  // number of observed categories
  }
  return -1;
}

Eigen::MatrixXd embed_categories(EmbeddingKind kind, const std::vector<double>& values) {
  const auto count = static_cast<Eigen::Index>(values.size());
  if (kind == EmbeddingKind::standard_basis) {
    return Eigen::MatrixXd::Identity(count, count);
  }
  Eigen::MatrixXd out(count, embedding_dim(kind));
  for (Eigen::Index c = 0; c < count; ++c) {
    out.row(c) = embed_draw(kind, values[static_cast<std::size_t>(c)]).transpose();
  }
  return out;
}

std::vector<double> compute_true_beta(const DgpConfig& config, const Eigen::MatrixXd& embeddings,
                                      const std::vector<double>& category_values) {
  if (config.mode == EffectMode::draws_as_effects) {
    return category_values;
  }
  const KernelSpec& kernel = *config.outcome_kernel;
  if (kernel.dim() != embeddings.cols()) {
    throw ConfigError(fmt::format("outcome kernel has d={} but the {} embedding has d={}", kernel.dim(),
                                  to_string(config.embedding), embeddings.cols()));
  }
  std::vector<double> beta(static_cast<std::size_t>(embeddings.rows()));
  for (Eigen::Index c = 0; c < embeddings.rows(); ++c) {
    beta[static_cast<std::size_t>(c)] = effect(kernel, embeddings.row(c).transpose());
  }
  return beta;
}

}  // namespace

void DgpConfig::validate() const {
  try {
    reinforcement.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  if (n < 1) {
    throw ConfigError("n must be at least 1");
  }
  if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) {
    throw ConfigError(fmt::format("noise_sd must be a finite non-negative number, got {}", noise_sd));
  }
  if (!std::isfinite(covariate_coef) || !std::isfinite(intercept)) {
    throw ConfigError("covariate_coef and intercept must be finite");
  }
  if (mode == EffectMode::draws_as_effects) {
    if (embedding != EmbeddingKind::identity_scalar) {
      throw ConfigError("draws_as_effects mode requires the identity_scalar embedding");
    }
    return;
  }
  if (!outcome_kernel) {
    throw ConfigError("kernel mode requires an outcome_kernel");
  }
  try {
    outcome_kernel->validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
  const Eigen::Index d = embedding_dim(embedding);
  if (d > 0 && outcome_kernel->dim() != d) {
    throw ConfigError(fmt::format("outcome kernel has d={} but the {} embedding has d={}", outcome_kernel->dim(),
                                  to_string(embedding), d));
  }
}

std::vector<std::size_t> SyntheticDataset::category_sizes() const {
  std::vector<std::size_t> sizes(category_count(), 0);
  for (auto id : category_id) {
    ++sizes[id];
  }
  return sizes;
}

SyntheticDataset synthesize(const DgpConfig& config) {
  config.validate();
  const DrawSequence seq = generate_draws(config.reinforcement, config.n);

  SyntheticDataset ds;
  ds.config = config;
  ds.embeddings = embed_categories(config.embedding, seq.category_value);
  ds.true_beta = compute_true_beta(config, ds.embeddings, seq.category_value);
  ds.category_id = seq.category_id;
  ds.draw = seq.draws;

  Rng covariate_rng(derive_seed(config.reinforcement.seed, Stream::covariate));
  Rng noise_rng(derive_seed(config.reinforcement.seed, Stream::noise));
  ds.v.resize(config.n);
  ds.y.resize(config.n);
  for (std::size_t i = 0; i < config.n; ++i) {
    ds.v[i] = covariate_rng.normal();
    const double noise = config.noise_sd * noise_rng.normal();
    ds.y[i] = config.intercept + ds.true_beta[ds.category_id[i]] + config.covariate_coef * ds.v[i] + noise;
  }
  return ds;
}

double fido_joy(double draw, const KernelSpec& kernel, EmbeddingKind embedding) {
  if (!(draw >= 0.0 && draw <= 1.0)) {
    throw ArgumentError(fmt::format("fido_joy: draw {} outside [0, 1]", draw));
  }
  return kernel.intercept + effect(kernel, embed_draw(embedding, draw));
}

void write_dataset_csv(std::ostream& out, const SyntheticDataset& ds) {
  out << "y,category_id,draw,v";
  for (Eigen::Index k = 0; k < ds.dim(); ++k) {
    out << ",z_" << k;
  }
  out << '\n';
  std::string row;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    row = fmt::format("{},{},{},{}", ds.y[i], ds.category_id[i], ds.draw[i], ds.v[i]);
    const auto c = static_cast<Eigen::Index>(ds.category_id[i]);
    for (Eigen::Index k = 0; k < ds.dim(); ++k) {
      row += fmt::format(",{}", ds.embeddings(c, k));
    }
    row += '\n';
    out << row;
  }
}

SyntheticDataset read_dataset_csv(std::istream& in, const std::optional<DgpConfig>& config) {
  std::string line;
  if (!csv::next_record(in, line)) {
    throw ArgumentError("dataset CSV is empty");
  }
  const auto header = csv::split(line);
  const std::size_t col_y = csv::column(header, "y");
  const std::size_t col_cat = csv::column(header, "category_id");
  const std::size_t col_draw = csv::column(header, "draw");
  const std::size_t col_v = csv::column(header, "v");
  std::vector<std::size_t> col_z;
  for (std::size_t k = 0;; ++k) {
    const std::string name = fmt::format("z_{}", k);
    if (std::find(header.begin(), header.end(), name) == header.end()) break;
    col_z.push_back(csv::column(header, name));
  }
  if (col_z.empty()) {
    throw ArgumentError("dataset CSV has no embedding columns z_0..");
  }

  SyntheticDataset ds;
  std::vector<std::vector<double>> category_z;
  std::vector<double> category_value;
  while (csv::next_record(in, line)) {
    const auto fields = csv::split(line);
    if (fields.size() != header.size()) {
      throw ArgumentError(fmt::format("row {} has {} fields, expected {}", ds.size() + 1, fields.size(),
                                      header.size()));
    }
    const long long id = csv::to_int(fields[col_cat]);
    if (id < 0) {
      throw ArgumentError("negative category_id");
    }
    const auto cat = static_cast<std::size_t>(id);
    ds.y.push_back(csv::to_double(fields[col_y]));
    ds.category_id.push_back(static_cast<std::uint32_t>(cat));
    ds.draw.push_back(csv::to_double(fields[col_draw]));
    ds.v.push_back(csv::to_double(fields[col_v]));
    if (cat >= category_z.size()) {
      category_z.resize(cat + 1);
      category_value.resize(cat + 1);
    }
    if (category_z[cat].empty()) {
      for (auto k : col_z) category_z[cat].push_back(csv::to_double(fields[k]));
      category_value[cat] = ds.draw.back();
    }
  }
  if (ds.size() == 0) {
    throw ArgumentError("dataset CSV has no rows");
  }

  const auto count = static_cast<Eigen::Index>(category_z.size());
  ds.embeddings.resize(count, static_cast<Eigen::Index>(col_z.size()));
  for (Eigen::Index c = 0; c < count; ++c) {
    const auto& z = category_z[static_cast<std::size_t>(c)];
    if (z.empty()) {
      throw ArgumentError(fmt::format("category ids are not contiguous: {} never appears", c));
    }
    for (std::size_t k = 0; k < z.size(); ++k) ds.embeddings(c, static_cast<Eigen::Index>(k)) = z[k];
  }
  if (config) {
    ds.config = *config;
    ds.true_beta = compute_true_beta(*config, ds.embeddings, category_value);
  } else {
    ds.config.n = ds.size();
  }
  return ds;
}

}  // namespace yulefx
