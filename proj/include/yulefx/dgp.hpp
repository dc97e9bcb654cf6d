#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "yulefx/kernels.hpp"
#include "yulefx/yulesim.hpp"

namespace yulefx {

enum class EmbeddingKind { identity_scalar, rgb_map, standard_basis };

std::string_view to_string(EmbeddingKind kind) noexcept;
EmbeddingKind parse_embedding_kind(std::string_view name);

/// Fixed injective-almost-everywhere colour map u -> (u, u^2, frac(7u)).
Eigen::Vector3d rgb_map(double u);

/// Embedding of a draw value. standard_basis is category-indexed and has no
/// value-level form, so it is rejected here.
Eigen::VectorXd embed_draw(EmbeddingKind kind, double u);

/// How the true category effect is defined.
enum class EffectMode {
  draws_as_effects,  ///< beta(c) is the category's draw value.
  kernel,            ///< beta(c) = influence * K(z_c; center).
};

std::string_view to_string(EffectMode mode) noexcept;
EffectMode parse_effect_mode(std::string_view name);

struct DgpConfig {
  ReinforcementParams reinforcement;
  std::size_t n = 5000;
  EmbeddingKind embedding = EmbeddingKind::identity_scalar;
  EffectMode mode = EffectMode::draws_as_effects;
  /// Required in kernel mode; its intercept is ignored (the config's intercept applies).
  std::optional<KernelSpec> outcome_kernel;
  double covariate_coef = 1.0;
  double noise_sd = 1.0;
  double intercept = 0.0;

  /// Throws ConfigError on inconsistent settings.
  void validate() const;
};

/// y_i = intercept + beta(category_i) + covariate_coef * v_i + noise_i.
///
/// Categories are contiguous ids 0..C-1 in order of first appearance, so
/// per-category quantities are stored as vectors indexed by id.
struct SyntheticDataset {
  std::vector<double> y;
  std::vector<std::uint32_t> category_id;
  std::vector<double> draw;
  std::vector<double> v;
  /// Row c is the embedding z of category c.
  Eigen::MatrixXd embeddings;
  /// True effect beta(c), indexed by category id. Empty when unknown (e.g. loaded without a config).
  std::vector<double> true_beta;
  DgpConfig config;

  [[nodiscard]] std::size_t size() const noexcept { return y.size(); }
  [[nodiscard]] std::size_t category_count() const noexcept {
    return static_cast<std::size_t>(embeddings.rows());
  }
  [[nodiscard]] Eigen::Index dim() const noexcept { return embeddings.cols(); }
  [[nodiscard]] Eigen::VectorXd z(std::size_t row) const { return embeddings.row(category_id[row]).transpose(); }
  [[nodiscard]] std::vector<std::size_t> category_sizes() const;
};

SyntheticDataset synthesize(const DgpConfig& config);

/// Noise-free outcome mean for a draw: kernel.intercept + effect(kernel, embed(u)).
double fido_joy(double draw, const KernelSpec& kernel, EmbeddingKind embedding);

/// Columns y,category_id,draw,v,z_0..z_{d-1}.
void write_dataset_csv(std::ostream& out, const SyntheticDataset& ds);

/// Reads the dataset CSV. true_beta is rebuilt from `config` when given.
SyntheticDataset read_dataset_csv(std::istream& in, const std::optional<DgpConfig>& config = std::nullopt);

}  // namespace yulefx
