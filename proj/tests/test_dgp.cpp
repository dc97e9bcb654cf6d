#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "yulefx/dgp.hpp"
#include "yulefx/errors.hpp"

using namespace yulefx;

namespace {

DgpConfig noise_free(double p, std::size_t n, std::uint64_t seed) {
  DgpConfig c;
  c.reinforcement = {p, seed};
  c.n = n;
  c.noise_sd = 0.0;
  return c;
}

KernelSpec spec(KernelFamily family, Eigen::VectorXd center, double influence = 1.0) {
  KernelSpec k;
  k.family = family;
  k.center = std::move(center);
  k.influence = influence;
  return k;
}

}  // namespace

TEST_CASE("rgb map examples") {
  CHECK(rgb_map(0.0).isApprox(Eigen::Vector3d(0.0, 0.0, 0.0)));
  CHECK(rgb_map(1.0).isApprox(Eigen::Vector3d(1.0, 1.0, 0.0)));
  CHECK(rgb_map(0.5).isApprox(Eigen::Vector3d(0.5, 0.25, 0.5)));
  CHECK_THROWS_AS(rgb_map(-0.01), ArgumentError);
  CHECK_THROWS_AS(rgb_map(1.01), ArgumentError);
}

TEST_CASE("draws as effects without noise or covariate reproduces the draws") {
  DgpConfig c = noise_free(0.9, 500, 4);
  c.covariate_coef = 0.0;
  const auto ds = synthesize(c);
  REQUIRE(ds.size() == 500);
  for (std::size_t i = 0; i < ds.size(); ++i) CHECK(ds.y[i] == ds.draw[i]);
}

TEST_CASE("noise-free synthesis is exactly reconstructible") {
  DgpConfig c = noise_free(0.95, 2000, 8);
  c.intercept = 0.7;
  c.covariate_coef = -1.3;
  const auto ds = synthesize(c);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double beta = ds.true_beta[ds.category_id[i]];
    CHECK(ds.y[i] - c.intercept - c.covariate_coef * ds.v[i] == doctest::Approx(beta).epsilon(1e-12));
  }
  for (double b : ds.true_beta) {
    CHECK(b >= 0.0);
    CHECK(b <= 1.0);
  }
  CHECK(ds.true_beta.size() == ds.category_count());
}

TEST_CASE("linear outcome kernel on the rgb map") {
  DgpConfig c = noise_free(0.9, 800, 5);
  c.covariate_coef = 0.0;
  c.embedding = EmbeddingKind::rgb_map;
  c.mode = EffectMode::kernel;
  const Eigen::Vector3d w(0.3, -0.8, 1.7);
  c.outcome_kernel = spec(KernelFamily::linear, w);
  const auto ds = synthesize(c);
  REQUIRE(ds.dim() == 3);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const Eigen::Vector3d z = rgb_map(ds.draw[i]);
    CHECK(ds.z(i).isApprox(z));
    CHECK(ds.y[i] == doctest::Approx(w.dot(z)).epsilon(1e-12));
  }
}

TEST_CASE("fido joy examples") {
  auto linear = spec(KernelFamily::linear, Eigen::Vector3d(1.0, 0.0, 0.0));
  linear.intercept = 2.0;
  CHECK(fido_joy(0.37, linear, EmbeddingKind::rgb_map) == doctest::Approx(2.37));

  const double u = 0.3;
  auto gauss = spec(KernelFamily::gaussian_rbf, rgb_map(u), 0.25);
  gauss.intercept = 3.7;
  CHECK(fido_joy(u, gauss, EmbeddingKind::rgb_map) == doctest::Approx(3.95));

  auto mq = spec(KernelFamily::multiquadric_rbf, Eigen::Vector3d(0.2, 0.9, 0.4), 1.5);
  for (double draw : {0.05, 0.61, 0.93}) {
    const Eigen::Vector3d z(draw, draw * draw, 7.0 * draw - std::floor(7.0 * draw));
    const double d2 = (z - mq.center).squaredNorm();
    CHECK(fido_joy(draw, mq, EmbeddingKind::rgb_map) == doctest::Approx(1.5 * std::sqrt(1.0 + d2)));
  }
  CHECK_THROWS_AS(fido_joy(0.5, mq, EmbeddingKind::identity_scalar), ArgumentError);
}

TEST_CASE("inconsistent configurations are config errors") {
  DgpConfig c;
  c.embedding = EmbeddingKind::rgb_map;
  CHECK_THROWS_AS(synthesize(c), ConfigError);

  DgpConfig k;
  k.mode = EffectMode::kernel;
  CHECK_THROWS_AS(synthesize(k), ConfigError);

  k.outcome_kernel = spec(KernelFamily::gaussian_rbf, Eigen::Vector3d(0.1, 0.2, 0.3));
  CHECK_THROWS_AS(synthesize(k), ConfigError);  // identity embedding is 1-d

  DgpConfig noisy;
  noisy.noise_sd = -1.0;
  CHECK_THROWS_AS(synthesize(noisy), ConfigError);

  DgpConfig empty;
  empty.n = 0;
  CHECK_THROWS_AS(synthesize(empty), ConfigError);
}

TEST_CASE("identical configs give identical datasets") {
  DgpConfig c;
  c.reinforcement = {0.99, 77};
  c.n = 3000;
  const auto a = synthesize(c);
  const auto b = synthesize(c);
  CHECK(a.y == b.y);
  CHECK(a.v == b.v);
  CHECK(a.category_id == b.category_id);

  // Streams are separate: changing the noise level leaves draws and covariate alone.
  c.noise_sd = 3.0;
  const auto d = synthesize(c);
  CHECK(d.draw == a.draw);
  CHECK(d.v == a.v);
}

TEST_CASE("covariate and noise moments") {
  DgpConfig c;
  c.reinforcement = {0.99, 31};
  c.n = 100000;
  c.noise_sd = 2.0;
  const auto ds = synthesize(c);
  const double n = static_cast<double>(ds.size());
  double mv = 0.0, me = 0.0;
  std::vector<double> eps(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    eps[i] = ds.y[i] - ds.true_beta[ds.category_id[i]] - ds.v[i];
    mv += ds.v[i];
    me += eps[i];
  }
  mv /= n;
  me /= n;
  double sv = 0.0, se = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    sv += (ds.v[i] - mv) * (ds.v[i] - mv);
    se += (eps[i] - me) * (eps[i] - me);
  }
  sv = std::sqrt(sv / (n - 1.0));
  se = std::sqrt(se / (n - 1.0));
  CHECK(std::abs(mv) < 4.0 / std::sqrt(n));
  CHECK(std::abs(me) < 4.0 * c.noise_sd / std::sqrt(n));
  CHECK(std::abs(sv - 1.0) < 0.05);
  CHECK(std::abs(se - 2.0) < 0.05 * 2.0);
}

TEST_CASE("standard basis embedding is the dummy representation") {
  DgpConfig c;
  c.reinforcement = {0.9, 3};
  c.n = 300;
  c.embedding = EmbeddingKind::standard_basis;
  c.mode = EffectMode::kernel;
  c.outcome_kernel = spec(KernelFamily::linear, Eigen::VectorXd::Ones(1));
  // The kernel dimension has to match the realized category count, unknown before drawing.
  CHECK_THROWS_AS(synthesize(c), ConfigError);

  c.mode = EffectMode::draws_as_effects;
  CHECK_THROWS_AS(synthesize(c), ConfigError);

  // p = 0 fixes C = n, so a linear kernel on the unit vectors assigns w_c to category c.
  DgpConfig exact = noise_free(0.0, 4, 1);
  exact.covariate_coef = 0.0;
  exact.embedding = EmbeddingKind::standard_basis;
  exact.mode = EffectMode::kernel;
  exact.outcome_kernel = spec(KernelFamily::linear, Eigen::Vector4d(1.0, 2.0, 3.0, 4.0));
  const auto ds = synthesize(exact);
  CHECK(ds.embeddings == Eigen::MatrixXd::Identity(4, 4));
  for (std::size_t i = 0; i < ds.size(); ++i) CHECK(ds.y[i] == doctest::Approx(1.0 + ds.category_id[i]));
}

TEST_CASE("dataset CSV round trip") {
  DgpConfig c;
  c.reinforcement = {0.95, 6};
  c.n = 400;
  c.embedding = EmbeddingKind::rgb_map;
  c.mode = EffectMode::kernel;
  c.outcome_kernel = spec(KernelFamily::gaussian_rbf, Eigen::Vector3d(0.4, 0.5, 0.3), 0.5);
  const auto ds = synthesize(c);
  std::stringstream buffer;
  write_dataset_csv(buffer, ds);
  CHECK(buffer.str().rfind("y,category_id,draw,v,z_0,z_1,z_2\n", 0) == 0);

  const auto back = read_dataset_csv(buffer, c);
  CHECK(back.y == ds.y);
  CHECK(back.v == ds.v);
  CHECK(back.draw == ds.draw);
  CHECK(back.category_id == ds.category_id);
  CHECK(back.embeddings == ds.embeddings);
  CHECK(back.true_beta == ds.true_beta);

  std::stringstream again;
  write_dataset_csv(again, ds);
  const auto unknown = read_dataset_csv(again);
  CHECK(unknown.true_beta.empty());

  std::istringstream empty;
  CHECK_THROWS_AS(read_dataset_csv(empty), ArgumentError);
}
