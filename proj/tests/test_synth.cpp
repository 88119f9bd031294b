#include <doctest.h>

#include <random>

#include "care/moments.hpp"
#include "care/synth.hpp"

using namespace care;

TEST_CASE("substream seeds separate experiments, seeds, and purposes") {
  const auto a = substream_seed("exp", 0, "data");
  CHECK(a == substream_seed("exp", 0, "data"));
  CHECK(a != substream_seed("exp", 1, "data"));
  CHECK(a != substream_seed("exp", 0, "table"));
  CHECK(a != substream_seed("other", 0, "data"));
}

TEST_CASE("regime A generators are bit-reproducible") {
  RegimeAConfig cfg;
  cfg.n = 500;
  RegimeAData d1 = gen_regime_a(cfg);
  RegimeAData d2 = gen_regime_a(cfg);
  CHECK(d1.scores.values == d2.scores.values);
  CHECK(d1.q == d2.q);
  CHECK(d1.mean_table == d2.mean_table);
}

TEST_CASE("regime A at g=0 removes the confounder from the means") {
  RegimeAConfig cfg;
  cfg.n = 10;
  cfg.g = 0.0;
  RegimeAData d = gen_regime_a(cfg);
  // States are indexed 2c+q; both C rows must coincide per quality state.
  CHECK((d.mean_table.col(0) - d.mean_table.col(2)).cwiseAbs().maxCoeff() <
        1e-12);
  CHECK((d.mean_table.col(1) - d.mean_table.col(3)).cwiseAbs().maxCoeff() <
        1e-12);
}

TEST_CASE("regime A interpolation hits the full table at g=1") {
  RegimeAConfig cfg;
  cfg.n = 10;
  cfg.g = 1.0;
  RegimeAData full = gen_regime_a(cfg);
  cfg.g = 0.4;
  RegimeAData mid = gen_regime_a(cfg);
  // C=0 columns never move; C=1 columns interpolate linearly toward the
  // full-strength table.
  for (int q = 0; q < 2; ++q) {
    CHECK((full.mean_table.col(q) - mid.mean_table.col(q)).cwiseAbs().maxCoeff() <
          1e-12);
    Eigen::VectorXd expect =
        full.mean_table.col(q) +
        0.4 * (full.mean_table.col(2 + q) - full.mean_table.col(q));
    CHECK((mid.mean_table.col(2 + q) - expect).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("regime A state frequencies match the configured probabilities") {
  RegimeAConfig cfg;
  cfg.n = 50000;
  RegimeAData d = gen_regime_a(cfg);
  Eigen::Vector4d freq = Eigen::Vector4d::Zero();
  for (int i = 0; i < cfg.n; ++i) freq(2 * d.c(i) + d.q(i)) += 1.0;
  freq /= cfg.n;
  CHECK(std::abs(freq(0) - 0.2) < 0.01);
  CHECK(std::abs(freq(1) - 0.3) < 0.01);
  CHECK(std::abs(freq(2) - 0.3) < 0.01);
  CHECK(std::abs(freq(3) - 0.2) < 0.01);
}

TEST_CASE("regime A returns the three oracle views of five judges") {
  RegimeAData d = gen_regime_a({.n = 10});
  for (const auto& g : d.true_views.groups) CHECK(g.size() == 5);
  CHECK(d.scores.p() == 15);
  REQUIRE(d.scores.truth.has_value());
  for (int i = 0; i < d.scores.n(); ++i)
    CHECK((*d.scores.truth)(i) == doctest::Approx(double(d.q(i))));
}

TEST_CASE("regime B at zero strength has no confounder signal") {
  RegimeBConfig cfg;
  cfg.n = 10;
  cfg.strength = 0.0;
  RegimeBData d = gen_regime_b(cfg);
  CHECK((d.mean_table.col(0) - d.mean_table.col(2)).cwiseAbs().maxCoeff() <
        1e-12);
  CHECK((d.mean_table.col(1) - d.mean_table.col(3)).cwiseAbs().maxCoeff() <
        1e-12);
}

TEST_CASE("regime B quality-only features ignore the confounder strength") {
  RegimeBConfig a, b;
  a.n = b.n = 10;
  a.strength = 0.0;
  b.strength = 1.0;
  RegimeBData d0 = gen_regime_b(a), d1 = gen_regime_b(b);
  const int dpv = a.q_only + a.c_only + 1;
  for (int v = 0; v < 3; ++v)
    for (int f = 0; f < a.q_only; ++f) {
      const int j = v * dpv + f;
      CHECK((d0.mean_table.row(j) - d1.mean_table.row(j)).cwiseAbs().maxCoeff() <
            1e-12);
      // Q-only features still separate the quality states.
      CHECK(std::abs(d1.mean_table(j, 1) - d1.mean_table(j, 0)) > 1e-6);
    }
}

TEST_CASE("regime B covariance at full strength is confounder-dominated") {
  RegimeBConfig cfg;
  cfg.strength = 1.0;
  RegimeBData d = gen_regime_b(cfg);
  CovarianceEstimate c = covariance(d.scores);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.sigma);
  Eigen::VectorXd top = es.eigenvectors().col(d.scores.p() - 1);
  const int dpv = cfg.q_only + cfg.c_only + 1;
  double c_mass = 0.0;
  for (int v = 0; v < 3; ++v)
    for (int f = cfg.q_only; f < cfg.q_only + cfg.c_only; ++f)
      c_mass += top(v * dpv + f) * top(v * dpv + f);
  CHECK(c_mass / top.squaredNorm() >= 0.70);
}

TEST_CASE("planted graph has no cross-view precision edges") {
  PlantedGraphData d = gen_planted_graph({.n = 100});
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 12; ++j)
      if (i / 4 != j / 4) CHECK(d.noise_precision(i, j) == doctest::Approx(0.0));
}

TEST_CASE("planted graph edge counts concentrate at 40% density") {
  double edges = 0.0;
  const int reps = 60;
  for (int s = 0; s < reps; ++s) {
    PlantedGraphConfig cfg;
    cfg.n = 10;
    cfg.seed = s;
    PlantedGraphData d = gen_planted_graph(cfg);
    for (int v = 0; v < 3; ++v)
      for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j)
          if (std::abs(d.noise_precision(4 * v + i, 4 * v + j)) > 1e-12)
            edges += 1.0;
  }
  // The raw density gives 0.4 * C(4,2) = 2.4 expected edges per view, but the
  // generator redraws until every view's edge graph is connected (>= 3 edges
  // on 4 nodes), which shifts the conditional average up toward ~3.5.
  const double per_view = edges / (3.0 * reps);
  CHECK(per_view >= 3.0);
  CHECK(per_view < 4.5);
}

TEST_CASE("planted graph samples reproduce the planted covariance") {
  PlantedGraphConfig cfg;
  cfg.n = 10000;
  PlantedGraphData d = gen_planted_graph(cfg);
  // Population covariance: noise covariance plus between-state spread.
  Eigen::MatrixXd noise_cov = d.noise_precision.inverse();
  Eigen::VectorXd mbar = d.mean_table * d.weights;
  Eigen::MatrixXd spread = Eigen::MatrixXd::Zero(12, 12);
  for (int r = 0; r < 4; ++r) {
    Eigen::VectorXd v = d.mean_table.col(r) - mbar;
    spread += d.weights(r) * v * v.transpose();
  }
  Eigen::MatrixXd pop = noise_cov + spread;
  CovarianceEstimate c = covariance(d.scores);
  CHECK((c.sigma - pop).norm() / pop.norm() < 0.05);
}

TEST_CASE("gaussian model with a single unit direction") {
  GaussianModelConfig cfg;
  cfg.p = 4;
  cfg.h = 1;
  cfg.khh_diag = Eigen::VectorXd::Constant(1, 1.0);
  GaussianModelData d = gen_gaussian_model(cfg);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(d.l_star);
  const int top = cfg.p - 1;
  CHECK(es.eigenvalues()(top) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(es.eigenvectors().col(top).dot(d.k_jh.col(0))) ==
        doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("gaussian model eigenvectors match the planted columns") {
  GaussianModelConfig cfg;
  cfg.p = 10;
  cfg.h = 3;
  cfg.seed = 4;
  GaussianModelData d = gen_gaussian_model(cfg);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(d.l_star);
  // Top-h eigenvectors of L* = K_JH K_HH^-1 K_JH^T align with the planted
  // orthonormal columns, ordered by 1/d_l.
  std::vector<std::pair<double, int>> order;
  for (int l = 0; l < 3; ++l) order.push_back({1.0 / d.khh_diag(l), l});
  std::sort(order.begin(), order.end());
  for (int k = 0; k < 3; ++k) {
    const int col = order[2 - k].second;  // largest eigenvalue first
    const Eigen::VectorXd u = es.eigenvectors().col(cfg.p - 1 - k);
    CHECK(std::abs(u.dot(d.k_jh_clean.col(col))) ==
          doctest::Approx(1.0).epsilon(1e-8));
  }
  CHECK(d.eigengap > 0.0);
}

TEST_CASE("gaussian model observable covariance inverts S-L") {
  GaussianModelConfig cfg;
  cfg.p = 8;
  cfg.h = 2;
  cfg.seed = 9;
  GaussianModelData d = gen_gaussian_model(cfg);
  Eigen::MatrixXd theta = d.s_star - d.l_star;
  CHECK((d.sigma_obs * theta - Eigen::MatrixXd::Identity(8, 8))
            .cwiseAbs()
            .maxCoeff() < 1e-8);
}

TEST_CASE("gaussian model sampling matches the population covariance") {
  GaussianModelConfig cfg;
  cfg.p = 6;
  cfg.h = 2;
  cfg.n = 200000;
  cfg.seed = 2;
  GaussianModelData d = gen_gaussian_model(cfg);
  REQUIRE(d.samples.rows() == cfg.n);
  Eigen::MatrixXd centered = d.samples.rowwise() - d.samples.colwise().mean();
  Eigen::MatrixXd emp = centered.transpose() * centered / cfg.n;
  CHECK((emp - d.sigma_obs).norm() / d.sigma_obs.norm() < 0.03);
}
