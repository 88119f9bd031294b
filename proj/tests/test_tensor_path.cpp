#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "care/tensor_path.hpp"

using namespace care;

namespace {

ScoreMatrix from_matrix(const Eigen::MatrixXd& x) {
  ScoreMatrix m;
  m.values = x;
  m.judge_names.resize(x.cols());
  for (int j = 0; j < x.cols(); ++j) m.judge_names[j] = "j" + std::to_string(j);
  return m;
}

Eigen::VectorXd randn(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v(i) = g(rng);
  return v;
}

// Best-case factor mismatch over component permutation and per-component sign,
// after normalizing the rank-one terms the same way on both sides.
double cp_match_error(const CpComponents& est, const Eigen::VectorXd& w,
                      const std::array<Eigen::MatrixXd, 3>& f) {
  const int R = static_cast<int>(w.size());
  std::array<int, 4> perm = {0, 1, 2, 3};
  double best = std::numeric_limits<double>::infinity();
  std::array<int, 4> idx = perm;
  std::sort(idx.begin(), idx.begin() + R);
  do {
    double err = 0.0;
    for (int r = 0; r < R; ++r) {
      const int s = idx[r];
      // Compare the full rank-one terms entry-by-entry via their vectors.
      Eigen::VectorXd e0 = est.weights(r) * est.factors[0].col(r);
      Eigen::VectorXd t0 = w(s) * f[0].col(s);
      Eigen::VectorXd e1 = est.factors[1].col(r), t1 = f[1].col(s).normalized();
      Eigen::VectorXd e2 = est.factors[2].col(r), t2 = f[2].col(s).normalized();
      t0 *= f[1].col(s).norm() * f[2].col(s).norm();
      // Resolve the sign pair ambiguity between modes 1 and 2.
      if (e1.dot(t1) < 0) {
        t1 = -t1;
        t0 = -t0;
      }
      if (e2.dot(t2) < 0) {
        t2 = -t2;
        t0 = -t0;
      }
      err = std::max(err, (e0 - t0).cwiseAbs().maxCoeff());
      err = std::max(err, (e1 - t1).cwiseAbs().maxCoeff());
      err = std::max(err, (e2 - t2).cwiseAbs().maxCoeff());
    }
    best = std::min(best, err);
  } while (std::next_permutation(idx.begin(), idx.begin() + R));
  return best;
}

}  // namespace

TEST_CASE("rank-1 tensor is recovered exactly") {
  std::mt19937_64 rng(1);
  Eigen::VectorXd a = randn(3, rng), b = randn(4, rng), c = randn(5, rng);
  Tensor3 t(3, 4, 5);
  t.add_rank_one(1.0, a, b, c);
  CpComponents cp = cp_decompose(t, 1, 4, 0);
  CHECK(cp.fit < 1e-10);
  // Scaling convention: modes 1 and 2 unit norm, magnitude in mode 0 and the
  // weight.
  CHECK(cp.factors[1].col(0).norm() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(cp.factors[2].col(0).norm() == doctest::Approx(1.0).epsilon(1e-9));
  Eigen::VectorXd w(1);
  w << 1.0;
  std::array<Eigen::MatrixXd, 3> f = {a, b, c};
  CHECK(cp_match_error(cp, w, f) < 1e-8);
}

TEST_CASE("four planted components are recovered to 1e-6") {
  std::mt19937_64 rng(2);
  const int R = 4;
  std::array<Eigen::MatrixXd, 3> f = {Eigen::MatrixXd(5, R),
                                      Eigen::MatrixXd(5, R),
                                      Eigen::MatrixXd(5, R)};
  for (auto& m : f)
    for (int r = 0; r < R; ++r) m.col(r) = randn(5, rng);
  Eigen::VectorXd w(R);
  w << 0.2, 0.3, 0.3, 0.2;
  Tensor3 t(5, 5, 5);
  for (int r = 0; r < R; ++r)
    t.add_rank_one(w(r), f[0].col(r), f[1].col(r), f[2].col(r));
  CpComponents cp = cp_decompose(t, R, 8, 0, 500, 1e-14);
  CHECK(cp.fit < 1e-8);
  CHECK(cp_match_error(cp, w, f) < 1e-6);
}

TEST_CASE("cp_decompose rejects an unfittable request") {
  Tensor3 t(2, 2, 2);  // identically zero tensor has no positive-weight fit
  CHECK_THROWS(cp_decompose(t, 1, 2, 0, 50));
}

TEST_CASE("assemble_means concatenates contiguous views in place") {
  CpComponents cp;
  cp.weights = Eigen::VectorXd::Ones(4);
  cp.factors = {Eigen::MatrixXd::Zero(2, 4), Eigen::MatrixXd::Zero(2, 4),
                Eigen::MatrixXd::Zero(2, 4)};
  for (int r = 0; r < 4; ++r)
    for (int v = 0; v < 3; ++v)
      for (int i = 0; i < 2; ++i) cp.factors[v](i, r) = 100 * v + 10 * i + r;
  TriViewPartition part;
  part.groups = {std::vector<int>{0, 1}, {2, 3}, {4, 5}};
  auto means = assemble_means(cp, part);
  CHECK(means[0].size() == 6);
  CHECK(means[1](0) == doctest::Approx(1.0));
  CHECK(means[2](3) == doctest::Approx(112.0));
  CHECK(means[0](4) == doctest::Approx(200.0));
}

TEST_CASE("assemble_means de-permutes shuffled judge groupings") {
  std::mt19937_64 rng(3);
  const int p = 9;
  std::array<Eigen::VectorXd, 4> mu;
  for (auto& m : mu) m = randn(p, rng);
  TriViewPartition part;
  part.groups = {std::vector<int>{4, 0, 7}, {2, 8, 1}, {6, 3, 5}};

  CpComponents cp;
  cp.weights = Eigen::VectorXd::Ones(4);
  cp.factors = {Eigen::MatrixXd(3, 4), Eigen::MatrixXd(3, 4),
                Eigen::MatrixXd(3, 4)};
  for (int r = 0; r < 4; ++r)
    for (int v = 0; v < 3; ++v)
      for (int i = 0; i < 3; ++i) cp.factors[v](i, r) = mu[r](part.groups[v][i]);
  auto means = assemble_means(cp, part);
  for (int r = 0; r < 4; ++r)
    CHECK((means[r] - mu[r]).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("identify_states orders components along the quality axis") {
  const int p = 4;
  Eigen::VectorXd v = Eigen::VectorXd::Ones(p).normalized();
  Eigen::MatrixXd l_hat = 2.0 * v * v.transpose();
  std::array<Eigen::VectorXd, 4> means = {1.0 * v, 0.8 * v, -0.8 * v, -1.0 * v};
  std::array<int, 4> st = identify_states(means, l_hat);
  // Components 0 and 1 score highest, so both carry Q=1 (state >= 2).
  CHECK(st[0] >= 2);
  CHECK(st[1] >= 2);
  CHECK(st[2] < 2);
  CHECK(st[3] < 2);
  // Within a Q pair, c ascends with the score.
  CHECK(st[0] == 3);
  CHECK(st[1] == 2);

  // Sign-flipping the eigenvector leaves the mapping unchanged.
  std::array<int, 4> st2 = identify_states(means, (-l_hat).eval());
  CHECK(st == st2);
}

TEST_CASE("align_anchors finds identity and shuffled matchings") {
  std::mt19937_64 rng(4);
  std::array<Eigen::VectorXd, 4> means;
  for (auto& m : means) m = randn(6, rng);
  std::array<int, 4> id = align_anchors(means, means);
  CHECK(id == std::array<int, 4>{0, 1, 2, 3});

  std::array<Eigen::VectorXd, 4> anchors = {means[2], means[0], means[3],
                                            means[1]};
  std::array<int, 4> perm = align_anchors(means, anchors);
  CHECK(perm == std::array<int, 4>{2, 0, 3, 1});
}

TEST_CASE("align_anchors tolerates noisy prototypes") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  int ok = 0;
  const int reps = 100;
  for (int rep = 0; rep < reps; ++rep) {
    // Well-separated means (pairwise distance >= 1) with sigma=0.1 anchors.
    std::array<Eigen::VectorXd, 4> means;
    bool separated;
    do {
      separated = true;
      for (auto& m : means) m = 2.0 * randn(6, rng);
      for (int r = 0; r < 4; ++r)
        for (int s = 0; s < r; ++s)
          if ((means[r] - means[s]).norm() < 1.0) separated = false;
    } while (!separated);
    std::array<int, 4> shuffle = {1, 3, 0, 2};
    std::array<Eigen::VectorXd, 4> anchors;
    for (int r = 0; r < 4; ++r) {
      anchors[r] = means[shuffle[r]];
      for (int i = 0; i < 6; ++i) anchors[r](i) += 0.1 * g(rng);
    }
    std::array<int, 4> perm = align_anchors(means, anchors);
    if (perm == shuffle) ++ok;
  }
  CHECK(ok >= 99);
}

TEST_CASE("fit_within_covariance recovers near-zero noise as ridge only") {
  std::mt19937_64 rng(6);
  MixtureModel mix;
  for (auto& m : mix.means) m = randn(3, rng);
  mix.weights = Eigen::Vector4d(0.25, 0.25, 0.25, 0.25);

  Eigen::MatrixXd x(40, 3);
  for (int i = 0; i < 40; ++i) x.row(i) = mix.means[i % 4].transpose();
  MixtureModel fit = fit_within_covariance(from_matrix(x), mix);
  CHECK((fit.cov - 1e-6 * Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() <
        1e-9);
}

TEST_CASE("fit_within_covariance with a single occupied mean degrades to the "
          "total covariance") {
  std::mt19937_64 rng(7);
  MixtureModel mix;
  mix.means = {Eigen::VectorXd::Zero(2), Eigen::VectorXd::Constant(2, 50.0),
               Eigen::VectorXd::Constant(2, -50.0),
               Eigen::VectorXd::Constant(2, 100.0)};
  mix.weights = Eigen::Vector4d(0.25, 0.25, 0.25, 0.25);
  Eigen::MatrixXd x(500, 2);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = randn(1, rng)(0);
  MixtureModel fit = fit_within_covariance(from_matrix(x), mix);
  // All points hard-assign to the zero mean; empty components trigger the
  // global-covariance fallback, which here equals the pooled residuals anyway.
  Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  Eigen::MatrixXd total = centered.transpose() * centered / x.rows();
  CHECK((fit.cov - total).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("posterior with identical means returns the prior") {
  MixtureModel mix;
  for (auto& m : mix.means) m = Eigen::VectorXd::Zero(2);
  mix.weights = Eigen::Vector4d(0.1, 0.2, 0.3, 0.4);
  mix.cov = Eigen::MatrixXd::Identity(2, 2);
  Eigen::MatrixXd x(5, 2);
  x.setRandom();
  PosteriorResult post = posterior(from_matrix(x), mix);
  for (int i = 0; i < 5; ++i)
    for (int r = 0; r < 4; ++r)
      CHECK(post.responsibilities(i, r) ==
            doctest::Approx(mix.weights(r)).epsilon(1e-10));
}

TEST_CASE("posterior matches a scalar two-state density oracle to 1e-10") {
  MixtureModel mix;
  mix.means = {Eigen::VectorXd::Constant(1, -1.0),
               Eigen::VectorXd::Constant(1, -1.0),
               Eigen::VectorXd::Constant(1, 2.0),
               Eigen::VectorXd::Constant(1, 2.0)};
  mix.weights = Eigen::Vector4d(0.2, 0.2, 0.3, 0.3);
  const double var = 0.5;
  mix.cov = Eigen::MatrixXd::Constant(1, 1, var);
  Eigen::MatrixXd x(7, 1);
  x << -2, -1, -0.3, 0.4, 1.1, 2.0, 3.5;
  PosteriorResult post = posterior(from_matrix(x), mix);
  for (int i = 0; i < 7; ++i) {
    auto dens = [&](double mu) {
      return std::exp(-(x(i, 0) - mu) * (x(i, 0) - mu) / (2 * var)) /
             std::sqrt(2 * M_PI * var);
    };
    const double z = 0.4 * dens(-1.0) + 0.6 * dens(2.0);
    CHECK(post.quality_prob(i) ==
          doctest::Approx(0.6 * dens(2.0) / z).epsilon(1e-10));
    CHECK(post.responsibilities(i, 0) ==
          doctest::Approx(0.2 * dens(-1.0) / z).epsilon(1e-10));
  }
}

TEST_CASE("posterior rows sum to one and are permutation equivariant") {
  std::mt19937_64 rng(8);
  MixtureModel mix;
  for (auto& m : mix.means) m = randn(4, rng);
  mix.weights = Eigen::Vector4d(0.2, 0.3, 0.3, 0.2);
  Eigen::MatrixXd a(4, 4);
  a.setRandom();
  mix.cov = a * a.transpose() + Eigen::MatrixXd::Identity(4, 4);
  Eigen::MatrixXd x(50, 4);
  x.setRandom();
  PosteriorResult post = posterior(from_matrix(x), mix);
  for (int i = 0; i < 50; ++i)
    CHECK(std::abs(post.responsibilities.row(i).sum() - 1.0) < 1e-10);

  // Permute judges everywhere simultaneously.
  std::vector<int> perm = {2, 0, 3, 1};
  Eigen::MatrixXd pm = Eigen::MatrixXd::Zero(4, 4);
  for (int i = 0; i < 4; ++i) pm(i, perm[i]) = 1.0;
  MixtureModel mp = mix;
  for (auto& m : mp.means) m = pm * m;
  mp.cov = pm * mix.cov * pm.transpose();
  PosteriorResult post2 = posterior(from_matrix(x * pm.transpose()), mp);
  CHECK((post.responsibilities - post2.responsibilities).cwiseAbs().maxCoeff() <
        1e-10);
}

TEST_CASE("resolve_scales puts factor columns on the conditional-mean scale") {
  // Draw a well-separated 4-component mixture and verify the rescaled CP
  // factors match the planted means with simplex-projected weights.
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  const int per = 3, p = 9, n = 60000;
  std::array<Eigen::VectorXd, 4> mu;
  for (auto& m : mu) m = 3.0 * randn(p, rng);
  Eigen::Vector4d pi(0.2, 0.3, 0.3, 0.2);
  Eigen::MatrixXd x(n, p);
  std::discrete_distribution<int> comp({0.2, 0.3, 0.3, 0.2});
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    labels[i] = comp(rng);
    for (int j = 0; j < p; ++j) x(i, j) = mu[labels[i]](j) + 0.1 * g(rng);
  }
  TriViewPartition part;
  part.groups = {std::vector<int>{0, 1, 2}, {3, 4, 5}, {6, 7, 8}};

  Tensor3 t(per, per, per);
  for (int i = 0; i < n; ++i)
    t.add_rank_one(1.0 / n, x.row(i).head(per).transpose(), x.row(i).segment(per, per).transpose(),
                   x.row(i).tail(per).transpose());
  ScoreMatrix m = from_matrix(x);
  CpComponents cp = cp_decompose(t, 4, 8, 0, 400, 1e-12);
  CpComponents scaled = resolve_scales(cp, m, part);
  auto means = assemble_means(scaled, part);

  // Match each planted mean to its closest estimate.
  CHECK(std::abs(scaled.weights.sum() - 1.0) < 1e-8);
  for (int r = 0; r < 4; ++r) {
    double best = 1e9;
    int arg = -1;
    for (int s = 0; s < 4; ++s) {
      const double d = (means[s] - mu[r]).norm();
      if (d < best) {
        best = d;
        arg = s;
      }
    }
    CHECK(best < 0.25);
    CHECK(scaled.weights(arg) == doctest::Approx(pi(r)).epsilon(0.1));
  }
}
