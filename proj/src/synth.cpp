#include "care/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "care/splr.hpp"

namespace care {

namespace {

Eigen::MatrixXd standard_normal(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = nd(rng);
  return m;
}

/// Draw component labels from a 4-state categorical.
Eigen::VectorXi draw_states(int n, const std::array<double, 4>& probs,
                            std::mt19937_64& rng) {
  std::discrete_distribution<int> dd(probs.begin(), probs.end());
  Eigen::VectorXi s(n);
  for (int i = 0; i < n; ++i) s(i) = dd(rng);
  return s;
}

std::vector<std::string> judge_names(int p) {
  std::vector<std::string> names(p);
  for (int j = 0; j < p; ++j) names[j] = "judge_" + std::to_string(j);
  return names;
}

TriViewPartition contiguous_views(int p, int per_view) {
  TriViewPartition part;
  for (int j = 0; j < p; ++j) part.groups[j / per_view].push_back(j);
  part.feasible = true;
  part.cross_mass = 0.0;
  return part;
}

/// Move the C=1 rows of a base mean table toward the matching C=0 rows:
/// mu_g(1,q) = mu(0,q) + g * (mu(1,q) - mu(0,q)). Columns are indexed by
/// state = 2c + q.
Eigen::MatrixXd interpolate_confounder(const Eigen::MatrixXd& base, double g) {
  Eigen::MatrixXd out = base;
  for (int q = 0; q < 2; ++q)
    out.col(2 + q) = base.col(q) + g * (base.col(2 + q) - base.col(q));
  return out;
}

}  // namespace

std::uint64_t substream_seed(const std::string& experiment, std::uint64_t seed,
                             const std::string& purpose) {
  // FNV-1a over the tag strings, mixed with the user seed.
  std::uint64_t h = 14695981039346656037ULL;
  auto eat = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= 0xffULL;
    h *= 1099511628211ULL;
  };
  eat(experiment);
  eat(purpose);
  h ^= seed + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

RegimeAData gen_regime_a(const RegimeAConfig& cfg) {
  const int p = 15;
  const int per_view = 5;
  std::mt19937_64 table_rng(substream_seed("regime_a", cfg.seed, "table"));
  std::mt19937_64 data_rng(substream_seed("regime_a", cfg.seed, "data"));

  // Judge roles: seven judges are purely quality driven and eight carry a
  // dominant positive confounder loading plus a strong quality loading with
  // balanced +/- signs. The sign balance keeps the quality and confounder
  // directions orthogonal after per-judge standardization (so the shared
  // second-order factor is quality), while the uniformly positive confounder
  // loadings dominate both the raw average and the per-judge vote at full
  // strength. Pure judges are spread so that every view keeps confounder
  // dependence: a view whose four conditional means collapse into two
  // duplicate columns drags the moment tensor's factor matrix to k-rank one
  // and the rank-4 decomposition loses uniqueness at intermediate strengths.
  Eigen::VectorXd a(p), b(p), e(p);
  std::uniform_real_distribution<double> jit(-0.1, 0.1);
  // Tight jitter on the signed quality loadings keeps the +/- pairs close to
  // exact cancellation in the item average.
  std::uniform_real_distribution<double> jit_mixed(-0.03, 0.03);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int j = 0; j < p; ++j) {
    const bool mixed = (j >= 4 && j <= 12 && j != 8);
    if (mixed) {
      const double sign = (j % 2 == 0) ? 1.0 : -1.0;
      a(j) = sign * cfg.q_amp_mixed * (1.0 + jit_mixed(table_rng));
      b(j) = cfg.c_amp * (1.0 + jit_mixed(table_rng));
      e(j) = cfg.interaction_amp * (u01(table_rng) < 0.5 ? -1.0 : 1.0);
    } else {
      a(j) = cfg.q_amp_pure * (1.0 + jit(table_rng));
      b(j) = 0.0;
      e(j) = 0.0;
    }
  }
  // Per-judge score offsets (different judges sit at different score levels).
  // They also make the uncentered third moment informative: without them the
  // two quality states are mirror images with equal total weight and the
  // moment tensor cancels at g = 0.
  Eigen::VectorXd base_off(p);
  for (int j = 0; j < p; ++j)
    base_off(j) =
        cfg.baseline_amp * (0.85 + 0.15 * u01(table_rng)) *
        (u01(table_rng) < 0.5 ? -1.0 : 1.0);

  Eigen::MatrixXd base(p, 4);  // state = 2c + q at full confounder strength
  for (int c = 0; c < 2; ++c)
    for (int q = 0; q < 2; ++q) {
      const double qs = 2.0 * q - 1.0, cs = 2.0 * c - 1.0;
      base.col(2 * c + q) = base_off + a * qs + b * cs + e * (qs * cs);
    }

  RegimeAData out;
  out.mean_table = interpolate_confounder(base, cfg.g);

  Eigen::VectorXi state = draw_states(cfg.n, cfg.state_probs, data_rng);
  out.q.resize(cfg.n);
  out.c.resize(cfg.n);
  out.scores.values.resize(cfg.n, p);
  const double noise_sd = std::sqrt(cfg.noise_var);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int i = 0; i < cfg.n; ++i) {
    const int s = state(i);
    out.q(i) = s % 2;
    out.c(i) = s / 2;
    for (int j = 0; j < p; ++j)
      out.scores.values(i, j) = out.mean_table(j, s) + noise_sd * nd(data_rng);
  }
  out.scores.judge_names = judge_names(p);
  out.scores.truth = out.q.cast<double>();
  out.scores.task_kind = TaskKind::scoring;
  out.true_views = contiguous_views(p, per_view);
  return out;
}

RegimeBData gen_regime_b(const RegimeBConfig& cfg) {
  const int d = 12;
  const int p = 3 * d;
  const int both = d - cfg.q_only - cfg.c_only;
  if (cfg.q_only < 1 || cfg.c_only < 1 || both < 1)
    throw std::invalid_argument("regime B view layout must leave >= 1 of each feature kind");

  std::mt19937_64 data_rng(substream_seed("regime_b", cfg.seed, "data"));
  std::mt19937_64 table_rng(substream_seed("regime_b", cfg.seed, "table"));

  // State-independent per-judge offsets; see RegimeBConfig::baseline_amp.
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  Eigen::VectorXd base_off(p);
  for (int j = 0; j < p; ++j)
    base_off(j) = cfg.baseline_amp * (0.85 + 0.15 * u01(table_rng)) *
                  (u01(table_rng) < 0.5 ? -1.0 : 1.0);

  // Base table at full confounder strength; state = 2c + q.
  Eigen::MatrixXd base = Eigen::MatrixXd::Zero(p, 4);
  for (int v = 0; v < 3; ++v)
    for (int f = 0; f < d; ++f) {
      const int j = v * d + f;
      for (int c = 0; c < 2; ++c)
        for (int q = 0; q < 2; ++q) {
          const double qs = 2.0 * q - 1.0, cs = 2.0 * c - 1.0;
          double m = 0.0;
          if (f < cfg.q_only) {
            m = cfg.q_shift * qs;
          } else if (f < cfg.q_only + cfg.c_only) {
            m = cfg.c_shift * cs;
          } else {
            m = cfg.both_shift * (qs + cs) + cfg.interaction_amp * qs * cs;
          }
          base(j, 2 * c + q) = base_off(j) + m;
        }
    }

  RegimeBData out;
  out.mean_table = interpolate_confounder(base, cfg.strength);

  std::array<double, 4> uniform{0.25, 0.25, 0.25, 0.25};
  Eigen::VectorXi state = draw_states(cfg.n, uniform, data_rng);
  out.q.resize(cfg.n);
  out.c.resize(cfg.n);
  out.scores.values.resize(cfg.n, p);
  const double noise_sd = std::sqrt(cfg.noise_var);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int i = 0; i < cfg.n; ++i) {
    const int s = state(i);
    out.q(i) = s % 2;
    out.c(i) = s / 2;
    for (int j = 0; j < p; ++j)
      out.scores.values(i, j) = out.mean_table(j, s) + noise_sd * nd(data_rng);
  }
  out.scores.judge_names = judge_names(p);
  out.scores.truth = out.q.cast<double>();
  out.scores.task_kind = TaskKind::scoring;
  out.true_views = contiguous_views(p, d);
  return out;
}

PlantedGraphData gen_planted_graph(const PlantedGraphConfig& cfg) {
  const int p = cfg.views * cfg.judges_per_view;
  std::mt19937_64 data_rng(substream_seed("planted_graph", cfg.seed, "data"));
  const Eigen::Vector4d weights(cfg.state_probs[0], cfg.state_probs[1],
                                cfg.state_probs[2], cfg.state_probs[3]);

  // Not every random draw of (edges, mean table) yields an identifiable
  // sparse-plus-low-rank split: a planted edge can be cancelled almost
  // exactly by the between-state spread, or an eigenvector of the spread
  // can concentrate on a cross-view judge pair and masquerade as an edge.
  // Redraw until the population-level decomposition separates planted
  // edges from cross-view residuals with a clear margin.
  PlantedGraphData out;
  Eigen::MatrixXd omega;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  bool identifiable = false;
  for (int attempt = 0; attempt < 2000 && !identifiable; ++attempt) {
    std::mt19937_64 table_rng(substream_seed(
        "planted_graph", cfg.seed, "table:" + std::to_string(attempt)));

    // Within-view precision edges only; the diagonal is lifted until the
    // precision is comfortably positive definite.
    omega = Eigen::MatrixXd::Identity(p, p);
    for (int v = 0; v < cfg.views; ++v) {
      const int off = v * cfg.judges_per_view;
      for (int i = 0; i < cfg.judges_per_view; ++i)
        for (int j = i + 1; j < cfg.judges_per_view; ++j)
          if (u01(table_rng) < cfg.edge_density) {
            omega(off + i, off + j) = cfg.edge_strength;
            omega(off + j, off + i) = cfg.edge_strength;
          }
    }
    {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(omega);
      const double lift = 0.15 - es.eigenvalues().minCoeff();
      if (lift > 0.0) omega.diagonal().array() += lift;
    }

    // Each view's edge subgraph must be connected, otherwise the view is
    // not recoverable from the dependency structure even in population.
    bool connected = true;
    for (int v = 0; v < cfg.views && connected; ++v) {
      const int off = v * cfg.judges_per_view;
      std::vector<int> stack{0};
      std::vector<bool> seen(cfg.judges_per_view, false);
      seen[0] = true;
      while (!stack.empty()) {
        const int i = stack.back();
        stack.pop_back();
        for (int j = 0; j < cfg.judges_per_view; ++j)
          if (!seen[j] && std::abs(omega(off + i, off + j)) > 1e-12) {
            seen[j] = true;
            stack.push_back(j);
          }
      }
      for (int j = 0; j < cfg.judges_per_view; ++j) connected &= seen[j];
    }
    if (!connected) continue;

    // Generic per-judge loadings plus per-state jitter: quality, confounder
    // and their interaction all vary across judges. Near-flat magnitudes
    // keep the between-state spread incoherent with the judge axes.
    Eigen::VectorXd alpha(p), beta(p), gamma(p), base(p);
    std::uniform_real_distribution<double> mag(0.85, 1.0);
    auto signed_mag = [&]() {
      return mag(table_rng) * (u01(table_rng) < 0.5 ? -1.0 : 1.0);
    };
    for (int j = 0; j < p; ++j) {
      alpha(j) = signed_mag();
      beta(j) = signed_mag();
      gamma(j) = signed_mag();
      base(j) = cfg.baseline_amp * signed_mag();
    }
    Eigen::MatrixXd z = cfg.state_jitter * standard_normal(p, 4, table_rng);

    out.mean_table.resize(p, 4);  // state = 2q + c
    for (int q = 0; q < 2; ++q)
      for (int c = 0; c < 2; ++c) {
        const double qs = 2.0 * q - 1.0, cs = 2.0 * c - 1.0;
        out.mean_table.col(2 * q + c) = base + cfg.q_amp * alpha * qs +
                                        cfg.c_amp * beta * cs +
                                        cfg.interaction_amp * gamma * (qs * cs) +
                                        z.col(2 * q + c);
      }

    // Population check: standardized precision of the mixture, split at the
    // same penalty level the downstream graph step uses.
    Eigen::MatrixXd sigma = omega.inverse();
    const Eigen::VectorXd mbar = out.mean_table * weights;
    for (int r = 0; r < 4; ++r) {
      const Eigen::VectorXd v = out.mean_table.col(r) - mbar;
      sigma += weights(r) * v * v.transpose();
    }
    const Eigen::VectorXd sd = sigma.diagonal().cwiseSqrt();
    const Eigen::MatrixXd corr =
        sigma.array() / (sd * sd.transpose()).array();
    Eigen::MatrixXd theta = corr.inverse();
    theta = 0.5 * (theta + theta.transpose());
    const SplrDecomposition dec = splr_decompose(theta, 0.08, 1.5, 30000, 1e-13);
    double min_edge = std::numeric_limits<double>::infinity();
    double worst_cross = 0.0;
    for (int i = 0; i < p; ++i)
      for (int j = i + 1; j < p; ++j) {
        const double v = std::abs(dec.s(i, j));
        if (std::abs(omega(i, j)) > 1e-12)
          min_edge = std::min(min_edge, v);
        else if (i / cfg.judges_per_view != j / cfg.judges_per_view)
          worst_cross = std::max(worst_cross, v);
      }
    identifiable = min_edge >= 0.32 && worst_cross <= 0.12;
  }
  if (!identifiable)
    throw std::runtime_error(
        "gen_planted_graph: no identifiable instance found");

  out.noise_precision = omega;
  Eigen::LLT<Eigen::MatrixXd> llt(omega.inverse());
  Eigen::MatrixXd chol = llt.matrixL();

  Eigen::VectorXi state = draw_states(cfg.n, cfg.state_probs, data_rng);
  out.q.resize(cfg.n);
  out.c.resize(cfg.n);
  out.weights = Eigen::Vector4d(cfg.state_probs[0], cfg.state_probs[1],
                                cfg.state_probs[2], cfg.state_probs[3]);
  out.scores.values.resize(cfg.n, p);
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::VectorXd eps(p);
  for (int i = 0; i < cfg.n; ++i) {
    const int s = state(i);
    out.q(i) = s / 2;
    out.c(i) = s % 2;
    for (int j = 0; j < p; ++j) eps(j) = nd(data_rng);
    out.scores.values.row(i) =
        (out.mean_table.col(s) + chol * eps).transpose();
  }
  out.scores.judge_names = judge_names(p);
  out.scores.truth = out.q.cast<double>();
  out.scores.task_kind = TaskKind::scoring;
  out.true_views = contiguous_views(p, cfg.judges_per_view);
  return out;
}

GaussianModelData gen_gaussian_model(const GaussianModelConfig& cfg) {
  std::mt19937_64 rng(substream_seed("gaussian_model", cfg.seed, "model"));
  GaussianModelData out;

  out.khh_diag = cfg.khh_diag;
  if (out.khh_diag.size() == 0) {
    out.khh_diag.resize(cfg.h);
    for (int i = 0; i < cfg.h; ++i) out.khh_diag(i) = 1.0 + 1.3 * i;
  }
  if (out.khh_diag.size() != cfg.h)
    throw std::invalid_argument("khh_diag length must equal h");
  if (out.khh_diag.minCoeff() <= 0.0)
    throw std::invalid_argument("khh_diag must be positive");

  // Orthonormal cross-precision columns via QR of a Gaussian matrix.
  Eigen::MatrixXd g = standard_normal(cfg.p, cfg.h, rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  out.k_jh_clean =
      Eigen::MatrixXd(qr.householderQ()).leftCols(cfg.h);
  // Fix column signs for reproducibility.
  for (int c = 0; c < cfg.h; ++c)
    if (out.k_jh_clean.col(c).sum() < 0.0) out.k_jh_clean.col(c) *= -1.0;

  out.k_jh = out.k_jh_clean;
  if (cfg.perturbation > 0.0) {
    Eigen::MatrixXd e = standard_normal(cfg.p, cfg.h, rng);
    const double op = e.jacobiSvd().singularValues()(0);
    out.k_jh += (cfg.perturbation / op) * e;
  }

  const double lambda_max = 1.0 / out.khh_diag.minCoeff();
  const double eta = cfg.diag_scale > 0.0 ? cfg.diag_scale : lambda_max + 1.0;
  out.s_star = eta * Eigen::MatrixXd::Identity(cfg.p, cfg.p);
  out.l_star =
      out.k_jh * out.khh_diag.cwiseInverse().asDiagonal() * out.k_jh.transpose();
  Eigen::MatrixXd theta = out.s_star - out.l_star;
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(theta);
    if (es.eigenvalues().minCoeff() <= 1e-8)
      throw std::invalid_argument("diag_scale too small: precision not positive definite");
  }
  out.sigma_obs = theta.inverse();

  // Smallest separation delta_i = min(lambda_i, adjacent gaps) over the clean
  // latent spectrum.
  {
    Eigen::VectorXd lam = out.khh_diag.cwiseInverse();
    std::sort(lam.data(), lam.data() + lam.size(), std::greater<double>());
    double delta = lam(lam.size() - 1);
    for (int i = 0; i + 1 < lam.size(); ++i)
      delta = std::min(delta, lam(i) - lam(i + 1));
    out.eigengap = delta;
  }

  if (cfg.n > 0) {
    const int m = cfg.p + cfg.h;
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(m, m);
    k.topLeftCorner(cfg.p, cfg.p) = out.s_star;
    k.topRightCorner(cfg.p, cfg.h) = out.k_jh;
    k.bottomLeftCorner(cfg.h, cfg.p) = out.k_jh.transpose();
    k.bottomRightCorner(cfg.h, cfg.h) = out.khh_diag.asDiagonal();
    Eigen::LLT<Eigen::MatrixXd> llt(k.inverse());
    Eigen::MatrixXd chol = llt.matrixL();
    std::mt19937_64 data_rng(substream_seed("gaussian_model", cfg.seed, "data"));
    Eigen::MatrixXd raw = standard_normal(cfg.n, m, data_rng) * chol.transpose();
    out.samples = raw.leftCols(cfg.p);
    out.latents = raw.rightCols(cfg.h);
  }
  return out;
}

}  // namespace care
