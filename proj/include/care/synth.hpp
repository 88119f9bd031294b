#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "care/dataio.hpp"
#include "care/partition.hpp"

namespace care {

/// Deterministic substream: one engine per (experiment, seed, purpose).
std::uint64_t substream_seed(const std::string& experiment, std::uint64_t seed,
                             const std::string& purpose);

/// Second-order-sufficient regime: binary (Q, C), three views of five judges,
/// conditional means interpolated in the confounder strength g. The mean
/// tables are fixed per seed; the defaults put the quality factor on all
/// views' shared second-order structure while the confounder dominates both
/// the item average and the per-judge votes at g = 1.
struct RegimeAConfig {
  int n = 50000;
  std::array<double, 4> state_probs{0.2, 0.3, 0.3, 0.2};  // (C,Q): 00,01,10,11
  double noise_var = 0.01;
  double g = 1.0;
  std::uint64_t seed = 0;
  // Mean-table parameters (overridable; the paper leaves the tables
  // unspecified).
  // Loadings satisfy three separate dominance relations: per confounded judge
  // |b| > |a| (votes follow C), in sum Σ|b| > Σ_pure a with the mixed signs
  // cancelling (the item average follows C), but in sum of squares
  // Σa² > Σb² (the quality factor carries more shared variance, so it stays
  // the leading eigenvector of the fitted low-rank precision component).
  double q_amp_pure = 7.0;    // pure quality judges
  double q_amp_mixed = 7.0;   // confounded judges' quality loading
  double c_amp = 8.0;         // confounded judges' confounder loading
  double interaction_amp = 0.4;
  // State-independent per-judge offsets. Without them the two quality states
  // sit at +/- the same vector with equal total weight, and the uncentered
  // third moment cancels exactly at g = 0.
  double baseline_amp = 5.0;
};

struct RegimeAData {
  ScoreMatrix scores;              // truth = Q
  Eigen::VectorXi q, c;            // planted labels
  Eigen::MatrixXd mean_table;      // p x 4, state = 2c+q columns, at strength g
  TriViewPartition true_views;
};

RegimeAData gen_regime_a(const RegimeAConfig& cfg);

/// Second-order-insufficient regime: C independent of Q uniform over four
/// states, three views of d=12 features (3 Q-only, 8 C-only, 1 both).
struct RegimeBConfig {
  int n = 3000;
  int q_only = 3;
  int c_only = 8;
  double noise_var = 0.01;
  double q_shift = 0.5;
  double c_shift = 1.2;
  double both_shift = 0.35;
  double interaction_amp = 0.3;
  // State-independent per-judge offsets. The shift structure alone spans only
  // the three state directions {qs, cs, qs*cs}, so the four per-view factor
  // columns are linearly dependent and the rank-4 tensor decomposition loses
  // uniqueness; a constant offset supplies the missing fourth direction.
  double baseline_amp = 1.0;
  double strength = 1.0;  // confounder strength c in [0,1]
  std::uint64_t seed = 0;
};

struct RegimeBData {
  ScoreMatrix scores;  // truth = Q
  Eigen::VectorXi q, c;
  Eigen::MatrixXd mean_table;      // p x 4 at the configured strength
  TriViewPartition true_views;     // oracle tri-view grouping
};

RegimeBData gen_regime_b(const RegimeBConfig& cfg);

/// Planted conditional-dependency graph: p = 12 judges in three views of
/// four, within-view precision edges of strength 0.3 at 40% density, no
/// cross-view edges, four mixture components.
struct PlantedGraphConfig {
  int n = 10000;
  int views = 3;
  int judges_per_view = 4;
  double edge_strength = 0.3;
  double edge_density = 0.40;
  std::array<double, 4> state_probs{0.2, 0.3, 0.3, 0.2};
  double q_amp = 0.9;
  double c_amp = 0.75;
  double interaction_amp = 0.5;
  double state_jitter = 0.4;   // keeps the four per-view means well conditioned
  double baseline_amp = 3.0;   // state-independent per-judge offset
  std::uint64_t seed = 0;
};

struct PlantedGraphData {
  ScoreMatrix scores;
  Eigen::VectorXi q, c;
  Eigen::MatrixXd mean_table;        // p x 4, state = 2q+c columns
  Eigen::MatrixXd noise_precision;   // planted within-view precision
  Eigen::Vector4d weights;
  TriViewPartition true_views;
};

PlantedGraphData gen_planted_graph(const PlantedGraphConfig& cfg);

/// Fully Gaussian latent-variable model built from precision blocks:
/// S* = K_JJ = diag_scale I, L* = K_JH K_HH^-1 K_HJ.
struct GaussianModelConfig {
  int p = 12;
  int h = 3;
  Eigen::VectorXd khh_diag;     // d_1..d_h, positive distinct; default set
  double perturbation = 0.0;    // spectral norm of E added to K_JH
  double diag_scale = 0.0;      // K_JJ = diag_scale I; 0 -> auto
  int n = 0;                    // samples to draw (0 = population only)
  std::uint64_t seed = 0;
};

struct GaussianModelData {
  Eigen::MatrixXd k_jh;          // p x h (after perturbation, if any)
  Eigen::MatrixXd k_jh_clean;    // unperturbed orthonormal columns
  Eigen::VectorXd khh_diag;
  Eigen::MatrixXd s_star;        // K_JJ
  Eigen::MatrixXd l_star;        // K_JH K_HH^-1 K_HJ
  Eigen::MatrixXd sigma_obs;     // (S-L)^-1, observable covariance
  double eigengap = 0.0;         // min gap between eigenvalues of l_star
  Eigen::MatrixXd samples;       // n x p draws of J
  Eigen::MatrixXd latents;       // n x h draws of H (col 0 = quality)
};

GaussianModelData gen_gaussian_model(const GaussianModelConfig& cfg);

}  // namespace care
