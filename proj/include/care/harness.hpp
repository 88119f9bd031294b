#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "care/dataio.hpp"
#include "care/spectral.hpp"
#include "care/splr.hpp"
#include "care/synth.hpp"
#include "care/tensor_path.hpp"

namespace care {

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

double mae(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth);
double accuracy(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth);
/// False positive rate FP/(FP+TN) for 0/1 labels; throws without negatives.
double fpr(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth);

/// Threshold a continuous score at its own median (balanced-prior decision).
Eigen::VectorXd median_threshold(const Eigen::VectorXd& scores);

// ---------------------------------------------------------------------------
// End-to-end aggregation pipelines
// ---------------------------------------------------------------------------

struct SvdOptions {
  double gamma_n = 1.0;
  double tau = 1.0;
  SymmetryRule rule = SymmetryRule::leading;
  WeightMode mode = WeightMode::confounder_subtracted;
  bool calibrate = true;
};

struct SvdResult {
  QualityEstimates estimates;  // calibrated per-item quality scores
  LatentFactors factors;
  SplrDecomposition splr;
  Standardization standardization;
};

/// Standardize, estimate the precision matrix, split it sparse+low-rank,
/// pick the quality factor and aggregate.
SvdResult care_svd(const ScoreMatrix& raw, const SvdOptions& opt,
                   const std::optional<AnchorSet>& anchors = std::nullopt);

struct TensorOptions {
  double gamma_n = 0.05;
  double tau = 1.0;
  double eps = 1e-3;
  int restarts = 16;
  std::uint64_t seed = 0;
  std::optional<TriViewPartition> partition;  // override the learned split
  bool em_refine = false;
};

struct TensorResult {
  PosteriorResult post;        // quality_prob is the per-item score
  MixtureModel mix;            // on the standardized scale
  TriViewPartition part;
  CpComponents cp;
  std::array<int, 4> states;   // component -> latent state 2q+c
  Eigen::MatrixXd l_hat;
  SplrDecomposition splr;
  Standardization standardization;
};

/// Standardize, partition judges into three conditionally independent views,
/// factor the third cross moment, resolve scales against pairwise moments,
/// and return posterior state responsibilities.
TensorResult care_tensor(const ScoreMatrix& raw, const TensorOptions& opt);

/// Remap mixture components to the quality label using a small labeled
/// subset: over all nonempty proper component subsets, pick the one whose
/// summed responsibility best classifies the labeled items. Returns Pr(Q=1)
/// per row.
Eigen::VectorXd quality_from_validation(const Eigen::MatrixXd& resp,
                                        const std::vector<int>& val_idx,
                                        const Eigen::VectorXd& truth);

// ---------------------------------------------------------------------------
// Hyperparameter search
// ---------------------------------------------------------------------------

enum class Method { svd, tensor };

struct GridEntry {
  double gamma_n = 1.0;
  double tau = 1.0;
};

/// gamma grid {0.1,...,10} x tau=1 for the spectral path.
std::vector<GridEntry> svd_grid();
/// (gamma, tau) in {1e-3,...,1e-1}^2 for the tensor path.
std::vector<GridEntry> tensor_grid();

struct GridSearchOutcome {
  GridEntry best;
  double best_metric = 0.0;
  bool maximize = false;                 // accuracy is maximized, MAE minimized
  std::vector<GridEntry> entries;
  std::vector<double> metrics;           // NaN where the point failed
  std::vector<std::string> diagnostics;  // error text for failed points
};

/// Fit on the train split per grid point, score on validation (accuracy for
/// binary truth, MAE otherwise), break ties toward the smallest gamma then
/// tau. Throws if every grid point fails.
GridSearchOutcome grid_search(const ScoreMatrix& m, Method method,
                              const std::vector<GridEntry>& grid,
                              const Split& split,
                              const TensorOptions& tensor_base = {});

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline constexpr const char* kReportSchema = "care-report/1";

struct RunReport {
  std::string method;
  nlohmann::json params;
  std::string metric_name;
  std::vector<double> per_seed;
  double wall_seconds = 0.0;
  nlohmann::json config;
  nlohmann::json extra;

  double mean() const;
  std::optional<double> stddev() const;  // needs >= 2 seeds
  nlohmann::json to_json() const;
};

// ---------------------------------------------------------------------------
// Experiment drivers
// ---------------------------------------------------------------------------

struct SweepResult {
  std::vector<double> levels;  // confounder strength per column
  // method -> seeds x levels accuracy matrix
  std::map<std::string, Eigen::MatrixXd> acc;
  std::vector<RunReport> reports;
};

/// Confounder-strength sweep in the regime where second-order structure
/// suffices (three views of five judges).
SweepResult run_sweep_second_order(int seeds = 10,
                                   std::vector<double> levels = {},
                                   RegimeAConfig base = {},
                                   std::uint64_t seed0 = 0);

/// Sweep in the regime where second-order structure is insufficient and only
/// the tensor path identifies quality.
SweepResult run_sweep_third_order(int seeds = 25,
                                  std::vector<double> levels = {},
                                  RegimeBConfig base = {},
                                  std::uint64_t seed0 = 0);

struct PartitionStudyResult {
  std::vector<double> err_graph;   // per seed, mean component-mean error
  std::vector<double> err_random;
  double median_graph = 0.0;
  double median_random = 0.0;
  double ratio = 0.0;              // random / graph
  RunReport report;
};

/// Planted-graph study: component-mean recovery with a partition learned from
/// the sparse structure versus a random partition.
PartitionStudyResult run_partition_study(int seeds = 10,
                                         PlantedGraphConfig base = {},
                                         std::uint64_t seed0 = 0);

// ---------------------------------------------------------------------------
// Theory checks
// ---------------------------------------------------------------------------

struct TheoremCheck {
  std::string name;
  bool passed = false;
  double worst_margin = 0.0;  // most adverse bound-minus-error (or slope info)
  nlohmann::json details;
};

/// The five empirical checks: exact recovery, eigenvector stability,
/// misspecification bound, spectral n^-1/2 rate, tensor n^-1/2 rate.
std::vector<TheoremCheck> theorem_suite(int seed_count = 10,
                                        std::uint64_t seed0 = 0);

TheoremCheck check_exact_recovery(int models = 50, std::uint64_t seed0 = 0);
TheoremCheck check_stability(int models = 100, std::uint64_t seed0 = 0);
TheoremCheck check_misspecification(int models = 100, int obs_per_model = 1000,
                                    std::uint64_t seed0 = 0);
TheoremCheck check_spectral_rate(int seeds = 5, std::uint64_t seed0 = 0);
TheoremCheck check_tensor_rate(int seeds = 5, std::uint64_t seed0 = 0);

nlohmann::json theorem_report(const std::vector<TheoremCheck>& checks);

}  // namespace care
