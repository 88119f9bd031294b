#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace care {

enum class TaskKind { scoring, binary, preference };

/// n x p matrix of judge scores with judge names and optional ground truth.
struct ScoreMatrix {
  Eigen::MatrixXd values;                 // n x p
  std::vector<std::string> judge_names;   // size p
  std::optional<Eigen::VectorXd> truth;   // length n
  TaskKind task_kind = TaskKind::scoring;

  int n() const { return static_cast<int>(values.rows()); }
  int p() const { return static_cast<int>(values.cols()); }
};

/// Per-judge affine transform recorded by standardize() so scores can be
/// mapped back to the original scale.
struct Standardization {
  Eigen::VectorXd mean;    // length p
  Eigen::VectorXd stddev;  // length p
};

struct LoadResult {
  ScoreMatrix matrix;
  int dropped_rows = 0;
};

/// Train/validation index split over [0, n).
struct Split {
  std::vector<int> train_idx;
  std::vector<int> val_idx;
};

/// Parse a CSV with a header row of judge names. Rows containing any
/// unparseable score cell are dropped and counted. A judge column whose
/// unparseable cells exceed 10% of rows is a hard error.
LoadResult load_csv(const std::string& path,
                    const std::optional<std::string>& truth_column = std::nullopt);

/// Write scores (and truth, if present) back out with 17 significant digits.
void save_csv(const std::string& path, const ScoreMatrix& m);

/// Column-wise zero-mean unit-std transform. Throws on zero-variance columns.
std::pair<ScoreMatrix, Standardization> standardize(const ScoreMatrix& m);

/// Deterministic validation split: |val| = round(val_frac * n).
Split make_split(int n, double val_frac, std::uint64_t seed);

ScoreMatrix take_rows(const ScoreMatrix& m, const std::vector<int>& idx);

}  // namespace care
