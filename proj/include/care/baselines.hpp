#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>

#include "care/dataio.hpp"

namespace care {

struct BaselineOutput {
  Eigen::VectorXd scores;  // real scores (AVG) or 0/1 labels (MV, DS)
  std::string method;
  bool tie_warning = false;
};

/// Per-item arithmetic mean of raw scores.
BaselineOutput avg(const ScoreMatrix& m);

/// Majority vote. Scoring tasks take the mode of scores rounded to the
/// integer grid (ties toward the value nearest the item mean); binary tasks
/// threshold each judge's score (default 4.5) and take the majority, exact
/// ties resolving to the positive class with a warning.
BaselineOutput mv(const ScoreMatrix& m,
                  std::optional<double> threshold = std::nullopt);

/// Dawid-Skene EM on binary votes with per-judge per-class accuracies,
/// initialized from majority vote.
struct DawidSkeneResult {
  BaselineOutput output;
  Eigen::VectorXd posterior;         // Pr(label=1)
  Eigen::VectorXd accuracy_class1;   // per judge: Pr(vote 1 | true 1)
  Eigen::VectorXd accuracy_class0;   // per judge: Pr(vote 0 | true 0)
  std::vector<double> loglik_trace;
};
DawidSkeneResult dawid_skene(const ScoreMatrix& votes, int max_iter = 500,
                             double tol = 1e-6);

}  // namespace care
