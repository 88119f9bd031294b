#include "care/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace care {

BaselineOutput avg(const ScoreMatrix& m) {
  BaselineOutput out;
  out.method = "avg";
  out.scores = m.values.rowwise().mean();
  return out;
}

BaselineOutput mv(const ScoreMatrix& m, std::optional<double> threshold) {
  BaselineOutput out;
  out.method = "mv";
  const int n = m.n(), p = m.p();
  out.scores.resize(n);

  const bool binary = m.task_kind == TaskKind::binary ||
                      m.task_kind == TaskKind::preference || threshold.has_value();
  if (binary) {
    const double th = threshold.value_or(4.5);
    for (int i = 0; i < n; ++i) {
      int ones = 0;
      for (int j = 0; j < p; ++j) ones += (m.values(i, j) > th) ? 1 : 0;
      if (2 * ones == p) {
        out.scores(i) = 1.0;  // exact tie -> positive class
        out.tie_warning = true;
      } else {
        out.scores(i) = (2 * ones > p) ? 1.0 : 0.0;
      }
    }
  } else {
    for (int i = 0; i < n; ++i) {
      std::map<long, int> counts;
      for (int j = 0; j < p; ++j)
        ++counts[static_cast<long>(std::llround(m.values(i, j)))];
      const double item_mean = m.values.row(i).mean();
      long best = counts.begin()->first;
      int best_cnt = counts.begin()->second;
      for (const auto& [v, c] : counts) {
        if (c > best_cnt ||
            (c == best_cnt && std::abs(v - item_mean) < std::abs(best - item_mean))) {
          best = v;
          best_cnt = c;
        }
      }
      out.scores(i) = static_cast<double>(best);
    }
  }
  return out;
}

DawidSkeneResult dawid_skene(const ScoreMatrix& votes, int max_iter, double tol) {
  const int n = votes.n(), p = votes.p();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) {
      const double v = votes.values(i, j);
      if (v != 0.0 && v != 1.0)
        throw std::invalid_argument("dawid_skene requires binary 0/1 votes");
    }

  DawidSkeneResult res;
  // Initialize posteriors from majority vote (resolves label switching).
  Eigen::VectorXd post(n);
  for (int i = 0; i < n; ++i) {
    const double frac = votes.values.row(i).sum() / p;
    post(i) = frac > 0.5 ? 0.9 : (frac < 0.5 ? 0.1 : 0.5);
  }

  Eigen::VectorXd acc1(p), acc0(p);
  double prior1 = 0.5;
  const double clamp_lo = 1e-4, clamp_hi = 1.0 - 1e-4;

  for (int it = 0; it < max_iter; ++it) {
    // M-step: per-judge class-conditional accuracies.
    const double w1 = post.sum();
    const double w0 = n - w1;
    prior1 = std::clamp(w1 / n, clamp_lo, clamp_hi);
    for (int j = 0; j < p; ++j) {
      double hit1 = 0.0, hit0 = 0.0;
      for (int i = 0; i < n; ++i) {
        hit1 += post(i) * votes.values(i, j);
        hit0 += (1.0 - post(i)) * (1.0 - votes.values(i, j));
      }
      acc1(j) = std::clamp(hit1 / std::max(w1, 1e-12), clamp_lo, clamp_hi);
      acc0(j) = std::clamp(hit0 / std::max(w0, 1e-12), clamp_lo, clamp_hi);
    }

    // E-step.
    double loglik = 0.0;
    double max_change = 0.0;
    for (int i = 0; i < n; ++i) {
      double l1 = std::log(prior1), l0 = std::log(1.0 - prior1);
      for (int j = 0; j < p; ++j) {
        if (votes.values(i, j) > 0.5) {
          l1 += std::log(acc1(j));
          l0 += std::log(1.0 - acc0(j));
        } else {
          l1 += std::log(1.0 - acc1(j));
          l0 += std::log(acc0(j));
        }
      }
      const double mx = std::max(l1, l0);
      const double z = std::exp(l1 - mx) + std::exp(l0 - mx);
      const double np = std::exp(l1 - mx) / z;
      loglik += mx + std::log(z);
      max_change = std::max(max_change, std::abs(np - post(i)));
      post(i) = np;
    }
    // The clamp on the accuracies makes this projected EM, so the observed
    // log-likelihood may dip by a roundoff-sized amount; only flag clear
    // non-monotonicity relative to the magnitude of the objective.
    if (!res.loglik_trace.empty() &&
        loglik < res.loglik_trace.back() -
                     1e-6 * (std::abs(res.loglik_trace.back()) + 1.0))
      throw std::runtime_error("dawid_skene log-likelihood decreased");
    res.loglik_trace.push_back(loglik);
    if (max_change < tol) break;
  }

  res.posterior = post;
  res.accuracy_class1 = acc1;
  res.accuracy_class0 = acc0;
  res.output.method = "ds";
  res.output.scores.resize(n);
  for (int i = 0; i < n; ++i) res.output.scores(i) = post(i) >= 0.5 ? 1.0 : 0.0;
  return res;
}

}  // namespace care
