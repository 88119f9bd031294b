#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <vector>

namespace care {

/// Dense third-order tensor, column-major in the first index.
class Tensor3 {
 public:
  Tensor3() : dims_{0, 0, 0} {}
  Tensor3(int d0, int d1, int d2)
      : dims_{d0, d1, d2},
        data_(static_cast<size_t>(d0) * d1 * d2, 0.0) {}

  int dim(int k) const { return dims_[k]; }
  const std::array<int, 3>& dims() const { return dims_; }

  double& operator()(int i, int j, int k) {
    return data_[static_cast<size_t>(i) + dims_[0] * (j + static_cast<size_t>(dims_[1]) * k)];
  }
  double operator()(int i, int j, int k) const {
    return data_[static_cast<size_t>(i) + dims_[0] * (j + static_cast<size_t>(dims_[1]) * k)];
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  size_t size() const { return data_.size(); }

  double norm() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return std::sqrt(s);
  }

  /// Mode-k unfolding, dim(k) x (product of the other two dims). Columns are
  /// ordered with the lower remaining mode varying fastest.
  Eigen::MatrixXd unfold(int mode) const;

  /// Adds w * a (x) b (x) c.
  void add_rank_one(double w, const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                    const Eigen::VectorXd& c);

 private:
  std::array<int, 3> dims_;
  std::vector<double> data_;
};

}  // namespace care
