#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

namespace flutterlife {

// Per-variable (lo, hi) ranges in the order f_v1, f_t1, zeta_v1, zeta_t1.
struct DoeBox {
  std::array<std::pair<double, double>, 4> ranges;

  bool contains(const Eigen::Vector4d& x) const {
    for (int i = 0; i < 4; ++i) {
      if (x(i) < ranges[static_cast<std::size_t>(i)].first ||
          x(i) > ranges[static_cast<std::size_t>(i)].second) {
        return false;
      }
    }
    return true;
  }
};

// Linear map U_cr ~ a_v1 f_v1 + a_t1 f_t1 + b_v1 z_v1 + b_t1 z_t1 + c.
struct SurrogateModel {
  double alpha_v1 = 0.0;
  double alpha_t1 = 0.0;
  double beta_v1 = 0.0;
  double beta_t1 = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double holdout_r_squared = 0.0;
  DoeBox doe_box;

  double predict(double f_v1, double f_t1, double zeta_v1, double zeta_t1) const {
    return alpha_v1 * f_v1 + alpha_t1 * f_t1 + beta_v1 * zeta_v1 + beta_t1 * zeta_t1 +
           intercept;
  }
  double predict(const Eigen::Vector4d& x) const {
    return predict(x(0), x(1), x(2), x(3));
  }
  bool inside_box(const Eigen::Vector4d& x) const { return doe_box.contains(x); }
};

// Full-factorial grid over the box, lexicographic with the last variable
// fastest; every dimension needs levels >= 2 and a non-degenerate range.
std::vector<Eigen::Vector4d> doe_grid(const DoeBox& box, const std::array<int, 4>& levels);

// Ordinary least squares of responses against the four variables plus an
// intercept. R^2 is in-sample; a deterministic 20% holdout split gives the
// diagnostic holdout_r_squared. Throws DataError on a rank-deficient design.
SurrogateModel fit_surrogate(const std::vector<Eigen::Vector4d>& points,
                             const std::vector<double>& responses, const DoeBox& box);

}  // namespace flutterlife
