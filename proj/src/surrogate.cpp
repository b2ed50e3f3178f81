#include "flutterlife/surrogate.hpp"

#include <cmath>

#include "flutterlife/errors.hpp"

namespace flutterlife {

std::vector<Eigen::Vector4d> doe_grid(const DoeBox& box, const std::array<int, 4>& levels) {
  std::array<std::vector<double>, 4> axes;
  for (std::size_t d = 0; d < 4; ++d) {
    const auto [lo, hi] = box.ranges[d];
    const int n = levels[d];
    if (n < 2) throw DataError("doe_grid: needs at least 2 levels per variable");
    if (!(hi > lo)) {
      throw DataError("doe_grid: degenerate range [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "]");
    }
    for (int i = 0; i < n; ++i) {
      axes[d].push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1));
    }
  }
  std::vector<Eigen::Vector4d> grid;
  grid.reserve(static_cast<std::size_t>(levels[0]) * levels[1] * levels[2] * levels[3]);
  for (double a : axes[0]) {
    for (double b : axes[1]) {
      for (double c : axes[2]) {
        for (double d : axes[3]) {
          grid.emplace_back(a, b, c, d);
        }
      }
    }
  }
  return grid;
}

namespace {

double r_squared_of(const Eigen::VectorXd& y, const Eigen::VectorXd& y_hat) {
  const double mean = y.mean();
  const double ss_tot = (y.array() - mean).square().sum();
  const double ss_res = (y - y_hat).squaredNorm();
  if (!(ss_tot > 0.0)) return 1.0;
  return 1.0 - ss_res / ss_tot;
}

}  // namespace

SurrogateModel fit_surrogate(const std::vector<Eigen::Vector4d>& points,
                             const std::vector<double>& responses, const DoeBox& box) {
  if (points.size() != responses.size()) {
    throw DataError("fit_surrogate: point/response count mismatch");
  }
  const Eigen::Index n = static_cast<Eigen::Index>(points.size());
  if (n < 6) throw DataError("fit_surrogate: needs at least 6 points");

  Eigen::MatrixXd design(n, 5);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    design.row(i).head<4>() = points[static_cast<std::size_t>(i)].transpose();
    design(i, 4) = 1.0;
    y(i) = responses[static_cast<std::size_t>(i)];
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < 5) {
    throw DataError("fit_surrogate: rank-deficient design (variables not all spanned)");
  }
  const Eigen::VectorXd coef = qr.solve(y);

  SurrogateModel m;
  m.alpha_v1 = coef(0);
  m.alpha_t1 = coef(1);
  m.beta_v1 = coef(2);
  m.beta_t1 = coef(3);
  m.intercept = coef(4);
  m.doe_box = box;
  m.r_squared = r_squared_of(y, design * coef);

  // Deterministic 20% holdout refit for diagnostics (every 5th point held out).
  std::vector<Eigen::Index> train, test;
  for (Eigen::Index i = 0; i < n; ++i) {
    (i % 5 == 2 ? test : train).push_back(i);
  }
  if (test.size() >= 2 && train.size() >= 5) {
    Eigen::MatrixXd xt(static_cast<Eigen::Index>(train.size()), 5);
    Eigen::VectorXd yt(static_cast<Eigen::Index>(train.size()));
    for (std::size_t i = 0; i < train.size(); ++i) {
      xt.row(static_cast<Eigen::Index>(i)) = design.row(train[i]);
      yt(static_cast<Eigen::Index>(i)) = y(train[i]);
    }
    const Eigen::VectorXd c2 = xt.colPivHouseholderQr().solve(yt);
    Eigen::VectorXd yh(static_cast<Eigen::Index>(test.size()));
    Eigen::VectorXd yo(static_cast<Eigen::Index>(test.size()));
    for (std::size_t i = 0; i < test.size(); ++i) {
      yh(static_cast<Eigen::Index>(i)) = design.row(test[i]) * c2;
      yo(static_cast<Eigen::Index>(i)) = y(test[i]);
    }
    m.holdout_r_squared = r_squared_of(yo, yh);
  } else {
    m.holdout_r_squared = m.r_squared;
  }
  return m;
}

}  // namespace flutterlife
