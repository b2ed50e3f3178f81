#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <vector>

#include "flutterlife/distributions.hpp"
#include "flutterlife/surrogate.hpp"
#include "flutterlife/trend.hpp"

namespace flutterlife {

// Annual-extreme site wind, Gumbel with location mu and scale sigma.
struct SiteWindModel {
  double location = 0.0;
  double scale = 1.0;

  double pdf(double s) const;
  double cdf(double s) const;
  double quantile(double p) const;
  double return_speed(double period_years) const;  // quantile(1 - 1/T)
};

// Fits (mu, sigma) to (return period, speed) pairs: exact 2x2 solve for two
// points, least squares on the reduced variate otherwise.
SiteWindModel fit_gumbel_return_periods(
    const std::vector<std::pair<double, double>>& points);

// Density sampled on a uniform grid.
struct GridPdf {
  double x0 = 0.0;  // abscissa of the first sample
  double dx = 1.0;
  Eigen::ArrayXd density;

  double x_at(Eigen::Index i) const { return x0 + dx * static_cast<double>(i); }
  double x_last() const { return x_at(density.size() - 1); }
  double integral() const;  // trapezoidal
  double mean() const;
  double variance() const;
  double stddev() const;
  // Running trapezoidal CDF, linearly interpolated and clamped to [0,1].
  double cdf(double x) const;
  void renormalize();

  static GridPdf from_distribution(const Distribution& dist, double dx,
                                   double tail_mass = 1e-9);
};

struct ConvOptions {
  int grid_points = 8192;   // nominal total grid size
  double margin = 5.0;      // m/s padding beyond the convolved support
  double max_drift = 1e-4;  // pre-renormalization integral tolerance
  double fixed_dx = 0.0;    // > 0 pins the grid spacing (lifecycle sweeps)
};

// Distribution of the affine combination of four independent properties:
// each PDF is scaled by its regression coefficient, the four are convolved
// numerically on a common uniform grid, and the result is shifted by the
// intercept, truncated at zero and renormalized.
GridPdf critical_speed_pdf(const SurrogateModel& model, const std::array<GridPdf, 4>& pdfs,
                           const ConvOptions& options = {});
GridPdf critical_speed_pdf(const SurrogateModel& model,
                           const std::array<Distribution, 4>& dists,
                           const ConvOptions& options = {});

// Monte-Carlo route through the same surrogate; deterministic per seed.
std::vector<double> mc_critical_speed(const SurrogateModel& model,
                                      const std::array<Distribution, 4>& dists,
                                      std::size_t n, std::uint64_t seed);

// P(V_R <= V_S): quadrature of F_R(s) * f_S(s) with step halving.
double failure_probability(const GridPdf& vr_pdf, const SiteWindModel& wind);

struct YearlyReliability {
  int year = 0;
  double p_f = 0.0;
  double vr_mean = 0.0;
  double vr_std = 0.0;
  bool extrapolation = false;  // projected property mean left the DOE box
  DampingScenario scenario = DampingScenario::None;
  GridPdf vr_pdf;
};

struct LifecycleOptions {
  int horizon_years = 100;
  ConvOptions conv;
};

// Year-by-year critical-speed PDFs and failure probabilities under a damping
// scenario. Properties are ordered (f_v1, f_t1, zeta_v1, zeta_t1).
std::vector<YearlyReliability> lifecycle_curve(
    const std::array<DeteriorationModel, 4>& properties, const SurrogateModel& surrogate,
    const SiteWindModel& wind, DampingScenario scenario,
    const LifecycleOptions& options = {});

}  // namespace flutterlife
