#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace flutterlife {

enum class DistFamily { Normal, Lognormal, Gamma, Gev, Gumbel };

std::string family_name(DistFamily f);
DistFamily family_from_name(const std::string& name);

// A fitted univariate distribution plus an additive location shift, so any
// family (including positive-support ones) can be re-centered exactly.
struct Distribution {
  DistFamily family = DistFamily::Normal;
  // Normal: (mu, sigma); Lognormal: (mu, sigma) of ln x;
  // Gamma: (shape a, scale b); GEV: (k, mu, sigma); Gumbel: (mu, sigma).
  Eigen::Vector3d params = Eigen::Vector3d::Zero();
  double shift = 0.0;

  double pdf(double x) const;
  double cdf(double x) const;
  double quantile(double p) const;
  double mean() const;
  double variance() const;
  double sample(std::mt19937_64& rng) const;

  // Support bounds after the shift (may be +-infinity).
  double support_lo() const;
  double support_hi() const;

  // Returns a copy whose mean equals the target (adjusting only the shift).
  Distribution with_mean(double target_mean) const;
};

// Maximum-likelihood fits. Throw DataError on degenerate input
// (fewer than 2 samples, zero variance, or non-positive samples where the
// family requires positivity).
Distribution fit_normal_mle(const std::vector<double>& x);
Distribution fit_lognormal_mle(const std::vector<double>& x);
Distribution fit_gamma_mle(const std::vector<double>& x);
Distribution fit_gev_mle(const std::vector<double>& x);

// Scalar special functions used by the families above.
double regularized_gamma_p(double a, double x);  // P(a,x)
double digamma(double x);
double normal_quantile(double p);  // standard normal inverse CDF

// One-sample Kolmogorov-Smirnov test against a fully specified CDF.
struct KsResult {
  double d = 0.0;  // sup |F_empirical - F_model|
  double p = 0.0;  // asymptotic p-value of sqrt(n) * D
};
KsResult ks_test(std::vector<double> samples, const Distribution& model);

// Asymptotic Kolmogorov distribution Q(lambda) = P(sup > lambda).
double kolmogorov_q(double lambda);

}  // namespace flutterlife
