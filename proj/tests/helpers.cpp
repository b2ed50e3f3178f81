#include "helpers.hpp"

#include <unsupported/Eigen/FFT>

namespace oracle {

Psd periodogram_fft(const Eigen::VectorXd& x, double fs) {
  const Eigen::Index n = x.size();
  const double mean = x.mean();
  std::vector<double> t(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) t[static_cast<std::size_t>(j)] = x(j) - mean;
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> f;
  fft.fwd(f, t);
  const Eigen::Index nq = n / 2 + 1;
  Psd out;
  out.freq.resize(static_cast<std::size_t>(nq - 1));
  out.value.resize(static_cast<std::size_t>(nq - 1));
  for (Eigen::Index k = 1; k < nq; ++k) {
    out.freq[static_cast<std::size_t>(k - 1)] =
        static_cast<double>(k) * fs / static_cast<double>(n);
    out.value[static_cast<std::size_t>(k - 1)] =
        (2.0 / (fs * static_cast<double>(n))) * std::norm(f[static_cast<std::size_t>(k)]);
  }
  return out;
}

double bessel_j_series(int order, double x) {
  // J_n(x) = sum_m (-1)^m / (m! (m+n)!) (x/2)^(2m+n)
  const double half = 0.5 * x;
  double term = 1.0;
  for (int i = 1; i <= order; ++i) term *= half / static_cast<double>(i);
  double sum = term;
  for (int m = 1; m < 60; ++m) {
    term *= -half * half / (static_cast<double>(m) * static_cast<double>(m + order));
    sum += term;
    if (std::fabs(term) < 1e-18 * std::fabs(sum)) break;
  }
  return sum;
}

double bessel_y_series(int order, double x) {
  // Neumann series for integer order via the standard limit expressions.
  constexpr double euler = 0.57721566490153286060651209008240243;
  const double half = 0.5 * x;
  if (order == 0) {
    // Y0 = (2/pi)[(ln(x/2)+gamma) J0 + sum_{m>=1} (-1)^{m+1} H_m (x^2/4)^m / (m!)^2]
    double sum = 0.0;
    double term = 1.0;
    double harmonic = 0.0;
    for (int m = 1; m < 60; ++m) {
      term *= half * half / (static_cast<double>(m) * static_cast<double>(m));
      harmonic += 1.0 / static_cast<double>(m);
      const double add = ((m % 2) ? 1.0 : -1.0) * harmonic * term;
      sum += add;
      if (std::fabs(add) < 1e-18 * std::max(1.0, std::fabs(sum))) break;
    }
    return (2.0 / std::numbers::pi) *
           ((std::log(half) + euler) * bessel_j_series(0, x) + sum);
  }
  // Y1 from the Wronskian-style expansion:
  // Y1 = (2/pi)[ln(x/2)+gamma] J1 - (2/(pi x)) - (x/(2 pi)) * sum_m ...
  double sum = 0.0;
  double term = 1.0;  // m = 0 term handled below
  double h_m = 0.0;   // H_0 = 0
  double h_m1 = 1.0;  // H_1
  // sum_{m=0}^inf (-1)^m (H_m + H_{m+1}) / (m! (m+1)!) (x/2)^{2m}
  double factorial_ratio = 1.0;  // 1/(0! 1!)
  for (int m = 0; m < 60; ++m) {
    const double add = ((m % 2) ? -1.0 : 1.0) * (h_m + h_m1) * factorial_ratio * term;
    sum += add;
    if (m > 2 && std::fabs(add) < 1e-18 * std::max(1.0, std::fabs(sum))) break;
    term *= half * half;
    factorial_ratio /= (static_cast<double>(m + 1) * static_cast<double>(m + 2));
    h_m += 1.0 / static_cast<double>(m + 1);
    h_m1 += 1.0 / static_cast<double>(m + 2);
  }
  return (2.0 / std::numbers::pi) * (std::log(half) + euler) * bessel_j_series(1, x) -
         (2.0 / (std::numbers::pi * x)) - (half / std::numbers::pi) * sum;
}

}  // namespace oracle
