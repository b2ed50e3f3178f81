#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "flutterlife/ingest.hpp"

// Test-only oracles, kept independent of the library's implementation paths.
namespace oracle {

// Direct O(N^2) evaluation of the scaled DFT with the identification
// scaling sqrt(2 dt / N); returns all N ordinates for one channel.
inline std::vector<std::complex<double>> naive_scaled_dft(const std::vector<double>& x,
                                                          double dt) {
  const std::size_t n = x.size();
  const double scale = std::sqrt(2.0 * dt / static_cast<double>(n));
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      const double phase = -2.0 * std::numbers::pi * static_cast<double>(k) *
                           static_cast<double>(j) / static_cast<double>(n);
      acc += x[j] * std::complex<double>(std::cos(phase), std::sin(phase));
    }
    out[k] = scale * acc;
  }
  return out;
}

// Plain averaged periodogram (no overlap, rectangular window) of one channel;
// returns (frequency, one-sided PSD) pairs.
struct Psd {
  std::vector<double> freq;
  std::vector<double> value;
};

inline Psd periodogram(const Eigen::VectorXd& x, double fs) {
  const Eigen::Index n = x.size();
  const double mean = x.mean();
  const Eigen::Index nq = n / 2 + 1;
  Psd out;
  out.freq.resize(static_cast<std::size_t>(nq - 1));
  out.value.resize(static_cast<std::size_t>(nq - 1));
  for (Eigen::Index k = 1; k < nq; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double phase = -2.0 * std::numbers::pi * static_cast<double>(k) *
                           static_cast<double>(j) / static_cast<double>(n);
      acc += (x(j) - mean) * std::complex<double>(std::cos(phase), std::sin(phase));
    }
    out.freq[static_cast<std::size_t>(k - 1)] =
        static_cast<double>(k) * fs / static_cast<double>(n);
    out.value[static_cast<std::size_t>(k - 1)] =
        (2.0 / (fs * static_cast<double>(n))) * std::norm(acc);
  }
  return out;
}

// FFT-based periodogram for long records (same definition as above).
Psd periodogram_fft(const Eigen::VectorXd& x, double fs);

// Series evaluations of J0, J1, Y0, Y1 for small arguments; used as an
// independent check of the circulation function.
double bessel_j_series(int order, double x);
double bessel_y_series(int order, double x);

inline double rel_diff(double a, double b) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-300});
}

}  // namespace oracle
