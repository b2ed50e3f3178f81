#pragma once

#include <Eigen/Dense>
#include <complex>
#include <optional>
#include <string>

#include "flutterlife/ingest.hpp"

namespace flutterlife {

// Resonance band assumed to contain exactly one spectral peak.
struct FrequencyBand {
  std::string name;
  double f_lo = 0.0;
  double f_hi = 0.0;
};

// Modal parameter set: frequency, damping ratio, unit-norm mode shape,
// modal excitation PSD and prediction-error PSD.
struct ModalTheta {
  double frequency = 0.0;
  double damping = 0.0;
  Eigen::VectorXd shape;
  double excitation_psd = 0.0;
  double error_psd = 0.0;
};

enum class IdStatus {
  Converged,
  Skipped,            // no identifiable peak in the band
  NotConverged,       // optimizer hit the iteration cap
  HessianNotPd,       // covariance unavailable; estimate is flagged
};

struct ModalEstimate {
  ModalTheta mpv;
  // Posterior covariance over (f, zeta, S, sigma2, shape components).
  Eigen::MatrixXd covariance;
  double cov_f = 0.0;      // posterior sigma / MPV
  double cov_zeta = 0.0;
  UtcTime segment_time = 0;
  IdStatus status = IdStatus::Skipped;
  bool flagged = false;    // excluded from trend fitting downstream
  int iterations = 0;
  double nll_value = 0.0;
};

// Single-mode spectral model at one frequency ordinate: the (scalar) modal
// response spectral density and the full 2n x 2n covariance of Z_k.
struct SpectralModel {
  std::complex<double> h;
  Eigen::MatrixXd c;
};
SpectralModel spectral_model(const ModalTheta& theta, double f_k);

// Negative log-likelihood over the band ordinates (needs >= 20 of them).
double nll(const ModalTheta& theta, const FftData& fft, const FrequencyBand& band);

// Peak-picking starting point; nullopt when the band has no peak standing
// 3 dB above its edges.
std::optional<ModalTheta> initial_guess(const FftData& fft, const FrequencyBand& band);

ModalEstimate identify_mode(const FftData& fft, const FrequencyBand& band);

}  // namespace flutterlife
