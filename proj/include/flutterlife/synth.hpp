#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "flutterlife/ingest.hpp"

namespace flutterlife {

// Ground-truth mode for synthetic ambient-vibration records.
struct SyntheticModeSpec {
  double frequency = 0.0;      // Hz
  double damping = 0.0;        // ratio, (0,1)
  Eigen::VectorXd shape;       // unit-norm, one entry per channel
  double excitation_psd = 0.0; // one-sided PSD of the modal excitation
};

// Simulates each mode as an independent SDOF oscillator driven by white
// noise (exact state-transition discretization at a substep rate >= 10 fs,
// then decimated), mixes modal accelerations through the mode shapes, and
// adds white measurement noise of one-sided PSD noise_psd per channel.
// Deterministic for a fixed seed.
AccelerationSegment simulate_modal_response(
    const std::vector<SyntheticModeSpec>& modes,
    double noise_psd,
    double duration_s,
    double fs_hz,
    std::uint64_t seed,
    UtcTime start_time = 0,
    const std::vector<std::string>& channel_ids = {});

// Analytic one-sided acceleration PSD of a single mode at frequency f:
// |[(b^2-1) + i 2 zeta b]^-1|^2 * S with b = f_mode / f.
double modal_acceleration_psd(const SyntheticModeSpec& mode, double f);

}  // namespace flutterlife
