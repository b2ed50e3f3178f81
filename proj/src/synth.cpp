#include "flutterlife/synth.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <numbers>
#include <random>

#include "flutterlife/errors.hpp"

namespace flutterlife {

namespace {

// Exact zero-order-hold discretization of eta'' + 2 z w eta' + w^2 eta = p.
struct SdofDiscrete {
  Eigen::Matrix2d phi;   // state transition over one substep
  Eigen::Vector2d gamma; // input map for piecewise-constant p
};

SdofDiscrete discretize_sdof(double omega, double zeta, double h) {
  Eigen::Matrix2d a;
  a << 0.0, 1.0, -omega * omega, -2.0 * zeta * omega;
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
  m.topLeftCorner<2, 2>() = a;
  m(1, 2) = 1.0;  // input enters the velocity equation
  m *= h;
  const Eigen::Matrix3d em = m.exp();
  SdofDiscrete d;
  d.phi = em.topLeftCorner<2, 2>();
  d.gamma = em.topRightCorner<2, 1>();
  if (!d.phi.allFinite() || !d.gamma.allFinite()) {
    throw NumericalError("simulate_modal_response: state transition not finite");
  }
  return d;
}

// Stationary state covariance of x+ = Phi x + Gamma p, Var(p) = q.
Eigen::Matrix2d stationary_covariance(const SdofDiscrete& d, double q) {
  const Eigen::Matrix2d qd = q * d.gamma * d.gamma.transpose();
  Eigen::Matrix4d lhs = Eigen::Matrix4d::Identity();
  // I - Phi (x) Phi acting on vec(P)
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      for (int k = 0; k < 2; ++k) {
        for (int l = 0; l < 2; ++l) {
          lhs(i * 2 + j, k * 2 + l) -= d.phi(i, k) * d.phi(j, l);
        }
      }
    }
  }
  Eigen::Vector4d rhs;
  rhs << qd(0, 0), qd(0, 1), qd(1, 0), qd(1, 1);
  const Eigen::Vector4d v = lhs.partialPivLu().solve(rhs);
  Eigen::Matrix2d p;
  p << v(0), v(1), v(2), v(3);
  return 0.5 * (p + p.transpose());
}

}  // namespace

double modal_acceleration_psd(const SyntheticModeSpec& mode, double f) {
  const double beta = mode.frequency / f;
  const double re = beta * beta - 1.0;
  const double im = 2.0 * mode.damping * beta;
  return mode.excitation_psd / (re * re + im * im);
}

AccelerationSegment simulate_modal_response(
    const std::vector<SyntheticModeSpec>& modes,
    double noise_psd,
    double duration_s,
    double fs_hz,
    std::uint64_t seed,
    UtcTime start_time,
    const std::vector<std::string>& channel_ids) {
  if (modes.empty()) throw DataError("simulate_modal_response: no modes given");
  const Eigen::Index n_chan = modes.front().shape.size();
  double f_max = 0.0;
  for (const auto& m : modes) {
    if (m.shape.size() != n_chan) {
      throw DataError("simulate_modal_response: inconsistent shape lengths");
    }
    if (!(m.frequency > 0.0) || !(m.damping > 0.0) || m.damping >= 1.0 ||
        m.excitation_psd < 0.0) {
      throw DataError("simulate_modal_response: invalid mode parameters");
    }
    f_max = std::max(f_max, m.frequency);
  }
  if (!(fs_hz > 20.0 * f_max)) {
    throw DataError("simulate_modal_response: fs must exceed 20x the highest mode");
  }
  const auto n_samples = static_cast<Eigen::Index>(std::llround(duration_s * fs_hz));
  if (n_samples < 4096) {
    throw DataError("simulate_modal_response: duration*fs must be at least 4096");
  }

  const int sub = 10;  // substep factor
  const double h = 1.0 / (fs_hz * sub);
  const double fs_sub = fs_hz * static_cast<double>(sub);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);

  AccelerationSegment seg;
  seg.start_time = start_time;
  seg.sample_interval = 1.0 / fs_hz;
  if (channel_ids.empty()) {
    for (Eigen::Index c = 0; c < n_chan; ++c) {
      seg.channel_ids.push_back("CH" + std::to_string(c + 1));
    }
  } else {
    if (static_cast<Eigen::Index>(channel_ids.size()) != n_chan) {
      throw DataError("simulate_modal_response: channel id count mismatch");
    }
    seg.channel_ids = channel_ids;
  }
  seg.samples.setZero(n_samples, n_chan);

  for (const auto& mode : modes) {
    const double omega = 2.0 * std::numbers::pi * mode.frequency;
    const SdofDiscrete d = discretize_sdof(omega, mode.damping, h);
    // Discrete white drive with one-sided PSD S at the substep rate.
    const double p_var = mode.excitation_psd * fs_sub / 2.0;
    const double p_std = std::sqrt(p_var);

    Eigen::Vector2d state = Eigen::Vector2d::Zero();
    if (p_var > 0.0) {
      // Start from the stationary distribution to avoid transients.
      const Eigen::Matrix2d p_inf = stationary_covariance(d, p_var);
      Eigen::LLT<Eigen::Matrix2d> llt(p_inf);
      if (llt.info() == Eigen::Success) {
        state = llt.matrixL() * Eigen::Vector2d(unit(rng), unit(rng));
      }
    }

    for (Eigen::Index j = 0; j < n_samples; ++j) {
      double accel = 0.0;
      for (int s = 0; s < sub; ++s) {
        const double p = p_std * unit(rng);
        accel = p - 2.0 * mode.damping * omega * state(1) - omega * omega * state(0);
        state = d.phi * state + d.gamma * p;
      }
      // Decimate: keep the acceleration of the last substep in the block.
      seg.samples.row(j) += accel * mode.shape.transpose();
    }
  }

  if (noise_psd > 0.0) {
    const double e_std = std::sqrt(noise_psd * fs_hz / 2.0);
    for (Eigen::Index j = 0; j < n_samples; ++j) {
      for (Eigen::Index c = 0; c < n_chan; ++c) {
        seg.samples(j, c) += e_std * unit(rng);
      }
    }
  }
  return seg;
}

}  // namespace flutterlife
