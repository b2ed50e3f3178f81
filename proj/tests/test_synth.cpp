#include <doctest.h>

#include "flutterlife/errors.hpp"
#include "flutterlife/synth.hpp"
#include "helpers.hpp"

using namespace flutterlife;

namespace {

SyntheticModeSpec single_mode(double f, double zeta, double s_psd, Eigen::Index chans = 1) {
  SyntheticModeSpec m;
  m.frequency = f;
  m.damping = zeta;
  m.excitation_psd = s_psd;
  m.shape = Eigen::VectorXd::Constant(chans, 1.0 / std::sqrt(static_cast<double>(chans)));
  return m;
}

}  // namespace

TEST_CASE("no excitation and no noise gives an all-zero segment") {
  const auto seg = simulate_modal_response({single_mode(0.5, 0.01, 0.0)}, 0.0, 600.0, 12.5, 3);
  CHECK(seg.samples.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("seed determinism and seed sensitivity") {
  const auto a = simulate_modal_response({single_mode(0.5, 0.01, 1e-6)}, 1e-8, 600.0, 12.5, 11);
  const auto b = simulate_modal_response({single_mode(0.5, 0.01, 1e-6)}, 1e-8, 600.0, 12.5, 11);
  const auto c = simulate_modal_response({single_mode(0.5, 0.01, 1e-6)}, 1e-8, 600.0, 12.5, 12);
  CHECK((a.samples.array() == b.samples.array()).all());
  CHECK(!(a.samples.array() == c.samples.array()).all());
}

TEST_CASE("preconditions are enforced") {
  CHECK_THROWS_AS(simulate_modal_response({single_mode(1.0, 0.01, 1.0)}, 0.0, 600.0, 15.0, 1),
                  DataError);  // fs <= 20 f
  CHECK_THROWS_AS(simulate_modal_response({single_mode(0.1, 0.01, 1.0)}, 0.0, 10.0, 10.0, 1),
                  DataError);  // too few samples
}

TEST_CASE("spectral peak lands within one bin of the modal frequency") {
  const double f0 = 0.095, fs = 50.0;
  const auto seg =
      simulate_modal_response({single_mode(f0, 0.005, 1e-6, 2)}, 1e-9, 3600.0, fs, 21);
  const auto psd = oracle::periodogram_fft(seg.samples.col(0), fs);
  std::size_t peak = 0;
  for (std::size_t i = 1; i < psd.value.size(); ++i) {
    if (psd.value[i] > psd.value[peak]) peak = i;
  }
  const double df = psd.freq[1] - psd.freq[0];
  CHECK(std::fabs(psd.freq[peak] - f0) <= df * 1.001);
}

TEST_CASE("half-power bandwidth of the simulated peak is about 2 zeta f") {
  const double f0 = 0.5, zeta = 0.01, fs = 12.5;
  // Average raw periodograms over seeds to tame chi-squared scatter.
  std::vector<double> avg;
  std::vector<double> freq;
  const int n_seeds = 10;
  for (int s = 0; s < n_seeds; ++s) {
    const auto seg = simulate_modal_response({single_mode(f0, zeta, 1e-6)}, 0.0, 3600.0, fs,
                                             100 + static_cast<std::uint64_t>(s));
    const auto psd = oracle::periodogram_fft(seg.samples.col(0), fs);
    if (avg.empty()) {
      avg.assign(psd.value.size(), 0.0);
      freq = psd.freq;
    }
    for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += psd.value[i] / n_seeds;
  }
  // Light smoothing (7 bins against a ~36-bin-wide peak) so the max bin is
  // not an upward noise excursion.
  {
    std::vector<double> sm(avg.size());
    const int hw = 3;
    for (std::size_t i = 0; i < avg.size(); ++i) {
      double s = 0.0;
      int c = 0;
      for (int k = -hw; k <= hw; ++k) {
        const auto j = static_cast<std::ptrdiff_t>(i) + k;
        if (j < 0 || j >= static_cast<std::ptrdiff_t>(avg.size())) continue;
        s += avg[static_cast<std::size_t>(j)];
        ++c;
      }
      sm[i] = s / c;
    }
    avg = sm;
  }
  std::size_t peak = 0;
  for (std::size_t i = 1; i < avg.size(); ++i) {
    if (avg[i] > avg[peak]) peak = i;
  }
  const double half = avg[peak] / 2.0;
  double f_lo = freq.front(), f_hi = freq.back();
  for (std::size_t i = peak; i-- > 0;) {
    if (avg[i] < half) {
      const double t = (half - avg[i]) / (avg[i + 1] - avg[i]);
      f_lo = freq[i] + t * (freq[i + 1] - freq[i]);
      break;
    }
  }
  for (std::size_t i = peak + 1; i < avg.size(); ++i) {
    if (avg[i] < half) {
      const double t = (avg[i - 1] - half) / (avg[i - 1] - avg[i]);
      f_hi = freq[i - 1] + t * (freq[i] - freq[i - 1]);
      break;
    }
  }
  const double width = f_hi - f_lo;
  const double expected = 2.0 * zeta * f0;
  CHECK(std::fabs(width - expected) / expected < 0.25);
}

TEST_CASE("output psd tracks the analytic modal transfer plus noise") {
  const double f0 = 0.5, zeta = 0.02, fs = 12.5, s_psd = 1e-6, noise = 1e-7;
  const SyntheticModeSpec mode = single_mode(f0, zeta, s_psd);
  std::vector<double> avg;
  std::vector<double> freq;
  const int n_seeds = 10;
  for (int s = 0; s < n_seeds; ++s) {
    const auto seg = simulate_modal_response({mode}, noise, 3600.0, fs,
                                             500 + static_cast<std::uint64_t>(s));
    const auto psd = oracle::periodogram_fft(seg.samples.col(0), fs);
    if (avg.empty()) {
      avg.assign(psd.value.size(), 0.0);
      freq = psd.freq;
    }
    for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += psd.value[i] / n_seeds;
  }
  // Geometric-mean ratio across the peak neighborhood, within 3 dB.
  const double w = 2.0 * zeta * f0;
  double log_ratio = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < freq.size(); ++i) {
    if (std::fabs(freq[i] - f0) > 3.0 * w) continue;
    const double model = modal_acceleration_psd(mode, freq[i]) + noise;
    log_ratio += std::log10(avg[i] / model);
    ++count;
  }
  REQUIRE(count > 10);
  const double mean_db = 10.0 * log_ratio / count;
  CHECK(std::fabs(mean_db) < 3.0);
}

TEST_CASE("channel mixing follows the mode shape") {
  SyntheticModeSpec m = single_mode(0.5, 0.01, 1e-6, 2);
  m.shape << 1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0);
  const auto seg = simulate_modal_response({m}, 0.0, 600.0, 12.5, 77);
  // Antisymmetric shape with no noise: channels are exact negatives.
  CHECK((seg.samples.col(0).array() + seg.samples.col(1).array()).abs().maxCoeff() < 1e-14);
}
