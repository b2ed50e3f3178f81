#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "flutterlife/time_utils.hpp"

namespace flutterlife {

// One hour (typically) of multichannel acceleration samples.
struct AccelerationSegment {
  UtcTime start_time = 0;
  double sample_interval = 0.0;  // seconds
  std::vector<std::string> channel_ids;
  Eigen::MatrixXd samples;  // N rows x n channels, m/s^2

  Eigen::Index sample_count() const { return samples.rows(); }
  Eigen::Index channel_count() const { return samples.cols(); }
  double duration() const { return sample_interval * static_cast<double>(samples.rows()); }
};

struct WindRecord {
  UtcTime start_time = 0;
  double mean_speed = 0.0;    // m/s, hourly average
  double direction = 0.0;     // degrees, [0, 360)
};

// Scaled FFT ordinates k = 2..Nq of a segment: frequencies f_k = (k-1)/(N dt)
// and stacked real/imaginary vectors Z_k = [Re F_k; Im F_k] (2n rows each).
struct FftData {
  Eigen::VectorXd frequencies;  // Nq-1 entries
  Eigen::MatrixXd z;            // 2n rows x (Nq-1) columns
  double sample_interval = 0.0;
  Eigen::Index sample_count = 0;

  Eigen::Index channel_count() const { return z.rows() / 2; }
  Eigen::Index ordinate_count() const { return z.cols(); }
};

// Acceleration CSV: '#'-prefixed header lines fs_hz=, start=, channels=,
// then one row per sample with one decimal column per channel.
AccelerationSegment load_acceleration_csv(const std::string& path);
void write_acceleration_csv(const AccelerationSegment& segment, const std::string& path);

// Wind CSV with header row: start,mean_speed_mps,direction_deg
std::vector<WindRecord> load_wind_csv(const std::string& path);
void write_wind_csv(const std::vector<WindRecord>& records, const std::string& path);

// Keeps segments whose matching hourly wind record (by clock hour of the
// start time) lies in [speed_lo, speed_hi] and whose local start hour lies
// in [hour_lo, hour_hi). Segments without a wind record are skipped and
// counted in *unmatched if given. Order preserved.
std::vector<AccelerationSegment> filter_segments(
    const std::vector<AccelerationSegment>& segments,
    const std::vector<WindRecord>& winds,
    double speed_lo = 2.0, double speed_hi = 4.0,
    double hour_lo = 0.0, double hour_hi = 7.0,
    double utc_offset_hours = 0.0,
    std::size_t* unmatched = nullptr);

// Splits a long record into one-hour windows aligned to clock hours; a
// partial leading part (up to the first hour boundary) and any partial
// trailing window are dropped.
std::vector<AccelerationSegment> split_hourly(const AccelerationSegment& segment);

// FFT per the identification scaling sqrt(2 dt / N), per-channel mean
// removed first; retains ordinates k = 2..Nq with Nq = int(N/2)+1.
FftData scaled_fft(const AccelerationSegment& segment);

}  // namespace flutterlife
