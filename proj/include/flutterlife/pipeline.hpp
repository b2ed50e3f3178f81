#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "flutterlife/bayes_id.hpp"
#include "flutterlife/flutter.hpp"
#include "flutterlife/lifecycle.hpp"
#include "flutterlife/surrogate.hpp"
#include "flutterlife/trend.hpp"

namespace flutterlife {

enum class Stage { Simulate, Identify, Trend, Flutter, Surrogate, Lifecycle, Report };
Stage stage_from_name(const std::string& name);
const char* stage_name(Stage s);

struct SimulatedModeConfig {
  std::string band;              // which band this mode drives
  double frequency = 0.0;        // Hz at month 0
  double damping = 0.0;
  double excitation_psd = 0.0;
  std::vector<double> shape;     // unit-norm over channels
  double trend_rate_per_month = 0.0;  // exponential drift of the frequency
  double frequency_jitter = 0.0;      // lognormal-ish monthly scatter, std dev (Hz)
  double damping_jitter_rel = 0.0;    // relative scatter of the damping ratio
};

struct SimulateConfig {
  int months = 0;
  int segments_per_month = 1;
  double fs_hz = 0.0;
  double duration_s = 3600.0;
  std::string start = "2010-01-15T03:00:00Z";
  std::vector<std::string> channels;
  double noise_psd = 0.0;
  double wind_speed_mps = 3.0;
  double wind_direction_deg = 45.0;
  std::vector<SimulatedModeConfig> modes;
};

struct BandConfig {
  std::string name;
  double f_lo = 0.0;
  double f_hi = 0.0;
  std::string kind;  // "vertical" or "torsional"
};

struct FilterConfig {
  double speed_lo = 2.0;
  double speed_hi = 4.0;
  double hour_lo = 0.0;
  double hour_hi = 7.0;
};

struct TrendConfig {
  std::size_t min_segments_per_month = 10;
  std::set<DistFamily> frequency_families = {DistFamily::Normal, DistFamily::Gev};
  std::set<DistFamily> damping_families = {DistFamily::Lognormal, DistFamily::Gamma,
                                           DistFamily::Gev};
  std::optional<DistFamily> force_frequency_family;
  std::optional<DistFamily> force_damping_family;
};

struct BridgeConfig {
  double deck_width = 0.0;
  double span = 0.0;
  double mass_per_length = 0.0;
  double inertia_per_length = 0.0;
  double air_density = 1.225;
  std::string mode_shape = "sine";        // or path to a sampled-shape CSV
};

struct FlutterStageConfig {
  std::string derivatives = "flat_plate";  // or "csv"
  std::map<Deriv, int> orders;             // default 2, H2 often 4
  std::map<Deriv, std::vector<std::size_t>> exclusions;
  double ur_lo = 5.0;
  double ur_hi = 16.0;
  bool allow_extrapolation = false;
  Eq4Variant variant = Eq4Variant::Corrected;
  double f_v1 = 0.0, f_t1 = 0.0, zeta_v1 = 0.0, zeta_t1 = 0.0;
  bool emit_branch_csv = true;
};

struct SurrogateStageConfig {
  DoeBox box;
  std::array<int, 4> levels = {5, 5, 5, 5};
  double max_excluded_fraction = 0.05;
};

struct LifecycleStageConfig {
  int horizon_years = 100;
  std::vector<DampingScenario> scenarios = {DampingScenario::None,
                                            DampingScenario::Increase30,
                                            DampingScenario::Decrease30};
  int grid_points = 8192;
  std::size_t mc_samples = 1000000;
};

struct PipelineConfig {
  std::uint64_t seed = 20100101;
  int threads = 1;
  double utc_offset_hours = 8.0;
  std::string acceleration_dir = "accel";
  std::string wind_csv = "wind.csv";
  std::string derivative_csv;
  SimulateConfig simulate;
  FilterConfig filter;
  std::vector<BandConfig> bands;
  TrendConfig trend;
  BridgeConfig bridge;
  FlutterStageConfig flutter;
  SurrogateStageConfig surrogate;
  LifecycleStageConfig lifecycle;
  std::vector<std::pair<double, double>> gumbel_points = {{50.0, 46.48}, {100.0, 50.47}};

  std::string config_hash;     // filled on load
  std::string canonical_json;  // canonical dump used for hashing
};

// Parses and schema-validates the JSON configuration; relative data paths
// are later resolved against the output directory.
PipelineConfig load_pipeline_config(const std::string& path);

// Overrides from the command line (applied after load).
struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

// Runs one stage; artifacts land in out_dir. Throws ConfigError / DataError /
// NumericalError, which the CLI maps to exit codes 1 / 2 / 3.
void run_stage(Stage stage, const PipelineConfig& config, const std::string& out_dir);

PipelineConfig apply_overrides(PipelineConfig config, const CliOverrides& overrides);

}  // namespace flutterlife
