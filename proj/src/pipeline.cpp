#include "flutterlife/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <random>
#include <thread>

#include "flutterlife/errors.hpp"
#include "flutterlife/ingest.hpp"
#include "flutterlife/svg.hpp"
#include "flutterlife/synth.hpp"

namespace flutterlife {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body) {
  if (threads <= 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  const int n_threads = std::min<int>(threads, static_cast<int>(count));
  for (int t = 0; t < n_threads; ++t) {
    pool.emplace_back([&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

const json& require(const json& obj, const std::string& key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    throw ConfigError("config: missing required field '" + key + "' in " + where);
  }
  return *it;
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback) {
  const auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  return it->get<T>();
}

std::set<DistFamily> parse_families(const json& arr, const std::string& where) {
  std::set<DistFamily> out;
  for (const auto& v : arr) out.insert(family_from_name(v.get<std::string>()));
  if (out.empty()) throw ConfigError("config: empty family list in " + where);
  return out;
}

DampingScenario scenario_from_name(const std::string& name) {
  if (name == "none") return DampingScenario::None;
  if (name == "increase30") return DampingScenario::Increase30;
  if (name == "decrease30") return DampingScenario::Decrease30;
  throw ConfigError("config: unknown damping scenario '" + name + "'");
}

const char* scenario_name(DampingScenario s) {
  switch (s) {
    case DampingScenario::None: return "none";
    case DampingScenario::Increase30: return "increase30";
    case DampingScenario::Decrease30: return "decrease30";
  }
  return "?";
}

std::string resolve(const std::string& path, const std::string& out_dir) {
  fs::path p(path);
  if (p.is_absolute()) return p.string();
  return (fs::path(out_dir) / p).string();
}

json read_artifact(const std::string& path, const std::string& expected_schema,
                   const PipelineConfig& config) {
  if (!fs::exists(path)) {
    throw ConfigError("missing upstream artifact '" + path + "'; run the producing stage first");
  }
  std::ifstream in(path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DataError("artifact '" + path + "' is not valid JSON: " + e.what());
  }
  if (get_or<std::string>(j, "schema", "") != expected_schema) {
    throw DataError("artifact '" + path + "' has unexpected schema");
  }
  if (get_or<std::string>(j, "config_hash", "") != config.config_hash) {
    throw ConfigError("artifact '" + path +
                      "' was produced under a different configuration; regenerate it");
  }
  return j;
}

void write_artifact(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write artifact '" + path + "'");
  out << j.dump(2) << "\n";
}

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t h = base ^ (a * 0x9e3779b97f4a7c15ull) ^ (b * 0xc2b2ae3d27d4eb4full);
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdull;
  h ^= h >> 33;
  return h;
}

Distribution distribution_from_json(const json& j) {
  Distribution d;
  d.family = family_from_name(j.at("family").get<std::string>());
  const auto params = j.at("params").get<std::vector<double>>();
  for (std::size_t i = 0; i < params.size() && i < 3; ++i) {
    d.params(static_cast<Eigen::Index>(i)) = params[i];
  }
  d.shift = get_or<double>(j, "shift", 0.0);
  return d;
}

json distribution_to_json(const Distribution& d) {
  json j;
  j["family"] = family_name(d.family);
  const int n_params = d.family == DistFamily::Gev ? 3 : 2;
  std::vector<double> params;
  for (int i = 0; i < n_params; ++i) params.push_back(d.params(i));
  j["params"] = params;
  j["shift"] = d.shift;
  return j;
}

FluctuationModel fluctuation_from_json(const json& j) {
  FluctuationModel m;
  m.dist = distribution_from_json(j);
  m.ks_p = get_or<double>(j, "ks_p", 0.0);
  if (j.contains("candidates")) {
    for (const auto& c : j.at("candidates")) {
      FluctuationCandidate cand;
      cand.fit_ok = get_or<bool>(c, "fit_ok", false);
      cand.ks_p = get_or<double>(c, "ks_p", 0.0);
      cand.ks_d = get_or<double>(c, "ks_d", 0.0);
      if (cand.fit_ok) {
        cand.dist = distribution_from_json(c);
      } else {
        cand.dist.family = family_from_name(c.at("family").get<std::string>());
      }
      m.candidates.push_back(cand);
    }
  }
  return m;
}

json fluctuation_to_json(const FluctuationModel& m) {
  json j = distribution_to_json(m.dist);
  j["ks_p"] = m.ks_p;
  json cands = json::array();
  for (const auto& c : m.candidates) {
    json cj;
    if (c.fit_ok) {
      cj = distribution_to_json(c.dist);
    } else {
      cj["family"] = family_name(c.dist.family);
    }
    cj["fit_ok"] = c.fit_ok;
    cj["ks_p"] = c.ks_p;
    cj["ks_d"] = c.ks_d;
    cands.push_back(cj);
  }
  j["candidates"] = cands;
  return j;
}

BridgeModel bridge_from_config(const BridgeConfig& cfg, const std::string& out_dir) {
  if (cfg.mode_shape == "sine") {
    return BridgeModel::with_sine_shapes(cfg.deck_width, cfg.span, cfg.mass_per_length,
                                         cfg.inertia_per_length, cfg.air_density);
  }
  // Sampled shapes: CSV rows x,h_v1,alpha_t1 interpolated linearly.
  const std::string path = resolve(cfg.mode_shape, out_dir);
  std::ifstream in(path);
  if (!in) throw DataError("cannot open mode shape file '" + path + "'");
  auto xs = std::make_shared<std::vector<double>>();
  auto hs = std::make_shared<std::vector<double>>();
  auto as = std::make_shared<std::vector<double>>();
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double x, h, a;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &x, &h, &a) != 3) {
      throw DataError("bad mode shape row '" + line + "' in " + path);
    }
    xs->push_back(x);
    hs->push_back(h);
    as->push_back(a);
  }
  if (xs->size() < 2) throw DataError("mode shape file needs at least 2 rows");
  auto interp = [xs](std::shared_ptr<std::vector<double>> ys) {
    return [xs, ys](double x) {
      const auto& xv = *xs;
      const auto& yv = *ys;
      if (x <= xv.front()) return yv.front();
      if (x >= xv.back()) return yv.back();
      const auto it = std::upper_bound(xv.begin(), xv.end(), x);
      const std::size_t i = static_cast<std::size_t>(it - xv.begin()) - 1;
      const double t = (x - xv[i]) / (xv[i + 1] - xv[i]);
      return yv[i] + t * (yv[i + 1] - yv[i]);
    };
  };
  BridgeModel b;
  b.deck_width = cfg.deck_width;
  b.span = cfg.span;
  b.mass_per_length = cfg.mass_per_length;
  b.inertia_per_length = cfg.inertia_per_length;
  b.air_density = cfg.air_density;
  b.h_v1 = interp(hs);
  b.alpha_t1 = interp(as);
  return b;
}

FlutterDerivativeSet derivatives_from_config(const PipelineConfig& config,
                                             const std::string& out_dir) {
  FlutterDerivativeSet set = [&] {
    if (config.flutter.derivatives == "flat_plate") return theodorsen_derivatives();
    if (config.flutter.derivatives != "csv") {
      throw ConfigError("config: flutter.derivatives must be 'flat_plate' or 'csv'");
    }
    if (config.derivative_csv.empty()) {
      throw ConfigError("config: flutter.derivatives=csv requires paths.derivative_csv");
    }
    const std::string path = resolve(config.derivative_csv, out_dir);
    std::ifstream in(path);
    if (!in) throw DataError("cannot open derivative file '" + path + "'");
    DerivativeMeasurements meas;
    std::string line;
    std::getline(in, line);  // header: derivative,ur,value
    std::size_t row = 1;
    while (std::getline(in, line)) {
      ++row;
      if (line.empty()) continue;
      char name[16];
      double ur, value;
      if (std::sscanf(line.c_str(), "%15[^,],%lf,%lf", name, &ur, &value) != 3) {
        throw DataError("bad derivative row " + std::to_string(row) + " in " + path);
      }
      meas[deriv_from_name(name)].emplace_back(ur, value);
    }
    return fit_derivatives(meas, config.flutter.orders, config.flutter.exclusions);
  }();
  set.set_allow_extrapolation(config.flutter.allow_extrapolation);
  return set;
}

SolveOptions solve_options_from_config(const PipelineConfig& config) {
  SolveOptions opt;
  opt.ur_lo = config.flutter.ur_lo;
  opt.ur_hi = config.flutter.ur_hi;
  opt.variant = config.flutter.variant;
  return opt;
}

// ---------------------------------------------------------------------------
// Stage implementations
// ---------------------------------------------------------------------------

void stage_simulate(const PipelineConfig& config, const std::string& out_dir) {
  const SimulateConfig& sim = config.simulate;
  if (sim.months <= 0 || sim.modes.empty() || sim.channels.empty()) {
    throw ConfigError("config: simulate stage needs months > 0, modes and channels");
  }
  const fs::path accel_dir = resolve(config.acceleration_dir, out_dir);
  fs::create_directories(accel_dir);

  const UtcTime start0 = parse_iso8601(sim.start);
  std::vector<WindRecord> winds;

  for (int m = 0; m < sim.months; ++m) {
    // Month-level ground truth: deterministic drift plus seeded jitter.
    std::mt19937_64 month_rng(mix_seed(config.seed, 0xA11CE, static_cast<std::uint64_t>(m)));
    std::normal_distribution<double> unit(0.0, 1.0);
    std::vector<SyntheticModeSpec> specs;
    for (const auto& mode : sim.modes) {
      SyntheticModeSpec s;
      s.frequency = mode.frequency * std::exp(mode.trend_rate_per_month * m) +
                    mode.frequency_jitter * unit(month_rng);
      s.damping = mode.damping * std::max(0.1, 1.0 + mode.damping_jitter_rel * unit(month_rng));
      s.excitation_psd = mode.excitation_psd;
      s.shape = Eigen::Map<const Eigen::VectorXd>(mode.shape.data(),
                                                  static_cast<Eigen::Index>(mode.shape.size()));
      s.shape.normalize();
      specs.push_back(std::move(s));
    }

    CivilDate d0 = civil_from_time(start0);
    int month = d0.month - 1 + m;
    d0.year += month / 12;
    d0.month = month % 12 + 1;
    const UtcTime month_start = time_from_civil(d0);

    for (int s = 0; s < sim.segments_per_month; ++s) {
      const UtcTime seg_start = month_start + static_cast<UtcTime>(s) * 3600;
      const AccelerationSegment seg = simulate_modal_response(
          specs, sim.noise_psd, sim.duration_s, sim.fs_hz,
          mix_seed(config.seed, static_cast<std::uint64_t>(m) + 1,
                   static_cast<std::uint64_t>(s) + 1),
          seg_start, sim.channels);
      const CivilDate cd = civil_from_time(seg_start);
      char name[64];
      std::snprintf(name, sizeof(name), "accel_%04d%02d%02d_%02d.csv", cd.year, cd.month,
                    cd.day, cd.hour);
      write_acceleration_csv(seg, (accel_dir / name).string());

      WindRecord w;
      w.start_time = seg_start;
      w.mean_speed = sim.wind_speed_mps;
      w.direction = sim.wind_direction_deg;
      winds.push_back(w);
    }
  }
  write_wind_csv(winds, resolve(config.wind_csv, out_dir));
}

const char* id_status_name(IdStatus s) {
  switch (s) {
    case IdStatus::Converged: return "converged";
    case IdStatus::Skipped: return "skipped";
    case IdStatus::NotConverged: return "not_converged";
    case IdStatus::HessianNotPd: return "hessian_not_pd";
  }
  return "?";
}

void stage_identify(const PipelineConfig& config, const std::string& out_dir) {
  if (config.bands.empty()) throw ConfigError("config: identify stage needs bands");
  const std::string wind_path = resolve(config.wind_csv, out_dir);
  const fs::path accel_dir = resolve(config.acceleration_dir, out_dir);
  if (!fs::exists(accel_dir)) {
    throw ConfigError("missing acceleration directory '" + accel_dir.string() + "'");
  }
  const std::vector<WindRecord> winds = load_wind_csv(wind_path);

  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(accel_dir)) {
    if (entry.path().extension() == ".csv") files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    throw DataError("no acceleration CSV files in '" + accel_dir.string() + "'");
  }

  std::vector<AccelerationSegment> segments;
  for (const auto& f : files) segments.push_back(load_acceleration_csv(f));
  std::size_t unmatched = 0;
  segments = filter_segments(segments, winds, config.filter.speed_lo, config.filter.speed_hi,
                             config.filter.hour_lo, config.filter.hour_hi,
                             config.utc_offset_hours, &unmatched);

  struct Row {
    UtcTime time;
    std::size_t band;
    ModalEstimate est;
  };
  std::vector<Row> rows(segments.size() * config.bands.size());
  parallel_for(segments.size(), config.threads, [&](std::size_t i) {
    const FftData fft = scaled_fft(segments[i]);
    for (std::size_t b = 0; b < config.bands.size(); ++b) {
      FrequencyBand band{config.bands[b].name, config.bands[b].f_lo, config.bands[b].f_hi};
      Row& row = rows[i * config.bands.size() + b];
      row.time = segments[i].start_time;
      row.band = b;
      row.est = identify_mode(fft, band);
      row.est.segment_time = segments[i].start_time;
    }
  });

  json out;
  out["schema"] = "flutterlife/identify/v1";
  out["config_hash"] = config.config_hash;
  out["unmatched_wind_segments"] = unmatched;
  json records = json::array();
  for (const auto& row : rows) {
    json r;
    r["segment_start"] = format_iso8601(row.time);
    r["band"] = config.bands[row.band].name;
    r["status"] = id_status_name(row.est.status);
    r["flagged"] = row.est.flagged;
    r["iterations"] = row.est.iterations;
    if (row.est.status != IdStatus::Skipped) {
      r["f"] = row.est.mpv.frequency;
      r["zeta"] = row.est.mpv.damping;
      r["excitation_psd"] = row.est.mpv.excitation_psd;
      r["error_psd"] = row.est.mpv.error_psd;
      std::vector<double> shape(row.est.mpv.shape.data(),
                                row.est.mpv.shape.data() + row.est.mpv.shape.size());
      r["shape"] = shape;
      r["nll"] = row.est.nll_value;
    }
    if (row.est.status == IdStatus::Converged) {
      r["cov_f"] = row.est.cov_f;
      r["cov_zeta"] = row.est.cov_zeta;
    }
    records.push_back(r);
  }
  out["records"] = records;
  write_artifact(out, resolve("identify.json", out_dir));
}

void stage_trend(const PipelineConfig& config, const std::string& out_dir) {
  const json id = read_artifact(resolve("identify.json", out_dir),
                                "flutterlife/identify/v1", config);

  json out;
  out["schema"] = "flutterlife/trend/v1";
  out["config_hash"] = config.config_hash;
  json bands = json::array();

  for (const auto& band : config.bands) {
    std::vector<std::pair<UtcTime, double>> f_samples, z_samples;
    std::vector<double> f_paired, z_paired;
    for (const auto& r : id.at("records")) {
      if (r.at("band").get<std::string>() != band.name) continue;
      if (r.at("status").get<std::string>() != "converged") continue;
      if (r.at("flagged").get<bool>()) continue;
      const UtcTime t = parse_iso8601(r.at("segment_start").get<std::string>());
      const double f = r.at("f").get<double>();
      const double z = r.at("zeta").get<double>();
      f_samples.emplace_back(t, f);
      z_samples.emplace_back(t, z);
      f_paired.push_back(f);
      z_paired.push_back(z);
    }
    if (f_samples.empty()) {
      throw DataError("trend: no accepted estimates for band '" + band.name + "'");
    }

    MonthlySeries f_monthly = monthly_average(f_samples);
    MonthlySeries z_monthly = monthly_average(z_samples);
    auto prune = [&](MonthlySeries& s) {
      std::erase_if(s, [&](const MonthlyEntry& e) {
        return e.count < config.trend.min_segments_per_month;
      });
    };
    prune(f_monthly);
    prune(z_monthly);

    const auto [a, b] = fit_exponential_trend(f_monthly);
    std::vector<double> residuals;
    for (const auto& e : f_monthly) {
      residuals.push_back(e.value - a * std::exp(b * static_cast<double>(e.month_index)));
    }
    std::set<DistFamily> f_fams = config.trend.frequency_families;
    if (config.trend.force_frequency_family) f_fams = {*config.trend.force_frequency_family};
    const FluctuationModel f_fluct = fit_fluctuation(residuals, f_fams);

    std::vector<double> z_values;
    for (const auto& e : z_monthly) z_values.push_back(e.value);
    std::set<DistFamily> z_fams = config.trend.damping_families;
    if (config.trend.force_damping_family) z_fams = {*config.trend.force_damping_family};
    const FluctuationModel z_fluct = fit_fluctuation(z_values, z_fams);
    double z_mean = 0.0;
    for (double v : z_values) z_mean += v;
    z_mean /= static_cast<double>(z_values.size());

    const double corr = correlation_check(f_paired, z_paired);

    json bj;
    bj["band"] = band.name;
    bj["kind"] = band.kind;
    bj["accepted_segments"] = f_samples.size();
    bj["correlation_f_zeta"] = corr;
    bj["correlation_supports_independence"] = std::fabs(corr) < 0.1;

    json fj;
    json f_month_json = json::array();
    for (const auto& e : f_monthly) {
      f_month_json.push_back({{"month", e.month_index}, {"value", e.value}, {"count", e.count}});
    }
    fj["monthly"] = f_month_json;
    fj["a"] = a;
    fj["b"] = b;
    fj["residuals"] = residuals;
    fj["fluctuation"] = fluctuation_to_json(f_fluct);
    bj["frequency"] = fj;

    json zj;
    json z_month_json = json::array();
    for (const auto& e : z_monthly) {
      z_month_json.push_back({{"month", e.month_index}, {"value", e.value}, {"count", e.count}});
    }
    zj["monthly"] = z_month_json;
    zj["mean"] = z_mean;
    zj["values"] = z_values;
    zj["fluctuation"] = fluctuation_to_json(z_fluct);
    bj["damping"] = zj;

    bands.push_back(bj);
  }
  out["bands"] = bands;
  write_artifact(out, resolve("trend.json", out_dir));
}

json solution_to_json(const FlutterSolution& sol) {
  json j;
  j["u_cr"] = sol.u_cr;
  j["k"] = sol.k_reduced;
  j["chi"] = sol.chi;
  j["flutter_omega"] = sol.flutter_omega;
  j["ur"] = sol.ur;
  return j;
}

void stage_flutter(const PipelineConfig& config, const std::string& out_dir) {
  const FlutterStageConfig& fc = config.flutter;
  if (!(fc.f_t1 > fc.f_v1) || !(fc.f_v1 > 0.0)) {
    throw ConfigError("config: flutter stage needs modal frequencies with f_t1 > f_v1 > 0");
  }
  const BridgeModel bridge = bridge_from_config(config.bridge, out_dir);
  const FlutterDerivativeSet derivs = derivatives_from_config(config, out_dir);
  const SolveOptions opt = solve_options_from_config(config);

  const FlutterScan scan =
      solve_flutter(bridge, derivs, fc.f_v1, fc.f_t1, fc.zeta_v1, fc.zeta_t1, opt);

  json out;
  out["schema"] = "flutterlife/flutter/v1";
  out["config_hash"] = config.config_hash;
  out["eq4_variant"] = fc.variant == Eq4Variant::Corrected ? "corrected" : "as_printed";
  out["derivatives"] = fc.derivatives;
  if (scan.solution) {
    out["status"] = "flutter";
    out["solution"] = solution_to_json(*scan.solution);
  } else {
    out["status"] = "no_flutter_in_range";
  }
  json crossings = json::array();
  for (const auto& c : scan.crossings) crossings.push_back(solution_to_json(c));
  out["crossings"] = crossings;
  write_artifact(out, resolve("flutter.json", out_dir));
  std::printf("%s\n", out.dump(2).c_str());

  if (fc.emit_branch_csv) {
    const auto branches = det_branch_diagnostics(bridge, derivs, fc.f_v1, fc.f_t1, fc.zeta_v1,
                                                 fc.zeta_t1, opt);
    std::ofstream csv(resolve("flutter_branches.csv", out_dir));
    csv << "ur,chi_re_root,chi_im_root,valid\n";
    char buf[128];
    for (const auto& s : branches) {
      std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g,%d\n", s.ur, s.chi_re, s.chi_im,
                    s.valid ? 1 : 0);
      csv << buf;
    }
  }
}

void stage_surrogate(const PipelineConfig& config, const std::string& out_dir) {
  const BridgeModel bridge = bridge_from_config(config.bridge, out_dir);
  const FlutterDerivativeSet derivs = derivatives_from_config(config, out_dir);
  const SolveOptions opt = solve_options_from_config(config);

  const std::vector<Eigen::Vector4d> grid =
      doe_grid(config.surrogate.box, config.surrogate.levels);
  std::vector<double> responses(grid.size(), std::numeric_limits<double>::quiet_NaN());
  parallel_for(grid.size(), config.threads, [&](std::size_t i) {
    const Eigen::Vector4d& p = grid[i];
    const FlutterScan scan = solve_flutter(bridge, derivs, p(0), p(1), p(2), p(3), opt);
    if (scan.solution) responses[i] = scan.solution->u_cr;
  });

  std::vector<Eigen::Vector4d> kept_points;
  std::vector<double> kept_responses;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (std::isfinite(responses[i])) {
      kept_points.push_back(grid[i]);
      kept_responses.push_back(responses[i]);
    }
  }
  const std::size_t excluded = grid.size() - kept_points.size();
  const double excluded_fraction =
      static_cast<double>(excluded) / static_cast<double>(grid.size());
  if (excluded_fraction > config.surrogate.max_excluded_fraction) {
    throw NumericalError("surrogate: " + std::to_string(excluded) + " of " +
                         std::to_string(grid.size()) +
                         " DOE points found no flutter in range; the box and the "
                         "derivative range are inconsistent");
  }

  const SurrogateModel model = fit_surrogate(kept_points, kept_responses, config.surrogate.box);

  json out;
  out["schema"] = "flutterlife/surrogate/v1";
  out["config_hash"] = config.config_hash;
  out["alpha_v1"] = model.alpha_v1;
  out["alpha_t1"] = model.alpha_t1;
  out["beta_v1"] = model.beta_v1;
  out["beta_t1"] = model.beta_t1;
  out["c"] = model.intercept;
  out["r_squared"] = model.r_squared;
  out["holdout_r_squared"] = model.holdout_r_squared;
  out["points_total"] = grid.size();
  out["points_excluded"] = excluded;
  json box = json::array();
  for (const auto& [lo, hi] : config.surrogate.box.ranges) box.push_back({lo, hi});
  out["doe_box"] = box;
  json levels = json::array();
  for (int l : config.surrogate.levels) levels.push_back(l);
  out["levels"] = levels;
  double mean_u = 0.0, max_resid = 0.0;
  for (std::size_t i = 0; i < kept_points.size(); ++i) {
    mean_u += kept_responses[i];
    max_resid = std::max(max_resid,
                         std::fabs(kept_responses[i] - model.predict(kept_points[i])));
  }
  mean_u /= static_cast<double>(kept_points.size());
  out["mean_u_cr"] = mean_u;
  out["max_residual"] = max_resid;
  write_artifact(out, resolve("surrogate.json", out_dir));
}

SurrogateModel surrogate_from_artifact(const json& j) {
  SurrogateModel m;
  m.alpha_v1 = j.at("alpha_v1").get<double>();
  m.alpha_t1 = j.at("alpha_t1").get<double>();
  m.beta_v1 = j.at("beta_v1").get<double>();
  m.beta_t1 = j.at("beta_t1").get<double>();
  m.intercept = j.at("c").get<double>();
  m.r_squared = j.at("r_squared").get<double>();
  const auto box = j.at("doe_box");
  for (std::size_t i = 0; i < 4; ++i) {
    m.doe_box.ranges[i] = {box.at(i).at(0).get<double>(), box.at(i).at(1).get<double>()};
  }
  return m;
}

void stage_lifecycle(const PipelineConfig& config, const std::string& out_dir) {
  const json tr = read_artifact(resolve("trend.json", out_dir), "flutterlife/trend/v1", config);
  const json sj = read_artifact(resolve("surrogate.json", out_dir),
                                "flutterlife/surrogate/v1", config);
  const SurrogateModel surrogate = surrogate_from_artifact(sj);
  const SiteWindModel wind = fit_gumbel_return_periods(config.gumbel_points);

  // Map trend bands onto the four surrogate variables.
  const json* vertical = nullptr;
  const json* torsional = nullptr;
  for (const auto& b : tr.at("bands")) {
    const std::string kind = b.at("kind").get<std::string>();
    if (kind == "vertical" && !vertical) vertical = &b;
    if (kind == "torsional" && !torsional) torsional = &b;
  }
  if (!vertical || !torsional) {
    throw ConfigError("lifecycle: trend artifact must contain one vertical and one "
                      "torsional band");
  }

  auto freq_model = [](const json& b) {
    DeteriorationModel m;
    m.initial_value = b.at("frequency").at("a").get<double>();
    m.rate_per_month = b.at("frequency").at("b").get<double>();
    m.fluctuation = fluctuation_from_json(b.at("frequency").at("fluctuation"));
    m.is_damping = false;
    return m;
  };
  auto damping_model = [](const json& b) {
    DeteriorationModel m;
    m.initial_value = b.at("damping").at("mean").get<double>();
    m.rate_per_month = 0.0;
    m.fluctuation = fluctuation_from_json(b.at("damping").at("fluctuation"));
    m.is_damping = true;
    return m;
  };
  const std::array<DeteriorationModel, 4> properties = {
      freq_model(*vertical), freq_model(*torsional), damping_model(*vertical),
      damping_model(*torsional)};

  LifecycleOptions opt;
  opt.horizon_years = config.lifecycle.horizon_years;
  opt.conv.grid_points = config.lifecycle.grid_points;

  json out;
  out["schema"] = "flutterlife/lifecycle/v1";
  out["config_hash"] = config.config_hash;
  out["wind"] = {{"mu", wind.location}, {"sigma", wind.scale}};
  json scenarios = json::array();

  for (DampingScenario scenario : config.lifecycle.scenarios) {
    const auto curve = lifecycle_curve(properties, surrogate, wind, scenario, opt);

    // Per-scenario CSV: year,p_f,vr_mean,vr_std,extrapolation_flag
    const std::string csv_path =
        resolve(std::string("lifecycle_") + scenario_name(scenario) + ".csv", out_dir);
    std::ofstream csv(csv_path);
    csv << "year,p_f,vr_mean,vr_std,extrapolation_flag\n";
    char buf[160];
    for (const auto& yr : curve) {
      std::snprintf(buf, sizeof(buf), "%d,%.12g,%.12g,%.12g,%d\n", yr.year, yr.p_f, yr.vr_mean,
                    yr.vr_std, yr.extrapolation ? 1 : 0);
      csv << buf;
    }

    json yj = json::array();
    for (const auto& yr : curve) {
      yj.push_back({{"year", yr.year},
                    {"p_f", yr.p_f},
                    {"vr_mean", yr.vr_mean},
                    {"vr_std", yr.vr_std},
                    {"extrapolation", yr.extrapolation}});
    }
    json sc;
    sc["name"] = scenario_name(scenario);
    sc["years"] = yj;
    if (scenario == DampingScenario::None) {
      // Year-0 PDF retained for reporting, plus a Monte-Carlo cross-check.
      const GridPdf& pdf = curve.front().vr_pdf;
      const Eigen::Index stride = std::max<Eigen::Index>(1, pdf.density.size() / 2048);
      json xs = json::array(), ys = json::array();
      for (Eigen::Index i = 0; i < pdf.density.size(); i += stride) {
        xs.push_back(pdf.x_at(i));
        ys.push_back(pdf.density(i));
      }
      sc["year0_pdf"] = {{"x", xs}, {"density", ys}};

      std::array<Distribution, 4> d0;
      for (std::size_t i = 0; i < 4; ++i) {
        d0[i] = project(properties[i], 0, DampingScenario::None);
      }
      auto samples = mc_critical_speed(surrogate, d0, config.lifecycle.mc_samples, config.seed);
      std::sort(samples.begin(), samples.end());
      double ks = 0.0;
      const double n = static_cast<double>(samples.size());
      for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = pdf.cdf(samples[i]);
        ks = std::max(ks, std::max((static_cast<double>(i) + 1.0) / n - f,
                                   f - static_cast<double>(i) / n));
      }
      sc["mc_validation"] = {{"samples", samples.size()}, {"ks_distance", ks}};
    }
    scenarios.push_back(sc);
  }
  out["scenarios"] = scenarios;
  write_artifact(out, resolve("lifecycle.json", out_dir));
}

void stage_report(const PipelineConfig& config, const std::string& out_dir) {
  bool produced = false;
  const std::array<std::string, 3> palette = {"#1f6fb4", "#d95f02", "#2ca25f"};

  const std::string trend_path = resolve("trend.json", out_dir);
  if (fs::exists(trend_path)) {
    const json tr = read_artifact(trend_path, "flutterlife/trend/v1", config);
    for (const auto& b : tr.at("bands")) {
      const std::string band = b.at("band").get<std::string>();
      // Monthly series and fitted trend.
      svg::Series pts, fit;
      pts.label = "monthly mean";
      pts.markers = true;
      pts.line = false;
      const double a = b.at("frequency").at("a").get<double>();
      const double rate = b.at("frequency").at("b").get<double>();
      for (const auto& e : b.at("frequency").at("monthly")) {
        pts.x.push_back(e.at("month").get<double>());
        pts.y.push_back(e.at("value").get<double>());
      }
      fit.label = "a*exp(b t)";
      fit.color = "#d95f02";
      if (!pts.x.empty()) {
        for (double t = pts.x.front(); t <= pts.x.back(); t += 0.5) {
          fit.x.push_back(t);
          fit.y.push_back(a * std::exp(rate * t));
        }
      }
      svg::PlotSpec spec;
      spec.title = "Band " + band + ": monthly frequency and fitted trend";
      spec.x_label = "month";
      spec.y_label = "frequency (Hz)";
      svg::write_line_plot(resolve("report_trend_" + band + "_frequency.svg", out_dir), spec,
                           {pts, fit});
      produced = true;

      // PDF and CDF overlays of the fluctuation candidates.
      auto overlay = [&](const json& fluct, const std::vector<double>& samples,
                         const std::string& what) {
        if (samples.size() < 2) return;
        std::vector<double> sorted = samples;
        std::sort(sorted.begin(), sorted.end());
        const double lo = sorted.front(), hi = sorted.back();
        const double pad = 0.25 * (hi - lo);

        std::vector<svg::Series> pdf_series, cdf_series;
        // Empirical density as a normalized histogram outline.
        const int n_bins = 16;
        svg::Series hist;
        hist.label = "samples";
        hist.color = "#777777";
        const double bw = (hi - lo + 2 * pad) / n_bins;
        std::vector<double> counts(n_bins, 0.0);
        for (double v : sorted) {
          int bin = static_cast<int>((v - lo + pad) / bw);
          bin = std::clamp(bin, 0, n_bins - 1);
          counts[static_cast<std::size_t>(bin)] += 1.0;
        }
        for (int i = 0; i < n_bins; ++i) {
          const double x = lo - pad + (i + 0.5) * bw;
          hist.x.push_back(x);
          hist.y.push_back(counts[static_cast<std::size_t>(i)] /
                           (static_cast<double>(sorted.size()) * bw));
        }
        pdf_series.push_back(hist);

        svg::Series ecdf;
        ecdf.label = "empirical";
        ecdf.color = "#777777";
        for (std::size_t i = 0; i < sorted.size(); ++i) {
          ecdf.x.push_back(sorted[i]);
          ecdf.y.push_back((static_cast<double>(i) + 1.0) / static_cast<double>(sorted.size()));
        }
        cdf_series.push_back(ecdf);

        std::size_t color_i = 0;
        for (const auto& c : fluct.at("candidates")) {
          if (!c.at("fit_ok").get<bool>()) continue;
          const Distribution dist = distribution_from_json(c);
          char lbl[96];
          std::snprintf(lbl, sizeof(lbl), "%s (ks p=%.3f)",
                        family_name(dist.family).c_str(), c.at("ks_p").get<double>());
          svg::Series pd, cd;
          pd.label = lbl;
          cd.label = lbl;
          pd.color = cd.color = palette[color_i % palette.size()];
          ++color_i;
          for (int i = 0; i <= 240; ++i) {
            const double x = lo - pad + (hi - lo + 2 * pad) * i / 240.0;
            pd.x.push_back(x);
            pd.y.push_back(dist.pdf(x));
            cd.x.push_back(x);
            cd.y.push_back(dist.cdf(x));
          }
          pdf_series.push_back(pd);
          cdf_series.push_back(cd);
        }
        svg::PlotSpec ps;
        ps.title = "Band " + band + ": " + what + " fluctuation PDF";
        ps.x_label = what;
        ps.y_label = "density";
        svg::write_line_plot(resolve("report_fluct_" + band + "_" + what + "_pdf.svg", out_dir),
                             ps, pdf_series);
        svg::PlotSpec cs;
        cs.title = "Band " + band + ": " + what + " fluctuation CDF";
        cs.x_label = what;
        cs.y_label = "probability";
        svg::write_line_plot(resolve("report_fluct_" + band + "_" + what + "_cdf.svg", out_dir),
                             cs, cdf_series);
      };
      overlay(b.at("frequency").at("fluctuation"),
              b.at("frequency").at("residuals").get<std::vector<double>>(), "frequency");
      overlay(b.at("damping").at("fluctuation"),
              b.at("damping").at("values").get<std::vector<double>>(), "damping");
    }
  }

  const std::string lc_path = resolve("lifecycle.json", out_dir);
  if (fs::exists(lc_path)) {
    const json lc = read_artifact(lc_path, "flutterlife/lifecycle/v1", config);
    std::vector<svg::Series> curves;
    std::size_t color_i = 0;
    for (const auto& sc : lc.at("scenarios")) {
      svg::Series s;
      s.label = sc.at("name").get<std::string>();
      s.color = palette[color_i % palette.size()];
      ++color_i;
      for (const auto& y : sc.at("years")) {
        s.x.push_back(y.at("year").get<double>());
        s.y.push_back(y.at("p_f").get<double>());
      }
      curves.push_back(s);

      if (sc.contains("year0_pdf")) {
        svg::Series pdf;
        pdf.label = "year 0";
        const auto& xs = sc.at("year0_pdf").at("x");
        const auto& ys = sc.at("year0_pdf").at("density");
        for (std::size_t i = 0; i < xs.size(); ++i) {
          pdf.x.push_back(xs.at(i).get<double>());
          pdf.y.push_back(ys.at(i).get<double>());
        }
        svg::PlotSpec ps;
        ps.title = "Critical wind speed PDF (year 0)";
        ps.x_label = "critical wind speed (m/s)";
        ps.y_label = "density";
        svg::write_line_plot(resolve("report_vr_pdf_year0.svg", out_dir), ps, {pdf});
      }
    }
    svg::PlotSpec spec;
    spec.title = "Annual flutter failure probability";
    spec.x_label = "year";
    spec.y_label = "P_f";
    spec.log_y = true;
    svg::write_line_plot(resolve("report_pf_curves.svg", out_dir), spec, curves);
    produced = true;
  }

  if (!produced) {
    throw ConfigError("report: no upstream artifacts found (run trend/lifecycle first)");
  }
}

}  // namespace

Stage stage_from_name(const std::string& name) {
  if (name == "simulate") return Stage::Simulate;
  if (name == "identify") return Stage::Identify;
  if (name == "trend") return Stage::Trend;
  if (name == "flutter") return Stage::Flutter;
  if (name == "surrogate") return Stage::Surrogate;
  if (name == "lifecycle") return Stage::Lifecycle;
  if (name == "report") return Stage::Report;
  throw ConfigError("unknown stage '" + name + "'");
}

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::Simulate: return "simulate";
    case Stage::Identify: return "identify";
    case Stage::Trend: return "trend";
    case Stage::Flutter: return "flutter";
    case Stage::Surrogate: return "surrogate";
    case Stage::Lifecycle: return "lifecycle";
    case Stage::Report: return "report";
  }
  return "?";
}

PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + std::string(e.what()));
  }

  PipelineConfig c;
  try {
    c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
    c.threads = get_or<int>(j, "threads", c.threads);
    if (j.contains("time")) {
      c.utc_offset_hours = get_or<double>(j.at("time"), "utc_offset_hours", c.utc_offset_hours);
    }
    if (j.contains("paths")) {
      const json& p = j.at("paths");
      c.acceleration_dir = get_or<std::string>(p, "acceleration_dir", c.acceleration_dir);
      c.wind_csv = get_or<std::string>(p, "wind_csv", c.wind_csv);
      c.derivative_csv = get_or<std::string>(p, "derivative_csv", "");
    }
    if (j.contains("simulate")) {
      const json& s = j.at("simulate");
      c.simulate.months = get_or<int>(s, "months", 0);
      c.simulate.segments_per_month = get_or<int>(s, "segments_per_month", 1);
      c.simulate.fs_hz = require(s, "fs_hz", "simulate").get<double>();
      c.simulate.duration_s = get_or<double>(s, "duration_s", 3600.0);
      c.simulate.start = get_or<std::string>(s, "start", c.simulate.start);
      c.simulate.channels = require(s, "channels", "simulate").get<std::vector<std::string>>();
      c.simulate.noise_psd = get_or<double>(s, "noise_psd", 0.0);
      c.simulate.wind_speed_mps = get_or<double>(s, "wind_speed_mps", 3.0);
      c.simulate.wind_direction_deg = get_or<double>(s, "wind_direction_deg", 45.0);
      for (const auto& m : require(s, "modes", "simulate")) {
        SimulatedModeConfig mc;
        mc.band = get_or<std::string>(m, "band", "");
        mc.frequency = require(m, "frequency", "simulate.modes").get<double>();
        mc.damping = require(m, "damping", "simulate.modes").get<double>();
        mc.excitation_psd = require(m, "excitation_psd", "simulate.modes").get<double>();
        mc.shape = require(m, "shape", "simulate.modes").get<std::vector<double>>();
        mc.trend_rate_per_month = get_or<double>(m, "trend_rate_per_month", 0.0);
        mc.frequency_jitter = get_or<double>(m, "frequency_jitter", 0.0);
        mc.damping_jitter_rel = get_or<double>(m, "damping_jitter_rel", 0.0);
        if (mc.shape.size() != c.simulate.channels.size()) {
          throw ConfigError("config: mode shape length must match channel count");
        }
        c.simulate.modes.push_back(std::move(mc));
      }
    }
    if (j.contains("filter")) {
      const json& f = j.at("filter");
      if (f.contains("speed_range")) {
        c.filter.speed_lo = f.at("speed_range").at(0).get<double>();
        c.filter.speed_hi = f.at("speed_range").at(1).get<double>();
      }
      if (f.contains("hour_range")) {
        c.filter.hour_lo = f.at("hour_range").at(0).get<double>();
        c.filter.hour_hi = f.at("hour_range").at(1).get<double>();
      }
      if (!(c.filter.speed_hi >= c.filter.speed_lo)) {
        throw ConfigError("config: filter.speed_range must be increasing");
      }
    }
    if (j.contains("bands")) {
      for (const auto& b : j.at("bands")) {
        BandConfig bc;
        bc.name = require(b, "name", "bands").get<std::string>();
        bc.f_lo = require(b, "f_lo", "bands").get<double>();
        bc.f_hi = require(b, "f_hi", "bands").get<double>();
        bc.kind = get_or<std::string>(b, "kind", "vertical");
        if (!(bc.f_hi > bc.f_lo) || !(bc.f_lo > 0.0)) {
          throw ConfigError("config: band '" + bc.name + "' has an invalid range");
        }
        if (bc.kind != "vertical" && bc.kind != "torsional") {
          throw ConfigError("config: band kind must be vertical or torsional");
        }
        c.bands.push_back(std::move(bc));
      }
    }
    if (j.contains("trend")) {
      const json& t = j.at("trend");
      c.trend.min_segments_per_month =
          get_or<std::size_t>(t, "min_segments_per_month", c.trend.min_segments_per_month);
      if (t.contains("frequency_families")) {
        c.trend.frequency_families = parse_families(t.at("frequency_families"), "trend");
      }
      if (t.contains("damping_families")) {
        c.trend.damping_families = parse_families(t.at("damping_families"), "trend");
      }
      if (t.contains("force_frequency_family")) {
        c.trend.force_frequency_family =
            family_from_name(t.at("force_frequency_family").get<std::string>());
      }
      if (t.contains("force_damping_family")) {
        c.trend.force_damping_family =
            family_from_name(t.at("force_damping_family").get<std::string>());
      }
    }
    if (j.contains("bridge")) {
      const json& b = j.at("bridge");
      c.bridge.deck_width = require(b, "deck_width", "bridge").get<double>();
      c.bridge.span = require(b, "span", "bridge").get<double>();
      c.bridge.mass_per_length = require(b, "mass_per_length", "bridge").get<double>();
      c.bridge.inertia_per_length = require(b, "inertia_per_length", "bridge").get<double>();
      c.bridge.air_density = get_or<double>(b, "air_density", 1.225);
      c.bridge.mode_shape = get_or<std::string>(b, "mode_shape", "sine");
      if (!(c.bridge.deck_width > 0) || !(c.bridge.span > 0) ||
          !(c.bridge.mass_per_length > 0) || !(c.bridge.inertia_per_length > 0) ||
          !(c.bridge.air_density >= 0)) {
        throw ConfigError("config: bridge constants must be positive");
      }
    }
    if (j.contains("flutter")) {
      const json& f = j.at("flutter");
      c.flutter.derivatives = get_or<std::string>(f, "derivatives", "flat_plate");
      if (f.contains("orders")) {
        for (const auto& [key, value] : f.at("orders").items()) {
          c.flutter.orders[deriv_from_name(key)] = value.get<int>();
        }
      }
      if (f.contains("exclusions")) {
        for (const auto& [key, value] : f.at("exclusions").items()) {
          c.flutter.exclusions[deriv_from_name(key)] = value.get<std::vector<std::size_t>>();
        }
      }
      if (f.contains("ur_range")) {
        c.flutter.ur_lo = f.at("ur_range").at(0).get<double>();
        c.flutter.ur_hi = f.at("ur_range").at(1).get<double>();
      }
      c.flutter.allow_extrapolation = get_or<bool>(f, "allow_extrapolation", false);
      const std::string variant = get_or<std::string>(f, "eq4_variant", "corrected");
      if (variant == "corrected") {
        c.flutter.variant = Eq4Variant::Corrected;
      } else if (variant == "as_printed") {
        c.flutter.variant = Eq4Variant::AsPrinted;
      } else {
        throw ConfigError("config: flutter.eq4_variant must be corrected or as_printed");
      }
      if (f.contains("modal")) {
        const json& m = f.at("modal");
        c.flutter.f_v1 = require(m, "f_v1", "flutter.modal").get<double>();
        c.flutter.f_t1 = require(m, "f_t1", "flutter.modal").get<double>();
        c.flutter.zeta_v1 = require(m, "zeta_v1", "flutter.modal").get<double>();
        c.flutter.zeta_t1 = require(m, "zeta_t1", "flutter.modal").get<double>();
      }
      c.flutter.emit_branch_csv = get_or<bool>(f, "emit_branch_csv", true);
    }
    if (j.contains("surrogate")) {
      const json& s = j.at("surrogate");
      const json& box = require(s, "box", "surrogate");
      const std::array<const char*, 4> keys = {"f_v1", "f_t1", "zeta_v1", "zeta_t1"};
      for (std::size_t i = 0; i < 4; ++i) {
        const json& r = require(box, keys[i], "surrogate.box");
        c.surrogate.box.ranges[i] = {r.at(0).get<double>(), r.at(1).get<double>()};
      }
      if (s.contains("levels")) {
        const auto levels = s.at("levels").get<std::vector<int>>();
        if (levels.size() != 4) throw ConfigError("config: surrogate.levels needs 4 entries");
        std::copy(levels.begin(), levels.end(), c.surrogate.levels.begin());
      }
      c.surrogate.max_excluded_fraction =
          get_or<double>(s, "max_excluded_fraction", c.surrogate.max_excluded_fraction);
    }
    if (j.contains("wind_model")) {
      const json& w = j.at("wind_model");
      if (w.contains("return_periods")) {
        c.gumbel_points.clear();
        for (const auto& p : w.at("return_periods")) {
          c.gumbel_points.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
        }
      }
    }
    if (j.contains("lifecycle")) {
      const json& l = j.at("lifecycle");
      c.lifecycle.horizon_years = get_or<int>(l, "horizon_years", 100);
      c.lifecycle.grid_points = get_or<int>(l, "grid_points", 8192);
      c.lifecycle.mc_samples = get_or<std::size_t>(l, "mc_samples", 1000000);
      if (l.contains("scenarios")) {
        c.lifecycle.scenarios.clear();
        for (const auto& s : l.at("scenarios")) {
          c.lifecycle.scenarios.push_back(scenario_from_name(s.get<std::string>()));
        }
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError("config: " + std::string(e.what()));
  }

  c.canonical_json = j.dump();
  c.config_hash = fnv1a_hex(c.canonical_json + "|seed=" + std::to_string(c.seed));
  return c;
}

PipelineConfig apply_overrides(PipelineConfig config, const CliOverrides& overrides) {
  if (overrides.seed) config.seed = *overrides.seed;
  if (overrides.threads) config.threads = *overrides.threads;
  config.config_hash =
      fnv1a_hex(config.canonical_json + "|seed=" + std::to_string(config.seed));
  return config;
}

void run_stage(Stage stage, const PipelineConfig& config, const std::string& out_dir) {
  fs::create_directories(out_dir);
  switch (stage) {
    case Stage::Simulate: stage_simulate(config, out_dir); return;
    case Stage::Identify: stage_identify(config, out_dir); return;
    case Stage::Trend: stage_trend(config, out_dir); return;
    case Stage::Flutter: stage_flutter(config, out_dir); return;
    case Stage::Surrogate: stage_surrogate(config, out_dir); return;
    case Stage::Lifecycle: stage_lifecycle(config, out_dir); return;
    case Stage::Report: stage_report(config, out_dir); return;
  }
}

}  // namespace flutterlife
