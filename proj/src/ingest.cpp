#include "flutterlife/ingest.hpp"

#include <unsupported/Eigen/FFT>

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "flutterlife/errors.hpp"

namespace flutterlife {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur
          .push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_double_strict(const std::string& s, const std::string& where) {
  const char* b = s.data();
  const char* e = s.data() + s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(*b))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(e[-1]))) --e;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(b, e, value);
  if (ec != std::errc() || ptr != e || b == e) {
    throw DataError("non-numeric value '" + s + "' at " + where);
  }
  return value;
}

}  // namespace

AccelerationSegment load_acceleration_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open acceleration file '" + path + "'");

  std::unordered_map<std::string, std::string> header;
  std::string line;
  std::streampos data_start = in.tellg();
  while (std::getline(in, line)) {
    if (line.empty() || line[0] != '#') break;
    std::string body = line.substr(1);
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw DataError("malformed header line '" + line + "' in " + path);
    }
    std::string key = body.substr(0, eq);
    std::string value = body.substr(eq + 1);
    auto trim = [](std::string& s) {
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.erase(s.begin());
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
    };
    trim(key);
    trim(value);
    header[key] = value;
    data_start = in.tellg();
  }

  for (const char* key : {"fs_hz", "start", "channels"}) {
    if (!header.count(key)) {
      throw DataError(std::string("missing header '") + key + "' in " + path);
    }
  }

  const double fs = parse_double_strict(header["fs_hz"], "header fs_hz of " + path);
  if (!(fs > 0.0)) throw DataError("fs_hz must be positive in " + path);
  const UtcTime start = parse_iso8601(header["start"]);
  std::vector<std::string> channels;
  for (auto& c : split_csv_line(header["channels"])) {
    if (!c.empty()) channels.push_back(c);
  }
  if (channels.empty()) throw DataError("empty channel list in " + path);

  // First non-header line was already consumed by the loop above.
  std::vector<double> values;
  std::size_t rows = 0;
  std::string current = line;
  bool have_line = !line.empty() && line[0] != '#';
  while (have_line || std::getline(in, current)) {
    have_line = false;
    if (current.empty() || current == "\r") continue;
    const auto fields = split_csv_line(current);
    ++rows;
    if (fields.size() != channels.size()) {
      throw DataError("row " + std::to_string(rows) + " of " + path + " has " +
                      std::to_string(fields.size()) + " columns, expected " +
                      std::to_string(channels.size()));
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const double v = parse_double_strict(
          fields[c], "row " + std::to_string(rows) + ", column " + std::to_string(c + 1) +
                         " of " + path);
      if (!std::isfinite(v)) {
        throw DataError("non-finite sample at row " + std::to_string(rows) + " of " + path);
      }
      values.push_back(v);
    }
  }
  if (rows < 2) throw DataError("segment in " + path + " has fewer than 2 samples");

  AccelerationSegment seg;
  seg.start_time = start;
  seg.sample_interval = 1.0 / fs;
  seg.channel_ids = channels;
  seg.samples.resize(static_cast<Eigen::Index>(rows),
                     static_cast<Eigen::Index>(channels.size()));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < channels.size(); ++c) {
      seg.samples(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          values[r * channels.size() + c];
    }
  }
  return seg;
}

void write_acceleration_csv(const AccelerationSegment& segment, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write acceleration file '" + path + "'");
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", 1.0 / segment.sample_interval);
  out << "# fs_hz=" << buf << "\n";
  out << "# start=" << format_iso8601(segment.start_time) << "\n";
  out << "# channels=";
  for (std::size_t i = 0; i < segment.channel_ids.size(); ++i) {
    out << (i ? "," : "") << segment.channel_ids[i];
  }
  out << "\n";
  for (Eigen::Index r = 0; r < segment.samples.rows(); ++r) {
    for (Eigen::Index c = 0; c < segment.samples.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", segment.samples(r, c));
      out << (c ? "," : "") << buf;
    }
    out << "\n";
  }
  if (!out) throw DataError("write failed for '" + path + "'");
}

std::vector<WindRecord> load_wind_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open wind file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty wind file '" + path + "'");
  std::vector<WindRecord> out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 3) {
      throw DataError("row " + std::to_string(row) + " of " + path + " needs 3 columns");
    }
    WindRecord w;
    w.start_time = parse_iso8601(fields[0]);
    w.mean_speed = parse_double_strict(fields[1], "row " + std::to_string(row) + " of " + path);
    w.direction = parse_double_strict(fields[2], "row " + std::to_string(row) + " of " + path);
    if (w.mean_speed < 0.0) {
      throw DataError("negative wind speed at row " + std::to_string(row) + " of " + path);
    }
    if (w.direction < 0.0 || w.direction >= 360.0) {
      throw DataError("direction out of [0,360) at row " + std::to_string(row) + " of " + path);
    }
    out.push_back(w);
  }
  return out;
}

void write_wind_csv(const std::vector<WindRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write wind file '" + path + "'");
  out << "start,mean_speed_mps,direction_deg\n";
  char buf[64];
  for (const auto& w : records) {
    out << format_iso8601(w.start_time);
    std::snprintf(buf, sizeof(buf), ",%.17g,%.17g", w.mean_speed, w.direction);
    out << buf << "\n";
  }
}

std::vector<AccelerationSegment> filter_segments(
    const std::vector<AccelerationSegment>& segments,
    const std::vector<WindRecord>& winds,
    double speed_lo, double speed_hi,
    double hour_lo, double hour_hi,
    double utc_offset_hours,
    std::size_t* unmatched) {
  std::unordered_map<std::int64_t, const WindRecord*> by_hour;
  for (const auto& w : winds) by_hour[floor_to_hour(w.start_time)] = &w;

  std::vector<AccelerationSegment> kept;
  std::size_t missing = 0;
  for (const auto& seg : segments) {
    const auto it = by_hour.find(floor_to_hour(seg.start_time));
    if (it == by_hour.end()) {
      ++missing;
      continue;
    }
    const double v = it->second->mean_speed;
    if (v < speed_lo || v > speed_hi) continue;
    const double h = local_hour_of_day(seg.start_time, utc_offset_hours);
    if (h < hour_lo || h >= hour_hi) continue;
    kept.push_back(seg);
  }
  if (unmatched) *unmatched = missing;
  return kept;
}

std::vector<AccelerationSegment> split_hourly(const AccelerationSegment& segment) {
  const double fs = 1.0 / segment.sample_interval;
  const auto per_hour = static_cast<Eigen::Index>(std::llround(3600.0 * fs));
  std::vector<AccelerationSegment> out;
  if (per_hour <= 0) return out;

  const UtcTime first_boundary = floor_to_hour(segment.start_time) +
                                 (segment.start_time % 3600 == 0 ? 0 : 3600);
  const double lead_s = static_cast<double>(first_boundary - segment.start_time);
  Eigen::Index offset = static_cast<Eigen::Index>(std::llround(lead_s * fs));
  UtcTime t = first_boundary;
  while (offset + per_hour <= segment.samples.rows()) {
    AccelerationSegment win;
    win.start_time = t;
    win.sample_interval = segment.sample_interval;
    win.channel_ids = segment.channel_ids;
    win.samples = segment.samples.middleRows(offset, per_hour);
    out.push_back(std::move(win));
    offset += per_hour;
    t += 3600;
  }
  return out;
}

FftData scaled_fft(const AccelerationSegment& segment) {
  const Eigen::Index n_samples = segment.samples.rows();
  const Eigen::Index n_chan = segment.samples.cols();
  if (n_samples < 4) throw DataError("scaled_fft needs at least 4 samples");

  const Eigen::Index nq = n_samples / 2 + 1;
  const Eigen::Index kept = nq - 1;  // ordinates k = 2..Nq
  const double scale = std::sqrt(2.0 * segment.sample_interval /
                                 static_cast<double>(n_samples));

  FftData out;
  out.sample_interval = segment.sample_interval;
  out.sample_count = n_samples;
  out.frequencies.resize(kept);
  for (Eigen::Index i = 0; i < kept; ++i) {
    // k = i + 2, f_k = (k-1)/(N dt)
    out.frequencies(i) = static_cast<double>(i + 1) /
                         (static_cast<double>(n_samples) * segment.sample_interval);
  }
  out.z.resize(2 * n_chan, kept);

  Eigen::FFT<double> fft;
  std::vector<double> time(static_cast<std::size_t>(n_samples));
  std::vector<std::complex<double>> freq;
  for (Eigen::Index c = 0; c < n_chan; ++c) {
    const double mean = segment.samples.col(c).mean();
    for (Eigen::Index j = 0; j < n_samples; ++j) {
      time[static_cast<std::size_t>(j)] = segment.samples(j, c) - mean;
    }
    fft.fwd(freq, time);
    for (Eigen::Index i = 0; i < kept; ++i) {
      const std::complex<double> v = scale * freq[static_cast<std::size_t>(i + 1)];
      out.z(c, i) = v.real();
      out.z(n_chan + c, i) = v.imag();
    }
  }
  return out;
}

}  // namespace flutterlife
