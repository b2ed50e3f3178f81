#include "flutterlife/time_utils.hpp"

#include <cmath>
#include <cstdio>

#include "flutterlife/errors.hpp"

namespace flutterlife {

std::int64_t days_from_civil(int y, int m, int d) {
  // Howard Hinnant's algorithm, valid over the full proleptic range.
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2u) / 5u + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

static void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  y = static_cast<int>(yy + (m <= 2));
}

CivilDate civil_from_time(UtcTime t) {
  std::int64_t days = t / 86400;
  std::int64_t sod = t % 86400;
  if (sod < 0) {
    sod += 86400;
    days -= 1;
  }
  CivilDate c;
  civil_from_days(days, c.year, c.month, c.day);
  c.hour = static_cast<int>(sod / 3600);
  c.minute = static_cast<int>((sod % 3600) / 60);
  c.second = static_cast<int>(sod % 60);
  return c;
}

UtcTime time_from_civil(const CivilDate& c) {
  return days_from_civil(c.year, c.month, c.day) * 86400 +
         c.hour * 3600 + c.minute * 60 + c.second;
}

UtcTime parse_iso8601(const std::string& text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0;
  double sec = 0.0;
  char sep = 0;
  int consumed = 0;
  const int n = std::sscanf(text.c_str(), "%d-%d-%d%c%d:%d:%lf%n",
                            &y, &mo, &d, &sep, &h, &mi, &sec, &consumed);
  if (n != 7 || (sep != 'T' && sep != ' ')) {
    throw DataError("bad timestamp '" + text + "' (expected YYYY-MM-DDTHH:MM:SS)");
  }
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h < 0 || h > 23 || mi < 0 ||
      mi > 59 || sec < 0.0 || sec >= 61.0) {
    throw DataError("timestamp field out of range in '" + text + "'");
  }
  std::int64_t offset = 0;
  std::string rest = text.substr(static_cast<std::size_t>(consumed));
  if (!rest.empty() && rest != "Z") {
    int oh = 0, om = 0;
    if (std::sscanf(rest.c_str(), "%d:%d", &oh, &om) != 2) {
      throw DataError("bad timezone suffix '" + rest + "' in '" + text + "'");
    }
    offset = static_cast<std::int64_t>(oh) * 3600 +
             (oh < 0 ? -1 : 1) * static_cast<std::int64_t>(om) * 60;
  }
  CivilDate c{y, mo, d, h, mi, 0};
  return time_from_civil(c) + static_cast<std::int64_t>(std::llround(sec)) - offset;
}

std::string format_iso8601(UtcTime t) {
  const CivilDate c = civil_from_time(t);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ",
                c.year, c.month, c.day, c.hour, c.minute, c.second);
  return buf;
}

double local_hour_of_day(UtcTime t, double utc_offset_hours) {
  const double shifted = static_cast<double>(t) + utc_offset_hours * 3600.0;
  double sod = std::fmod(shifted, 86400.0);
  if (sod < 0.0) sod += 86400.0;
  return sod / 3600.0;
}

std::int64_t month_number(UtcTime t) {
  const CivilDate c = civil_from_time(t);
  return static_cast<std::int64_t>(c.year) * 12 + (c.month - 1);
}

UtcTime floor_to_hour(UtcTime t) {
  UtcTime r = t % 3600;
  if (r < 0) r += 3600;
  return t - r;
}

}  // namespace flutterlife
