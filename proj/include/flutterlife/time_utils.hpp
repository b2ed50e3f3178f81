#pragma once

#include <cstdint>
#include <string>

namespace flutterlife {

// Seconds since the Unix epoch, UTC.
using UtcTime = std::int64_t;

struct CivilDate {
  int year = 1970;
  int month = 1;  // 1..12
  int day = 1;    // 1..31
  int hour = 0;
  int minute = 0;
  int second = 0;
};

// Days since 1970-01-01 for a proleptic Gregorian date.
std::int64_t days_from_civil(int year, int month, int day);
CivilDate civil_from_time(UtcTime t);
UtcTime time_from_civil(const CivilDate& c);

// Parses "YYYY-MM-DD[T ]HH:MM:SS" with optional fractional seconds and a
// trailing "Z" or "+HH:MM"/"-HH:MM" offset (absent offset means UTC).
// Throws DataError on malformed input.
UtcTime parse_iso8601(const std::string& text);
std::string format_iso8601(UtcTime t);

// Hour of day [0,24) after applying a fixed UTC offset in hours.
double local_hour_of_day(UtcTime t, double utc_offset_hours);

// Calendar month counter (year*12 + month-1), useful for monthly grouping.
std::int64_t month_number(UtcTime t);

// Truncates to the start of the containing clock hour.
UtcTime floor_to_hour(UtcTime t);

}  // namespace flutterlife
