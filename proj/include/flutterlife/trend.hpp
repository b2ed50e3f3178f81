#pragma once

#include <cstdint>
#include <set>
#include <utility>
#include <vector>

#include "flutterlife/distributions.hpp"
#include "flutterlife/time_utils.hpp"

namespace flutterlife {

// Monthly-averaged property values; months without data are absent.
struct MonthlyEntry {
  std::int64_t month_index = 0;  // months since the earliest month present
  double value = 0.0;
  std::size_t count = 0;
};
using MonthlySeries = std::vector<MonthlyEntry>;

// Candidate distribution fit with its KS result.
struct FluctuationCandidate {
  Distribution dist;
  double ks_d = 0.0;
  double ks_p = 0.0;
  bool fit_ok = false;
};

// Selected inter-period fluctuation distribution plus all candidates.
struct FluctuationModel {
  Distribution dist;
  double ks_p = 0.0;
  std::vector<FluctuationCandidate> candidates;
};

enum class DampingScenario { None, Increase30, Decrease30 };

// Exponential deterioration a*exp(b t) (t in months) with a fluctuation
// distribution for the residual scatter. Damping models use b = 0 and carry
// the scenario exponent at projection time.
struct DeteriorationModel {
  double initial_value = 0.0;  // a
  double rate_per_month = 0.0; // b
  FluctuationModel fluctuation;
  bool is_damping = false;
};

// Arithmetic mean per calendar month (UTC); month_index anchored at the
// earliest month present.
MonthlySeries monthly_average(const std::vector<std::pair<UtcTime, double>>& samples);

// Least squares of value = a*exp(b t): linear fit on ln(value) refined by a
// single Gauss-Newton pass on the original scale. Needs >= 12 months and
// positive values.
std::pair<double, double> fit_exponential_trend(const MonthlySeries& series);

// ML fit of each requested family followed by a KS test; keeps the family
// with the largest p-value above 0.05. Throws DataError when no family
// qualifies (message lists all p-values).
FluctuationModel fit_fluctuation(const std::vector<double>& samples,
                                 const std::set<DistFamily>& families);

// Pearson correlation of paired series; needs >= 10 pairs.
double correlation_check(const std::vector<double>& a, const std::vector<double>& b);

// Property PDF in June of the given year: the fluctuation distribution
// re-centered so its mean equals the trend value at t = 12*year + 5 months.
// Damping scenarios scale the mean by exp(+-ln(1.3) * year / 100).
Distribution project(const DeteriorationModel& model, int year,
                     DampingScenario scenario = DampingScenario::None);

double scenario_factor(DampingScenario scenario, int year);

}  // namespace flutterlife
