#include "flutterlife/trend.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "flutterlife/errors.hpp"

namespace flutterlife {

MonthlySeries monthly_average(const std::vector<std::pair<UtcTime, double>>& samples) {
  std::map<std::int64_t, std::pair<double, std::size_t>> buckets;
  for (const auto& [t, v] : samples) {
    auto& [sum, count] = buckets[month_number(t)];
    sum += v;
    ++count;
  }
  MonthlySeries out;
  if (buckets.empty()) return out;
  const std::int64_t first = buckets.begin()->first;
  for (const auto& [month, acc] : buckets) {
    MonthlyEntry e;
    e.month_index = month - first;
    e.value = acc.first / static_cast<double>(acc.second);
    e.count = acc.second;
    out.push_back(e);
  }
  return out;
}

std::pair<double, double> fit_exponential_trend(const MonthlySeries& series) {
  if (series.size() < 12) {
    throw DataError("fit_exponential_trend: needs at least 12 months, got " +
                    std::to_string(series.size()));
  }
  const Eigen::Index n = static_cast<Eigen::Index>(series.size());
  Eigen::VectorXd t(n), v(n), logv(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& e = series[static_cast<std::size_t>(i)];
    if (!(e.value > 0.0)) throw DataError("fit_exponential_trend: values must be positive");
    t(i) = static_cast<double>(e.month_index);
    v(i) = e.value;
    logv(i) = std::log(e.value);
  }

  // Linear least squares on the log scale.
  Eigen::MatrixXd x(n, 2);
  x.col(0).setOnes();
  x.col(1) = t;
  const Eigen::Vector2d beta = (x.transpose() * x).ldlt().solve(x.transpose() * logv);
  double a = std::exp(beta(0));
  double b = beta(1);

  // One Gauss-Newton pass on the original scale.
  Eigen::VectorXd model = (b * t.array()).exp().matrix() * a;
  Eigen::MatrixXd jac(n, 2);
  jac.col(0) = model / a;
  jac.col(1) = model.cwiseProduct(t);
  const Eigen::VectorXd resid = v - model;
  const Eigen::Vector2d delta = (jac.transpose() * jac).ldlt().solve(jac.transpose() * resid);
  a += delta(0);
  b += delta(1);
  return {a, b};
}

FluctuationModel fit_fluctuation(const std::vector<double>& samples,
                                 const std::set<DistFamily>& families) {
  if (samples.size() < 24) {
    throw DataError("fit_fluctuation: needs at least 24 samples, got " +
                    std::to_string(samples.size()));
  }
  if (families.empty()) throw DataError("fit_fluctuation: no candidate families");
  const double v0 = samples.front();
  if (std::all_of(samples.begin(), samples.end(), [&](double v) { return v == v0; })) {
    throw DataError("fit_fluctuation: degenerate sample (all values identical)");
  }

  FluctuationModel out;
  for (DistFamily fam : families) {
    FluctuationCandidate cand;
    try {
      switch (fam) {
        case DistFamily::Normal: cand.dist = fit_normal_mle(samples); break;
        case DistFamily::Lognormal: cand.dist = fit_lognormal_mle(samples); break;
        case DistFamily::Gamma: cand.dist = fit_gamma_mle(samples); break;
        case DistFamily::Gev: cand.dist = fit_gev_mle(samples); break;
        case DistFamily::Gumbel:
          throw DataError("gumbel is not a fluctuation family");
      }
      const KsResult ks = ks_test(samples, cand.dist);
      cand.ks_d = ks.d;
      cand.ks_p = ks.p;
      cand.fit_ok = true;
    } catch (const std::exception&) {
      cand.dist.family = fam;
      cand.fit_ok = false;
      cand.ks_p = 0.0;
    }
    out.candidates.push_back(cand);
  }

  const FluctuationCandidate* best = nullptr;
  for (const auto& c : out.candidates) {
    if (!c.fit_ok) continue;
    if (!best || c.ks_p > best->ks_p) best = &c;
  }
  if (!best || !(best->ks_p > 0.05)) {
    std::ostringstream msg;
    msg << "fit_fluctuation: no family passes the KS test at p > 0.05 (";
    for (std::size_t i = 0; i < out.candidates.size(); ++i) {
      const auto& c = out.candidates[i];
      msg << (i ? ", " : "") << family_name(c.dist.family) << ": p="
          << (c.fit_ok ? std::to_string(c.ks_p) : "fit failed");
    }
    msg << ")";
    throw DataError(msg.str());
  }
  out.dist = best->dist;
  out.ks_p = best->ks_p;
  return out;
}

double correlation_check(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw DataError("correlation_check: length mismatch");
  if (a.size() < 10) throw DataError("correlation_check: needs at least 10 pairs");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) throw DataError("correlation_check: zero variance input");
  return sab / std::sqrt(saa * sbb);
}

double scenario_factor(DampingScenario scenario, int year) {
  switch (scenario) {
    case DampingScenario::None: return 1.0;
    case DampingScenario::Increase30:
      return std::exp(std::log(1.3) * static_cast<double>(year) / 100.0);
    case DampingScenario::Decrease30:
      return std::exp(-std::log(1.3) * static_cast<double>(year) / 100.0);
  }
  return 1.0;
}

Distribution project(const DeteriorationModel& model, int year, DampingScenario scenario) {
  double mean;
  if (model.is_damping) {
    mean = model.initial_value * scenario_factor(scenario, year);
  } else {
    const double t_months = 12.0 * static_cast<double>(year) + 5.0;  // June
    mean = model.initial_value * std::exp(model.rate_per_month * t_months);
  }
  return model.fluctuation.dist.with_mean(mean);
}

}  // namespace flutterlife
