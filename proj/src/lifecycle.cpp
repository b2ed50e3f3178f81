#include "flutterlife/lifecycle.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <random>

#include "flutterlife/errors.hpp"

namespace flutterlife {

double SiteWindModel::pdf(double s) const {
  const double z = (s - location) / scale;
  return std::exp(-(z + std::exp(-z))) / scale;
}

double SiteWindModel::cdf(double s) const {
  const double z = (s - location) / scale;
  return std::exp(-std::exp(-z));
}

double SiteWindModel::quantile(double p) const {
  if (!(p > 0.0 && p < 1.0)) throw DataError("SiteWindModel::quantile: p outside (0,1)");
  return location - scale * std::log(-std::log(p));
}

double SiteWindModel::return_speed(double period_years) const {
  if (!(period_years > 1.0)) throw DataError("return_speed: period must exceed 1 year");
  return quantile(1.0 - 1.0 / period_years);
}

SiteWindModel fit_gumbel_return_periods(
    const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 2) throw DataError("fit_gumbel_return_periods: needs >= 2 points");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!(points[i].first > 1.0)) {
      throw DataError("fit_gumbel_return_periods: return periods must exceed 1 year");
    }
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      if (points[i].first == points[j].first) {
        throw DataError("fit_gumbel_return_periods: duplicate return period " +
                        std::to_string(points[i].first));
      }
    }
  }
  // Reduced variate y_T = -ln(-ln(1 - 1/T)); speed = mu + sigma * y.
  const Eigen::Index n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& [t, speed] = points[static_cast<std::size_t>(i)];
    x(i, 0) = 1.0;
    x(i, 1) = -std::log(-std::log(1.0 - 1.0 / t));
    v(i) = speed;
  }
  Eigen::Vector2d beta;
  if (n == 2) {
    beta = Eigen::Matrix2d(x).partialPivLu().solve(v);
  } else {
    beta = (x.transpose() * x).ldlt().solve(x.transpose() * v);
  }
  if (!(beta(1) > 0.0)) {
    throw DataError("fit_gumbel_return_periods: non-positive scale (speeds must grow with T)");
  }
  SiteWindModel m;
  m.location = beta(0);
  m.scale = beta(1);
  return m;
}

double GridPdf::integral() const {
  if (density.size() < 2) return density.size() == 1 ? density(0) * dx : 0.0;
  return (density.sum() - 0.5 * (density(0) + density(density.size() - 1))) * dx;
}

double GridPdf::mean() const {
  const Eigen::Index n = density.size();
  if (n == 1) return x0;
  Eigen::ArrayXd w = density;
  w(0) *= 0.5;
  w(n - 1) *= 0.5;
  double s = 0.0, sx = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    s += w(i);
    sx += w(i) * x_at(i);
  }
  return sx / s;
}

double GridPdf::variance() const {
  const Eigen::Index n = density.size();
  if (n == 1) return 0.0;
  const double m = mean();
  Eigen::ArrayXd w = density;
  w(0) *= 0.5;
  w(n - 1) *= 0.5;
  double s = 0.0, sxx = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = x_at(i) - m;
    s += w(i);
    sxx += w(i) * d * d;
  }
  return sxx / s;
}

double GridPdf::stddev() const { return std::sqrt(variance()); }

double GridPdf::cdf(double x) const {
  const Eigen::Index n = density.size();
  if (n == 1) return x >= x0 ? 1.0 : 0.0;
  if (x <= x0) return 0.0;
  const double total = integral();
  const double pos = (x - x0) / dx;
  const auto idx = static_cast<Eigen::Index>(std::floor(pos));
  if (idx >= n - 1) return 1.0;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < idx; ++i) {
    acc += 0.5 * (density(i) + density(i + 1)) * dx;
  }
  const double frac = pos - static_cast<double>(idx);
  const double d_at = density(idx) + frac * (density(idx + 1) - density(idx));
  acc += 0.5 * (density(idx) + d_at) * frac * dx;
  return std::clamp(acc / total, 0.0, 1.0);
}

void GridPdf::renormalize() {
  const double total = integral();
  if (!(total > 0.0)) throw NumericalError("GridPdf::renormalize: zero mass");
  density /= total;
}

GridPdf GridPdf::from_distribution(const Distribution& dist, double dx, double tail_mass) {
  if (!(dx > 0.0)) throw DataError("GridPdf::from_distribution: dx must be positive");
  double lo = dist.quantile(tail_mass);
  double hi = dist.quantile(1.0 - tail_mass);
  if (!std::isfinite(lo)) lo = dist.mean() - 14.0 * std::sqrt(dist.variance());
  if (!std::isfinite(hi)) hi = dist.mean() + 14.0 * std::sqrt(dist.variance());
  const auto n = static_cast<Eigen::Index>(std::ceil((hi - lo) / dx)) + 1;
  GridPdf g;
  g.x0 = lo;
  g.dx = dx;
  g.density.resize(std::max<Eigen::Index>(n, 2));
  for (Eigen::Index i = 0; i < g.density.size(); ++i) {
    g.density(i) = dist.pdf(g.x_at(i));
  }
  return g;
}

namespace {

// Linear convolution of two sampled densities with identical spacing dx;
// the Riemann factor dx makes it approximate the continuous convolution.
Eigen::ArrayXd convolve(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b, double dx) {
  const Eigen::Index na = a.size(), nb = b.size();
  const Eigen::Index n_lin = na + nb - 1;
  if (na == 1) return b * (a(0) * dx);
  if (nb == 1) return a * (b(0) * dx);
  Eigen::Index n_fft = 1;
  while (n_fft < n_lin) n_fft <<= 1;

  Eigen::FFT<double> fft;
  std::vector<double> pa(static_cast<std::size_t>(n_fft), 0.0);
  std::vector<double> pb(static_cast<std::size_t>(n_fft), 0.0);
  for (Eigen::Index i = 0; i < na; ++i) pa[static_cast<std::size_t>(i)] = a(i);
  for (Eigen::Index i = 0; i < nb; ++i) pb[static_cast<std::size_t>(i)] = b(i);
  std::vector<std::complex<double>> fa, fb;
  fft.fwd(fa, pa);
  fft.fwd(fb, pb);
  for (std::size_t i = 0; i < fa.size(); ++i) fa[i] *= fb[i];
  std::vector<double> out;
  fft.inv(out, fa);

  Eigen::ArrayXd r(n_lin);
  for (Eigen::Index i = 0; i < n_lin; ++i) {
    r(i) = std::max(out[static_cast<std::size_t>(i)] * dx, 0.0);
  }
  return r;
}

// Scales a sampled pdf by a (possibly negative) coefficient and resamples it
// onto spacing dx by linear interpolation; preserves total mass.
GridPdf scale_and_resample(const GridPdf& src, double coeff, double dx) {
  if (coeff == 0.0) throw DataError("critical_speed_pdf: zero surrogate coefficient");
  GridPdf scaled;
  if (src.density.size() == 1) {
    scaled.x0 = coeff * src.x0;
    scaled.dx = dx;
    scaled.density = Eigen::ArrayXd::Constant(1, 1.0 / dx);
    return scaled;
  }
  const double mass = src.integral();
  const double a_end = coeff * src.x0;
  const double b_end = coeff * src.x_last();
  const double lo = std::min(a_end, b_end);
  const double hi = std::max(a_end, b_end);
  const auto n = static_cast<Eigen::Index>(std::ceil((hi - lo) / dx)) + 1;
  scaled.x0 = lo;
  scaled.dx = dx;
  scaled.density.resize(std::max<Eigen::Index>(n, 2));
  const double inv = 1.0 / std::fabs(coeff);
  for (Eigen::Index i = 0; i < scaled.density.size(); ++i) {
    const double x = (scaled.x_at(i)) / coeff;  // back to source coordinates
    const double pos = (x - src.x0) / src.dx;
    double v = 0.0;
    if (pos >= 0.0 && pos <= static_cast<double>(src.density.size() - 1)) {
      const auto idx = std::min(static_cast<Eigen::Index>(pos), src.density.size() - 2);
      const double frac = pos - static_cast<double>(idx);
      v = src.density(idx) + frac * (src.density(idx + 1) - src.density(idx));
    }
    scaled.density(i) = v * inv;
  }
  const double new_mass = scaled.integral();
  if (new_mass > 0.0 && mass > 0.0) scaled.density *= mass / new_mass;
  return scaled;
}

GridPdf convolve_four(std::array<GridPdf, 4> scaled, double intercept, double dx,
                      const ConvOptions& options) {
  Eigen::ArrayXd acc = scaled[0].density;
  double offset = scaled[0].x0;
  for (std::size_t i = 1; i < 4; ++i) {
    acc = convolve(acc, scaled[i].density, dx);
    offset += scaled[i].x0;
  }
  GridPdf out;
  out.x0 = offset + intercept;
  out.dx = dx;
  out.density = std::move(acc);

  // Physical support: drop any mass at negative speeds.
  if (out.x0 < 0.0) {
    const auto cut = static_cast<Eigen::Index>(std::ceil(-out.x0 / dx));
    if (cut >= out.density.size()) {
      throw NumericalError("critical_speed_pdf: support entirely below zero");
    }
    out.density = out.density.tail(out.density.size() - cut).eval();
    out.x0 += static_cast<double>(cut) * dx;
  }

  const double drift = std::fabs(out.integral() - 1.0);
  if (drift > options.max_drift) {
    throw NumericalError(
        "critical_speed_pdf: normalization drift " + std::to_string(drift) +
        " exceeds " + std::to_string(options.max_drift) + "; use a finer grid");
  }
  out.renormalize();
  return out;
}

}  // namespace

GridPdf critical_speed_pdf(const SurrogateModel& model, const std::array<GridPdf, 4>& pdfs,
                           const ConvOptions& options) {
  const std::array<double, 4> coeff = {model.alpha_v1, model.alpha_t1, model.beta_v1,
                                       model.beta_t1};
  double span = 2.0 * options.margin;
  for (std::size_t i = 0; i < 4; ++i) {
    if (coeff[i] == 0.0) throw DataError("critical_speed_pdf: zero surrogate coefficient");
    span += std::fabs(coeff[i]) * (pdfs[i].x_last() - pdfs[i].x0);
  }
  const double dx = options.fixed_dx > 0.0
                        ? options.fixed_dx
                        : span / static_cast<double>(options.grid_points - 1);
  std::array<GridPdf, 4> scaled;
  for (std::size_t i = 0; i < 4; ++i) scaled[i] = scale_and_resample(pdfs[i], coeff[i], dx);
  return convolve_four(std::move(scaled), model.intercept, dx, options);
}

GridPdf critical_speed_pdf(const SurrogateModel& model,
                           const std::array<Distribution, 4>& dists,
                           const ConvOptions& options) {
  const std::array<double, 4> coeff = {model.alpha_v1, model.alpha_t1, model.beta_v1,
                                       model.beta_t1};
  constexpr double tail = 1e-9;
  double span = 2.0 * options.margin;
  for (std::size_t i = 0; i < 4; ++i) {
    if (coeff[i] == 0.0) throw DataError("critical_speed_pdf: zero surrogate coefficient");
    double lo = dists[i].quantile(tail);
    double hi = dists[i].quantile(1.0 - tail);
    if (!std::isfinite(lo)) lo = dists[i].mean() - 14.0 * std::sqrt(dists[i].variance());
    if (!std::isfinite(hi)) hi = dists[i].mean() + 14.0 * std::sqrt(dists[i].variance());
    span += std::fabs(coeff[i]) * (hi - lo);
  }
  const double dx = options.fixed_dx > 0.0
                        ? options.fixed_dx
                        : span / static_cast<double>(options.grid_points - 1);

  // Sample each scaled property directly from its analytic pdf, on a grid
  // whose offsets are tied to the distribution mean so that year-over-year
  // projections translate the samples exactly.
  std::array<GridPdf, 4> scaled;
  for (std::size_t i = 0; i < 4; ++i) {
    const double c = coeff[i];
    double lo = dists[i].quantile(tail);
    double hi = dists[i].quantile(1.0 - tail);
    if (!std::isfinite(lo)) lo = dists[i].mean() - 14.0 * std::sqrt(dists[i].variance());
    if (!std::isfinite(hi)) hi = dists[i].mean() + 14.0 * std::sqrt(dists[i].variance());
    const double m = dists[i].mean();
    const double w_lo = c > 0.0 ? c * (lo - m) : c * (hi - m);
    const double w_hi = c > 0.0 ? c * (hi - m) : c * (lo - m);
    const auto n_lo = static_cast<Eigen::Index>(std::ceil(-w_lo / dx));
    const auto n_hi = static_cast<Eigen::Index>(std::ceil(w_hi / dx));
    GridPdf g;
    g.dx = dx;
    g.x0 = c * m - static_cast<double>(n_lo) * dx;
    g.density.resize(n_lo + n_hi + 1);
    const double inv = 1.0 / std::fabs(c);
    for (Eigen::Index j = 0; j < g.density.size(); ++j) {
      g.density(j) = dists[i].pdf(g.x_at(j) / c) * inv;
    }
    scaled[i] = std::move(g);
  }
  return convolve_four(std::move(scaled), model.intercept, dx, options);
}

std::vector<double> mc_critical_speed(const SurrogateModel& model,
                                      const std::array<Distribution, 4>& dists,
                                      std::size_t n, std::uint64_t seed) {
  if (n < 10000) throw DataError("mc_critical_speed: needs at least 1e4 draws");
  std::mt19937_64 rng(seed);
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double f_v1 = dists[0].sample(rng);
    const double f_t1 = dists[1].sample(rng);
    const double z_v1 = dists[2].sample(rng);
    const double z_t1 = dists[3].sample(rng);
    out.push_back(model.predict(f_v1, f_t1, z_v1, z_t1));
  }
  return out;
}

double failure_probability(const GridPdf& vr_pdf, const SiteWindModel& wind) {
  const double lo = std::min(wind.location - 12.0 * wind.scale, vr_pdf.x0);
  const double hi = std::max(wind.location + 12.0 * wind.scale, vr_pdf.x_last());

  auto integrand = [&](double s) { return vr_pdf.cdf(s) * wind.pdf(s); };
  // Composite Simpson with step halving to an absolute tolerance of 1e-9.
  auto simpson_n = [&](Eigen::Index n) {
    const double h = (hi - lo) / static_cast<double>(n);
    double sum = integrand(lo) + integrand(hi);
    for (Eigen::Index i = 1; i < n; ++i) {
      sum += integrand(lo + h * static_cast<double>(i)) * (i % 2 ? 4.0 : 2.0);
    }
    return sum * h / 3.0;
  };
  Eigen::Index n = 2048;
  double prev = simpson_n(n);
  for (int it = 0; it < 10; ++it) {
    n *= 2;
    const double cur = simpson_n(n);
    if (std::fabs(cur - prev) < 1e-9) return std::clamp(cur, 0.0, 1.0);
    prev = cur;
  }
  return std::clamp(prev, 0.0, 1.0);
}

std::vector<YearlyReliability> lifecycle_curve(
    const std::array<DeteriorationModel, 4>& properties, const SurrogateModel& surrogate,
    const SiteWindModel& wind, DampingScenario scenario, const LifecycleOptions& options) {
  std::vector<YearlyReliability> out;
  out.reserve(static_cast<std::size_t>(options.horizon_years) + 1);

  // Pin the grid spacing at year 0 so every year uses an identically shaped
  // grid (the property PDFs only translate).
  ConvOptions conv = options.conv;
  if (conv.fixed_dx <= 0.0) {
    std::array<Distribution, 4> d0;
    for (std::size_t i = 0; i < 4; ++i) {
      d0[i] = project(properties[i], 0, properties[i].is_damping ? scenario : DampingScenario::None);
    }
    constexpr double tail = 1e-9;
    const std::array<double, 4> coeff = {surrogate.alpha_v1, surrogate.alpha_t1,
                                         surrogate.beta_v1, surrogate.beta_t1};
    double span = 2.0 * conv.margin;
    for (std::size_t i = 0; i < 4; ++i) {
      double lo = d0[i].quantile(tail);
      double hi = d0[i].quantile(1.0 - tail);
      if (!std::isfinite(lo)) lo = d0[i].mean() - 14.0 * std::sqrt(d0[i].variance());
      if (!std::isfinite(hi)) hi = d0[i].mean() + 14.0 * std::sqrt(d0[i].variance());
      span += std::fabs(coeff[i]) * (hi - lo);
    }
    conv.fixed_dx = span / static_cast<double>(conv.grid_points - 1);
  }

  for (int year = 0; year <= options.horizon_years; ++year) {
    std::array<Distribution, 4> dists;
    Eigen::Vector4d means;
    for (std::size_t i = 0; i < 4; ++i) {
      dists[i] = project(properties[i], year,
                         properties[i].is_damping ? scenario : DampingScenario::None);
      means(static_cast<Eigen::Index>(i)) = dists[i].mean();
    }
    YearlyReliability yr;
    yr.year = year;
    yr.scenario = scenario;
    yr.extrapolation = !surrogate.inside_box(means);
    yr.vr_pdf = critical_speed_pdf(surrogate, dists, conv);
    yr.vr_mean = yr.vr_pdf.mean();
    yr.vr_std = yr.vr_pdf.stddev();
    yr.p_f = failure_probability(yr.vr_pdf, wind);
    out.push_back(std::move(yr));
  }
  return out;
}

}  // namespace flutterlife
