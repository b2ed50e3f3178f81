#include "flutterlife/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "flutterlife/errors.hpp"

namespace flutterlife {

namespace {

constexpr double kEulerGamma = 0.57721566490153286060651209008240243;
constexpr double kInf = std::numeric_limits<double>::infinity();

double mean_of(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

void require_samples(const std::vector<double>& x, std::size_t n_min, const char* who) {
  if (x.size() < n_min) {
    throw DataError(std::string(who) + ": needs at least " + std::to_string(n_min) +
                    " samples, got " + std::to_string(x.size()));
  }
  const double m = mean_of(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  if (!(ss > 0.0)) throw DataError(std::string(who) + ": degenerate sample (zero variance)");
}

// Series expansion of the lower regularized incomplete gamma.
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int i = 0; i < 500; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for the upper regularized incomplete gamma.
double gamma_q_contfrac(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

double gev_zfun(double k, double z) {
  // t(x) = (1 + k z)^(-1/k), with the Gumbel limit exp(-z) as k -> 0.
  if (std::fabs(k) < 1e-12) return std::exp(-z);
  const double u = 1.0 + k * z;
  if (u <= 0.0) return k > 0.0 ? kInf : 0.0;
  return std::pow(u, -1.0 / k);
}

}  // namespace

std::string family_name(DistFamily f) {
  switch (f) {
    case DistFamily::Normal: return "normal";
    case DistFamily::Lognormal: return "lognormal";
    case DistFamily::Gamma: return "gamma";
    case DistFamily::Gev: return "gev";
    case DistFamily::Gumbel: return "gumbel";
  }
  return "?";
}

DistFamily family_from_name(const std::string& name) {
  if (name == "normal") return DistFamily::Normal;
  if (name == "lognormal") return DistFamily::Lognormal;
  if (name == "gamma") return DistFamily::Gamma;
  if (name == "gev") return DistFamily::Gev;
  if (name == "gumbel") return DistFamily::Gumbel;
  throw DataError("unknown distribution family '" + name + "'");
}

double regularized_gamma_p(double a, double x) {
  if (!(a > 0.0) || x < 0.0) throw DataError("regularized_gamma_p: bad arguments");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_contfrac(a, x);
}

double digamma(double x) {
  // Recurrence up to x >= 6, then the asymptotic expansion.
  double result = 0.0;
  while (x < 6.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  result += std::log(x) - 0.5 * inv -
            inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 / 240.0)));
  return result;
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -kInf;
    if (p == 1.0) return kInf;
    throw DataError("normal_quantile: p outside [0,1]");
  }
  // Acklam's rational approximation, refined by one Halley step on erfc.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // One Halley refinement against the exact CDF.
  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

double Distribution::pdf(double x) const {
  const double y = x - shift;
  switch (family) {
    case DistFamily::Normal: {
      const double mu = params(0), s = params(1);
      const double z = (y - mu) / s;
      return std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * std::numbers::pi));
    }
    case DistFamily::Lognormal: {
      if (y <= 0.0) return 0.0;
      const double mu = params(0), s = params(1);
      const double z = (std::log(y) - mu) / s;
      return std::exp(-0.5 * z * z) / (y * s * std::sqrt(2.0 * std::numbers::pi));
    }
    case DistFamily::Gamma: {
      if (y <= 0.0) return 0.0;
      const double a = params(0), b = params(1);
      return std::exp((a - 1.0) * std::log(y) - y / b - std::lgamma(a) - a * std::log(b));
    }
    case DistFamily::Gev: {
      const double k = params(0), mu = params(1), s = params(2);
      const double z = (y - mu) / s;
      if (std::fabs(k) < 1e-12) {
        const double t = std::exp(-z);
        return (t / s) * std::exp(-t);
      }
      const double u = 1.0 + k * z;
      if (u <= 0.0) return 0.0;
      const double t = std::pow(u, -1.0 / k);
      return (1.0 / s) * std::exp(-t) * std::pow(u, -1.0 - 1.0 / k);
    }
    case DistFamily::Gumbel: {
      const double mu = params(0), s = params(1);
      const double z = (y - mu) / s;
      return std::exp(-(z + std::exp(-z))) / s;
    }
  }
  return 0.0;
}

double Distribution::cdf(double x) const {
  const double y = x - shift;
  switch (family) {
    case DistFamily::Normal: {
      const double z = (y - params(0)) / params(1);
      return 0.5 * std::erfc(-z / std::numbers::sqrt2);
    }
    case DistFamily::Lognormal: {
      if (y <= 0.0) return 0.0;
      const double z = (std::log(y) - params(0)) / params(1);
      return 0.5 * std::erfc(-z / std::numbers::sqrt2);
    }
    case DistFamily::Gamma: {
      if (y <= 0.0) return 0.0;
      return regularized_gamma_p(params(0), y / params(1));
    }
    case DistFamily::Gev: {
      const double z = (y - params(1)) / params(2);
      return std::exp(-gev_zfun(params(0), z));
    }
    case DistFamily::Gumbel: {
      const double z = (y - params(0)) / params(1);
      return std::exp(-std::exp(-z));
    }
  }
  return 0.0;
}

double Distribution::quantile(double p) const {
  if (!(p >= 0.0 && p <= 1.0)) throw DataError("quantile: p outside [0,1]");
  switch (family) {
    case DistFamily::Normal:
      return shift + params(0) + params(1) * normal_quantile(p);
    case DistFamily::Lognormal:
      if (p == 0.0) return shift;
      return shift + std::exp(params(0) + params(1) * normal_quantile(p));
    case DistFamily::Gamma: {
      if (p == 0.0) return shift;
      if (p == 1.0) return kInf;
      // Newton on the regularized incomplete gamma, initialized at the
      // Wilson-Hilferty approximation.
      const double a = params(0), b = params(1);
      const double g = normal_quantile(p);
      const double c = 2.0 / (9.0 * a);
      double x = a * std::pow(1.0 - c + g * std::sqrt(c), 3.0);
      if (!(x > 0.0)) x = a;
      for (int it = 0; it < 60; ++it) {
        const double f = regularized_gamma_p(a, x) - p;
        const double d = std::exp((a - 1.0) * std::log(x) - x - std::lgamma(a));
        if (d <= 0.0) break;
        double step = f / d;
        if (std::fabs(step) > 0.5 * x) step = std::copysign(0.5 * x, step);
        x -= step;
        if (std::fabs(step) < 1e-14 * (1.0 + x)) break;
      }
      return shift + x * b;
    }
    case DistFamily::Gev: {
      const double k = params(0), mu = params(1), s = params(2);
      if (p == 0.0) return support_lo();
      if (p == 1.0) return support_hi();
      const double w = -std::log(p);
      if (std::fabs(k) < 1e-12) return shift + mu - s * std::log(w);
      return shift + mu + s * (std::pow(w, -k) - 1.0) / k;
    }
    case DistFamily::Gumbel: {
      if (p == 0.0) return -kInf;
      if (p == 1.0) return kInf;
      return shift + params(0) - params(1) * std::log(-std::log(p));
    }
  }
  return 0.0;
}

double Distribution::mean() const {
  switch (family) {
    case DistFamily::Normal:
      return shift + params(0);
    case DistFamily::Lognormal:
      return shift + std::exp(params(0) + 0.5 * params(1) * params(1));
    case DistFamily::Gamma:
      return shift + params(0) * params(1);
    case DistFamily::Gev: {
      const double k = params(0), mu = params(1), s = params(2);
      if (std::fabs(k) < 1e-12) return shift + mu + s * kEulerGamma;
      if (k >= 1.0) return kInf;
      return shift + mu + s * (std::tgamma(1.0 - k) - 1.0) / k;
    }
    case DistFamily::Gumbel:
      return shift + params(0) + params(1) * kEulerGamma;
  }
  return 0.0;
}

double Distribution::variance() const {
  switch (family) {
    case DistFamily::Normal:
      return params(1) * params(1);
    case DistFamily::Lognormal: {
      const double s2 = params(1) * params(1);
      const double m = std::exp(params(0) + 0.5 * s2);
      return (std::exp(s2) - 1.0) * m * m;
    }
    case DistFamily::Gamma:
      return params(0) * params(1) * params(1);
    case DistFamily::Gev: {
      const double k = params(0), s = params(2);
      if (std::fabs(k) < 1e-12) {
        return s * s * std::numbers::pi * std::numbers::pi / 6.0;
      }
      if (k >= 0.5) return kInf;
      const double g1 = std::tgamma(1.0 - k);
      const double g2 = std::tgamma(1.0 - 2.0 * k);
      return s * s * (g2 - g1 * g1) / (k * k);
    }
    case DistFamily::Gumbel: {
      const double s = params(1);
      return s * s * std::numbers::pi * std::numbers::pi / 6.0;
    }
  }
  return 0.0;
}

double Distribution::sample(std::mt19937_64& rng) const {
  switch (family) {
    case DistFamily::Normal: {
      std::normal_distribution<double> d(params(0), params(1));
      return shift + d(rng);
    }
    case DistFamily::Lognormal: {
      std::lognormal_distribution<double> d(params(0), params(1));
      return shift + d(rng);
    }
    case DistFamily::Gamma: {
      std::gamma_distribution<double> d(params(0), params(1));
      return shift + d(rng);
    }
    case DistFamily::Gev:
    case DistFamily::Gumbel: {
      std::uniform_real_distribution<double> u(std::numeric_limits<double>::min(), 1.0);
      return quantile(u(rng));
    }
  }
  return 0.0;
}

double Distribution::support_lo() const {
  switch (family) {
    case DistFamily::Normal:
    case DistFamily::Gumbel:
      return -kInf;
    case DistFamily::Lognormal:
    case DistFamily::Gamma:
      return shift;
    case DistFamily::Gev: {
      const double k = params(0), mu = params(1), s = params(2);
      if (k > 1e-12) return shift + mu - s / k;
      return -kInf;
    }
  }
  return -kInf;
}

double Distribution::support_hi() const {
  if (family == DistFamily::Gev) {
    const double k = params(0), mu = params(1), s = params(2);
    if (k < -1e-12) return shift + mu - s / k;
  }
  return kInf;
}

Distribution Distribution::with_mean(double target_mean) const {
  Distribution out = *this;
  out.shift += target_mean - mean();
  return out;
}

Distribution fit_normal_mle(const std::vector<double>& x) {
  require_samples(x, 2, "fit_normal_mle");
  const double m = mean_of(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  Distribution d;
  d.family = DistFamily::Normal;
  d.params << m, std::sqrt(ss / static_cast<double>(x.size())), 0.0;
  return d;
}

Distribution fit_lognormal_mle(const std::vector<double>& x) {
  require_samples(x, 2, "fit_lognormal_mle");
  std::vector<double> logs;
  logs.reserve(x.size());
  for (double v : x) {
    if (!(v > 0.0)) throw DataError("fit_lognormal_mle: samples must be positive");
    logs.push_back(std::log(v));
  }
  const Distribution n = fit_normal_mle(logs);
  Distribution d;
  d.family = DistFamily::Lognormal;
  d.params = n.params;
  return d;
}

Distribution fit_gamma_mle(const std::vector<double>& x) {
  require_samples(x, 2, "fit_gamma_mle");
  double sum = 0.0, sum_log = 0.0;
  for (double v : x) {
    if (!(v > 0.0)) throw DataError("fit_gamma_mle: samples must be positive");
    sum += v;
    sum_log += std::log(v);
  }
  const double n = static_cast<double>(x.size());
  const double m = sum / n;
  const double s = std::log(m) - sum_log / n;  // > 0 by Jensen
  if (!(s > 0.0)) throw DataError("fit_gamma_mle: degenerate sample");
  // Newton on ln(a) - digamma(a) = s, from the Minka starting point.
  double a = (3.0 - s + std::sqrt((s - 3.0) * (s - 3.0) + 24.0 * s)) / (12.0 * s);
  for (int it = 0; it < 100; ++it) {
    const double f = std::log(a) - digamma(a) - s;
    const double h = 1e-6 * a;
    const double fp = (std::log(a + h) - digamma(a + h) - (std::log(a - h) - digamma(a - h))) /
                      (2.0 * h);
    const double step = f / fp;
    a -= step;
    if (!(a > 0.0)) a = 1e-8;
    if (std::fabs(step) < 1e-12 * (1.0 + a)) break;
  }
  Distribution d;
  d.family = DistFamily::Gamma;
  d.params << a, m / a, 0.0;
  return d;
}

namespace {

double gev_negloglik(const std::vector<double>& x, double k, double mu, double s) {
  if (!(s > 0.0)) return kInf;
  double nll = static_cast<double>(x.size()) * std::log(s);
  for (double v : x) {
    const double z = (v - mu) / s;
    if (std::fabs(k) < 1e-12) {
      nll += z + std::exp(-z);
    } else {
      const double u = 1.0 + k * z;
      if (u <= 1e-12) return kInf;
      nll += (1.0 + 1.0 / k) * std::log(u) + std::pow(u, -1.0 / k);
    }
  }
  return nll;
}

}  // namespace

Distribution fit_gev_mle(const std::vector<double>& x) {
  require_samples(x, 5, "fit_gev_mle");
  // Moment/Gumbel start, then Nelder-Mead on (k, mu, log s).
  const double m = mean_of(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  const double sd = std::sqrt(ss / static_cast<double>(x.size()));
  const double s0 = sd * std::sqrt(6.0) / std::numbers::pi;
  const double mu0 = m - s0 * kEulerGamma;

  using Point = Eigen::Vector3d;  // (k, mu, ln s)
  auto eval = [&x](const Point& p) {
    return gev_negloglik(x, p(0), p(1), std::exp(p(2)));
  };

  std::vector<Point> simplex = {
      Point(0.0, mu0, std::log(s0)),
      Point(0.15, mu0, std::log(s0)),
      Point(-0.15, mu0 + 0.2 * s0, std::log(s0)),
      Point(0.0, mu0 - 0.2 * s0, std::log(s0 * 1.3)),
  };
  std::vector<double> fv(4);
  for (int i = 0; i < 4; ++i) fv[static_cast<std::size_t>(i)] = eval(simplex[static_cast<std::size_t>(i)]);

  for (int iter = 0; iter < 600; ++iter) {
    std::array<std::size_t, 4> order = {0, 1, 2, 3};
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    const std::size_t best = order[0], worst = order[3], second = order[2];
    if (std::fabs(fv[worst] - fv[best]) < 1e-12 * (1.0 + std::fabs(fv[best]))) break;

    Point centroid = Point::Zero();
    for (std::size_t i = 0; i < 4; ++i) {
      if (i != worst) centroid += simplex[i];
    }
    centroid /= 3.0;

    const Point refl = centroid + (centroid - simplex[worst]);
    const double fr = eval(refl);
    if (fr < fv[best]) {
      const Point expd = centroid + 2.0 * (centroid - simplex[worst]);
      const double fe = eval(expd);
      if (fe < fr) {
        simplex[worst] = expd;
        fv[worst] = fe;
      } else {
        simplex[worst] = refl;
        fv[worst] = fr;
      }
    } else if (fr < fv[second]) {
      simplex[worst] = refl;
      fv[worst] = fr;
    } else {
      const Point contr = centroid + 0.5 * (simplex[worst] - centroid);
      const double fc = eval(contr);
      if (fc < fv[worst]) {
        simplex[worst] = contr;
        fv[worst] = fc;
      } else {
        for (std::size_t i = 0; i < 4; ++i) {
          if (i == best) continue;
          simplex[i] = simplex[best] + 0.5 * (simplex[i] - simplex[best]);
          fv[i] = eval(simplex[i]);
        }
      }
    }
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < 4; ++i) {
    if (fv[i] < fv[best]) best = i;
  }
  if (!std::isfinite(fv[best])) throw NumericalError("fit_gev_mle: likelihood not finite");
  Distribution d;
  d.family = DistFamily::Gev;
  d.params << simplex[best](0), simplex[best](1), std::exp(simplex[best](2));
  return d;
}

double kolmogorov_q(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 0.4) {
    // Theta-function form, accurate for small arguments.
    const double t = std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
    double sum = 0.0;
    for (int j = 1; j <= 20; j += 2) {
      sum += std::exp(-static_cast<double>(j) * static_cast<double>(j) * t);
    }
    const double cdf = std::sqrt(2.0 * std::numbers::pi) / lambda * sum;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sum = 0.0;
  double sign = 1.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * static_cast<double>(j) * static_cast<double>(j) *
                                 lambda * lambda);
    sum += sign * term;
    if (term < 1e-16) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_test(std::vector<double> samples, const Distribution& model) {
  if (samples.size() < 1) throw DataError("ks_test: empty sample");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = model.cdf(samples[i]);
    const double hi = (static_cast<double>(i) + 1.0) / n - f;
    const double lo = f - static_cast<double>(i) / n;
    d = std::max({d, hi, lo});
  }
  KsResult r;
  r.d = d;
  r.p = kolmogorov_q(std::sqrt(n) * d);
  return r;
}

}  // namespace flutterlife
