#include "flutterlife/bayes_id.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "flutterlife/errors.hpp"

namespace flutterlife {

namespace {

// |(beta^2 - 1) + i 2 zeta beta|^-2 with beta = f_mode / f_k.
double dynamic_amplification(double f_mode, double zeta, double f_k) {
  const double beta = f_mode / f_k;
  const double re = beta * beta - 1.0;
  const double im = 2.0 * zeta * beta;
  return 1.0 / (re * re + im * im);
}

// Per-band view of the FFT data: frequencies, spectral matrices
// A_k = F_k F_k^T + G_k G_k^T, and their traces.
struct BandData {
  std::vector<double> freq;
  std::vector<Eigen::MatrixXd> outer;
  std::vector<double> trace;
  Eigen::Index n_chan = 0;
};

BandData extract_band(const FftData& fft, const FrequencyBand& band) {
  if (!(band.f_lo > 0.0) || !(band.f_hi > band.f_lo)) {
    throw DataError("invalid frequency band [" + std::to_string(band.f_lo) + ", " +
                    std::to_string(band.f_hi) + "]");
  }
  BandData d;
  d.n_chan = fft.channel_count();
  for (Eigen::Index i = 0; i < fft.ordinate_count(); ++i) {
    const double f = fft.frequencies(i);
    if (f < band.f_lo || f > band.f_hi) continue;
    const Eigen::VectorXd fr = fft.z.col(i).head(d.n_chan);
    const Eigen::VectorXd gi = fft.z.col(i).tail(d.n_chan);
    Eigen::MatrixXd a = fr * fr.transpose() + gi * gi.transpose();
    d.freq.push_back(f);
    d.trace.push_back(a.trace());
    d.outer.push_back(std::move(a));
  }
  return d;
}

// L(theta) evaluated with the analytic eigenstructure of the single-mode
// covariance: C_k has eigenvalue s2/2 + S D_k/2 (x2, along the shape) and
// s2/2 elsewhere. Algebraically identical to the dense form.
double nll_band(const BandData& d, double f, double zeta, double s_psd, double sigma2,
                const Eigen::VectorXd& shape) {
  const double noise = 0.5 * sigma2;
  const double n_extra = 2.0 * static_cast<double>(d.n_chan) - 2.0;
  double total = 0.0;
  for (std::size_t k = 0; k < d.freq.size(); ++k) {
    const double e = noise + 0.5 * s_psd * dynamic_amplification(f, zeta, d.freq[k]);
    const double q = shape.dot(d.outer[k] * shape);
    const double r = d.trace[k];
    total += 2.0 * std::log(e) + n_extra * std::log(noise) + q / e + (r - q) / noise;
  }
  return 0.5 * total;
}

// Optimal unit shape for fixed scalars: leading eigenvector of
// sum_k (1/noise - 1/e_k) A_k.
Eigen::VectorXd optimal_shape(const BandData& d, double f, double zeta, double s_psd,
                              double sigma2) {
  const double noise = 0.5 * sigma2;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d.n_chan, d.n_chan);
  for (std::size_t k = 0; k < d.freq.size(); ++k) {
    const double e = noise + 0.5 * s_psd * dynamic_amplification(f, zeta, d.freq[k]);
    m += (1.0 / noise - 1.0 / e) * d.outer[k];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  Eigen::VectorXd v = es.eigenvectors().col(d.n_chan - 1);
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::fabs(v(i)) > 1e-12) {
      if (v(i) < 0.0) v = -v;
      break;
    }
  }
  return v;
}

struct Transform {
  double f_lo = 0.0;
  double f_hi = 0.0;

  double f_from(double u) const {
    const double s = 1.0 / (1.0 + std::exp(-u));
    return f_lo + (f_hi - f_lo) * s;
  }
  double u_from_f(double f) const {
    double s = (f - f_lo) / (f_hi - f_lo);
    s = std::clamp(s, 1e-9, 1.0 - 1e-9);
    return std::log(s / (1.0 - s));
  }
  double df_du(double u) const {
    const double s = 1.0 / (1.0 + std::exp(-u));
    return (f_hi - f_lo) * s * (1.0 - s);
  }
};

// Minimal BFGS with Armijo backtracking; gradient by central differences.
template <typename F>
bool bfgs_minimize(F&& func, Eigen::VectorXd& x, int max_iter, double grad_tol,
                   int* iterations_out) {
  const Eigen::Index n = x.size();
  auto gradient = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd g(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double h = 1e-5 * std::max(1.0, std::fabs(p(i)));
      Eigen::VectorXd lo = p, hi = p;
      lo(i) -= h;
      hi(i) += h;
      g(i) = (func(hi) - func(lo)) / (2.0 * h);
    }
    return g;
  };

  Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(n, n);
  double fx = func(x);
  Eigen::VectorXd g = gradient(x);
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    if (g.lpNorm<Eigen::Infinity>() <= grad_tol * (1.0 + std::fabs(fx))) {
      if (iterations_out) *iterations_out = iter;
      return true;
    }
    Eigen::VectorXd dir = -h_inv * g;
    if (dir.dot(g) >= 0.0) {
      h_inv.setIdentity();
      dir = -g;
    }
    double step = 1.0;
    const double slope = g.dot(dir);
    double f_new = fx;
    Eigen::VectorXd x_new = x;
    bool moved = false;
    for (int ls = 0; ls < 40; ++ls) {
      x_new = x + step * dir;
      f_new = func(x_new);
      if (std::isfinite(f_new) && f_new <= fx + 1e-4 * step * slope) {
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) {
      if (iterations_out) *iterations_out = iter;
      return g.lpNorm<Eigen::Infinity>() <= 100.0 * grad_tol * (1.0 + std::fabs(fx));
    }
    const Eigen::VectorXd g_new = gradient(x_new);
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12) {
      const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
      const Eigen::MatrixXd v = eye - (s * y.transpose()) / sy;
      h_inv = v * h_inv * v.transpose() + (s * s.transpose()) / sy;
    }
    x = x_new;
    fx = f_new;
    g = g_new;
  }
  if (iterations_out) *iterations_out = iter;
  return false;
}

// Orthonormal basis of the tangent space at a unit vector.
Eigen::MatrixXd tangent_basis(const Eigen::VectorXd& shape) {
  const Eigen::Index n = shape.size();
  Eigen::MatrixXd proj = Eigen::MatrixXd::Identity(n, n) - shape * shape.transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(proj, Eigen::ComputeThinU);
  return svd.matrixU().leftCols(n - 1);
}

}  // namespace

SpectralModel spectral_model(const ModalTheta& theta, double f_k) {
  if (!(f_k > 0.0)) throw DataError("spectral_model: frequency must be positive");
  const Eigen::Index n = theta.shape.size();
  const double beta = theta.frequency / f_k;
  const std::complex<double> den1(beta * beta - 1.0, 2.0 * theta.damping * beta);
  const std::complex<double> den2(beta * beta - 1.0, -2.0 * theta.damping * beta);
  SpectralModel out;
  out.h = theta.excitation_psd / (den1 * den2);

  const Eigen::MatrixXd outer = theta.shape * theta.shape.transpose();
  out.c = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  out.c.topLeftCorner(n, n) = 0.5 * out.h.real() * outer;
  out.c.bottomRightCorner(n, n) = 0.5 * out.h.real() * outer;
  out.c.topRightCorner(n, n) = -0.5 * out.h.imag() * outer;
  out.c.bottomLeftCorner(n, n) = 0.5 * out.h.imag() * outer;
  out.c += 0.5 * theta.error_psd * Eigen::MatrixXd::Identity(2 * n, 2 * n);
  return out;
}

double nll(const ModalTheta& theta, const FftData& fft, const FrequencyBand& band) {
  const BandData d = extract_band(fft, band);
  if (d.freq.size() < 20) {
    throw DataError("nll: band holds " + std::to_string(d.freq.size()) +
                    " ordinates, need at least 20");
  }
  if (!(theta.error_psd > 0.0)) throw NumericalError("nll: singular covariance (sigma2 <= 0)");
  return nll_band(d, theta.frequency, theta.damping, theta.excitation_psd,
                  theta.error_psd, theta.shape);
}

std::optional<ModalTheta> initial_guess(const FftData& fft, const FrequencyBand& band) {
  const BandData d = extract_band(fft, band);
  if (d.freq.size() < 20) return std::nullopt;
  const std::size_t nk = d.freq.size();
  const double n_chan = static_cast<double>(d.n_chan);

  // Channel-averaged periodogram over the band.
  std::vector<double> psd(nk);
  for (std::size_t k = 0; k < nk; ++k) psd[k] = d.trace[k] / n_chan;

  auto boxcar = [&](std::size_t half_width) {
    std::vector<double> out(nk);
    for (std::size_t k = 0; k < nk; ++k) {
      double sum = 0.0;
      int count = 0;
      for (std::ptrdiff_t o = -static_cast<std::ptrdiff_t>(half_width);
           o <= static_cast<std::ptrdiff_t>(half_width); ++o) {
        const std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(k) + o;
        if (idx < 0 || idx >= static_cast<std::ptrdiff_t>(nk)) continue;
        sum += psd[static_cast<std::size_t>(idx)];
        ++count;
      }
      out[k] = sum / count;
    }
    return out;
  };

  // Peak detection on a heavily averaged curve (periodogram scatter would
  // otherwise fake 3 dB excursions in pure noise), peak location on a
  // lightly averaged one.
  const std::vector<double> heavy = boxcar(std::max<std::size_t>(3, nk / 12));
  const std::vector<double> smooth = boxcar(1);
  const std::size_t heavy_peak =
      static_cast<std::size_t>(std::max_element(heavy.begin(), heavy.end()) - heavy.begin());

  // Band-edge level from the outer 10% of ordinates on each side.
  const std::size_t edge_n = std::max<std::size_t>(3, nk / 10);
  double edge = 0.0;
  for (std::size_t k = 0; k < edge_n; ++k) edge += psd[k] + psd[nk - 1 - k];
  edge /= static_cast<double>(2 * edge_n);
  if (!(heavy[heavy_peak] > 2.0 * edge)) return std::nullopt;  // no 3 dB peak

  // Refine the peak on the light curve near the detected location.
  const std::size_t window = std::max<std::size_t>(3, nk / 12);
  std::size_t peak = heavy_peak;
  const std::size_t lo_k = heavy_peak > window ? heavy_peak - window : 0;
  const std::size_t hi_k = std::min(heavy_peak + window, nk - 1);
  for (std::size_t k = lo_k; k <= hi_k; ++k) {
    if (smooth[k] > smooth[peak]) peak = k;
  }
  const double f0 = d.freq[peak];

  // Half-power bandwidth around the peak.
  const double half = 0.5 * (smooth[peak] + edge);
  double f_left = d.freq.front(), f_right = d.freq.back();
  for (std::size_t k = peak; k-- > 0;) {
    if (smooth[k] < half) {
      const double t = (half - smooth[k]) / (smooth[k + 1] - smooth[k]);
      f_left = d.freq[k] + t * (d.freq[k + 1] - d.freq[k]);
      break;
    }
  }
  for (std::size_t k = peak + 1; k < nk; ++k) {
    if (smooth[k] < half) {
      const double t = (smooth[k - 1] - half) / (smooth[k - 1] - smooth[k]);
      f_right = d.freq[k - 1] + t * (d.freq[k] - d.freq[k - 1]);
      break;
    }
  }
  double zeta0 = (f_right - f_left) / (2.0 * f0);
  zeta0 = std::clamp(zeta0, 0.001, 0.05);

  // Leading singular direction of the band-summed outer products.
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d.n_chan, d.n_chan);
  for (const auto& a : d.outer) m += a;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  Eigen::VectorXd shape = es.eigenvectors().col(d.n_chan - 1);
  for (Eigen::Index i = 0; i < shape.size(); ++i) {
    if (std::fabs(shape(i)) > 1e-12) {
      if (shape(i) < 0.0) shape = -shape;
      break;
    }
  }

  ModalTheta theta;
  theta.frequency = f0;
  theta.damping = zeta0;
  theta.shape = shape;
  theta.error_psd = std::max(edge / n_chan, 1e-300);
  const double peak_excess = std::max(smooth[peak] - edge, 0.1 * smooth[peak]);
  theta.excitation_psd = peak_excess * 4.0 * zeta0 * zeta0;
  return theta;
}

ModalEstimate identify_mode(const FftData& fft, const FrequencyBand& band) {
  ModalEstimate est;
  est.status = IdStatus::Skipped;

  const auto guess = initial_guess(fft, band);
  if (!guess) return est;

  const BandData d = extract_band(fft, band);
  const Transform tf{band.f_lo, band.f_hi};

  // Concentrated objective over (u_f, ln zeta, ln S, ln sigma2); the shape
  // is solved exactly per evaluation.
  auto objective = [&](const Eigen::VectorXd& u) {
    const double f = tf.f_from(u(0));
    const double zeta = std::exp(u(1));
    const double s_psd = std::exp(u(2));
    const double sigma2 = std::exp(u(3));
    if (zeta >= 0.5) return std::numeric_limits<double>::infinity();
    const Eigen::VectorXd shape = optimal_shape(d, f, zeta, s_psd, sigma2);
    return nll_band(d, f, zeta, s_psd, sigma2, shape);
  };

  Eigen::VectorXd u(4);
  u << tf.u_from_f(guess->frequency), std::log(guess->damping),
      std::log(guess->excitation_psd), std::log(guess->error_psd);

  int iters = 0;
  const bool converged = bfgs_minimize(objective, u, 300, 1e-8, &iters);

  ModalTheta mpv;
  mpv.frequency = tf.f_from(u(0));
  mpv.damping = std::exp(u(1));
  mpv.excitation_psd = std::exp(u(2));
  mpv.error_psd = std::exp(u(3));
  mpv.shape = optimal_shape(d, mpv.frequency, mpv.damping, mpv.excitation_psd, mpv.error_psd);

  est.mpv = mpv;
  est.iterations = iters;
  est.nll_value = nll_band(d, mpv.frequency, mpv.damping, mpv.excitation_psd,
                           mpv.error_psd, mpv.shape);
  if (!converged) {
    est.status = IdStatus::NotConverged;
    est.flagged = true;
    return est;
  }

  // Posterior covariance: finite-difference Hessian in the transformed
  // coordinates (scalars plus tangent-space shape coordinates), inverted and
  // mapped back by the delta method.
  const Eigen::Index n = mpv.shape.size();
  const Eigen::MatrixXd tang = tangent_basis(mpv.shape);
  const Eigen::Index dim = 4 + (n - 1);

  auto full = [&](const Eigen::VectorXd& p) {
    const double f = tf.f_from(p(0));
    const double zeta = std::exp(p(1));
    const double s_psd = std::exp(p(2));
    const double sigma2 = std::exp(p(3));
    Eigen::VectorXd shape = mpv.shape + tang * p.tail(n - 1);
    shape.normalize();
    return nll_band(d, f, zeta, s_psd, sigma2, shape);
  };

  Eigen::VectorXd p0 = Eigen::VectorXd::Zero(dim);
  p0.head(4) = u;
  Eigen::MatrixXd hess(dim, dim);
  Eigen::VectorXd steps(dim);
  for (Eigen::Index i = 0; i < dim; ++i) steps(i) = 1e-4 * std::max(1.0, std::fabs(p0(i)));
  const double f00 = full(p0);
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (Eigen::Index j = i; j < dim; ++j) {
      Eigen::VectorXd pp = p0, pm = p0, mp = p0, mm = p0;
      pp(i) += steps(i); pp(j) += steps(j);
      pm(i) += steps(i); pm(j) -= steps(j);
      mp(i) -= steps(i); mp(j) += steps(j);
      mm(i) -= steps(i); mm(j) -= steps(j);
      double v;
      if (i == j) {
        Eigen::VectorXd hi = p0, lo = p0;
        hi(i) += steps(i);
        lo(i) -= steps(i);
        v = (full(hi) - 2.0 * f00 + full(lo)) / (steps(i) * steps(i));
      } else {
        v = (full(pp) - full(pm) - full(mp) + full(mm)) / (4.0 * steps(i) * steps(j));
      }
      hess(i, j) = v;
      hess(j, i) = v;
    }
  }

  Eigen::LLT<Eigen::MatrixXd> llt(hess);
  if (llt.info() != Eigen::Success) {
    est.status = IdStatus::HessianNotPd;
    est.flagged = true;
    return est;
  }
  const Eigen::MatrixXd cov_u = llt.solve(Eigen::MatrixXd::Identity(dim, dim));

  // Jacobian of (f, zeta, S, sigma2, shape) w.r.t. the transformed coords.
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(4 + n, dim);
  jac(0, 0) = tf.df_du(u(0));
  jac(1, 1) = mpv.damping;
  jac(2, 2) = mpv.excitation_psd;
  jac(3, 3) = mpv.error_psd;
  jac.block(4, 4, n, n - 1) = tang;

  est.covariance = jac * cov_u * jac.transpose();
  est.cov_f = std::sqrt(std::max(est.covariance(0, 0), 0.0)) / mpv.frequency;
  est.cov_zeta = std::sqrt(std::max(est.covariance(1, 1), 0.0)) / mpv.damping;
  est.status = IdStatus::Converged;
  est.flagged = est.cov_f > 0.05 || mpv.damping < 1e-4 || mpv.damping > 0.10;
  return est;
}

}  // namespace flutterlife
