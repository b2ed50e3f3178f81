#include "flutterlife/flutter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "flutterlife/errors.hpp"

namespace flutterlife {

namespace {

constexpr double kPi = std::numbers::pi;

double simpson(const std::function<double(double)>& f, double lo, double hi, int n) {
  // n must be even.
  const double h = (hi - lo) / static_cast<double>(n);
  double sum = f(lo) + f(hi);
  for (int i = 1; i < n; ++i) {
    sum += f(lo + h * static_cast<double>(i)) * (i % 2 ? 4.0 : 2.0);
  }
  return sum * h / 3.0;
}

double polyval(const Eigen::VectorXd& coeffs, double x) {
  double acc = 0.0;
  for (Eigen::Index i = coeffs.size(); i-- > 0;) acc = acc * x + coeffs(i);
  return acc;
}

}  // namespace

BridgeModel BridgeModel::with_sine_shapes(double deck_width, double span,
                                          double mass_per_length,
                                          double inertia_per_length,
                                          double air_density) {
  BridgeModel b;
  b.deck_width = deck_width;
  b.span = span;
  b.mass_per_length = mass_per_length;
  b.inertia_per_length = inertia_per_length;
  b.air_density = air_density;
  b.h_v1 = [span](double x) { return std::sin(2.0 * kPi * x / span); };
  b.alpha_t1 = [span](double x) { return std::sin(2.0 * kPi * x / span); };
  return b;
}

ModalIntegrals modal_integrals(const BridgeModel& bridge) {
  if (!(bridge.span > 0.0) || !(bridge.deck_width > 0.0) ||
      !(bridge.mass_per_length > 0.0) || !(bridge.inertia_per_length > 0.0)) {
    throw DataError("modal_integrals: bridge constants must be positive");
  }
  if (!bridge.h_v1 || !bridge.alpha_t1) {
    throw DataError("modal_integrals: mode shapes are not set");
  }
  const double l = bridge.span;
  const int n = 4096;
  ModalIntegrals mi;
  mi.g_vv = simpson([&](double x) { return bridge.h_v1(x) * bridge.h_v1(x); }, 0.0, l, n) / l;
  mi.g_tt = simpson([&](double x) { return bridge.alpha_t1(x) * bridge.alpha_t1(x); }, 0.0, l, n) / l;
  mi.g_vt = simpson([&](double x) { return bridge.h_v1(x) * bridge.alpha_t1(x); }, 0.0, l, n) / l;
  if (!(mi.g_vv > 0.0) || !(mi.g_tt > 0.0)) {
    throw DataError("modal_integrals: degenerate mode shape (zero norm)");
  }
  const double b2 = bridge.deck_width * bridge.deck_width;
  mi.inertia_v1 = bridge.mass_per_length * l * b2 * mi.g_vv;
  mi.inertia_t1 = bridge.inertia_per_length * l * mi.g_tt;
  const double common = 0.5 * bridge.air_density * b2 * b2 * l;
  mi.q_v1 = common / mi.inertia_v1;
  mi.q_t1 = common / mi.inertia_t1;
  return mi;
}

const char* deriv_name(Deriv d) {
  switch (d) {
    case Deriv::H1: return "H1";
    case Deriv::H2: return "H2";
    case Deriv::H3: return "H3";
    case Deriv::H4: return "H4";
    case Deriv::A1: return "A1";
    case Deriv::A2: return "A2";
    case Deriv::A3: return "A3";
    case Deriv::A4: return "A4";
  }
  return "?";
}

Deriv deriv_from_name(const std::string& name) {
  static const std::map<std::string, Deriv> table = {
      {"H1", Deriv::H1}, {"H2", Deriv::H2}, {"H3", Deriv::H3}, {"H4", Deriv::H4},
      {"A1", Deriv::A1}, {"A2", Deriv::A2}, {"A3", Deriv::A3}, {"A4", Deriv::A4}};
  const auto it = table.find(name);
  if (it == table.end()) throw DataError("unknown flutter derivative '" + name + "'");
  return it->second;
}

FlutterDerivativeSet FlutterDerivativeSet::flat_plate() {
  FlutterDerivativeSet s;
  s.kind_ = Kind::FlatPlate;
  return s;
}

FlutterDerivativeSet FlutterDerivativeSet::from_curves(std::array<DerivativeCurve, 8> curves) {
  FlutterDerivativeSet s;
  s.kind_ = Kind::Polynomial;
  s.curves_ = std::move(curves);
  return s;
}

double FlutterDerivativeSet::ur_min() const {
  if (kind_ == Kind::FlatPlate) return 1e-6;
  double lo = 0.0;
  for (const auto& c : curves_) lo = std::max(lo, c.ur_min);
  return lo;
}

double FlutterDerivativeSet::ur_max() const {
  if (kind_ == Kind::FlatPlate) return 1e9;
  double hi = std::numeric_limits<double>::infinity();
  for (const auto& c : curves_) hi = std::min(hi, c.ur_max);
  return hi;
}

std::complex<double> theodorsen_function(double k) {
  if (!(k > 0.0)) throw DataError("theodorsen_function: k must be positive");
  // C(k) = H1(2)(k) / (H1(2)(k) + i H0(2)(k)) with Hn(2) = Jn - i Yn.
  const double j0 = std::cyl_bessel_j(0.0, k);
  const double j1 = std::cyl_bessel_j(1.0, k);
  const double y0 = std::cyl_neumann(0.0, k);
  const double y1 = std::cyl_neumann(1.0, k);
  const std::complex<double> h1(j1, -y1);
  const std::complex<double> h0(j0, -y0);
  return h1 / (h1 + std::complex<double>(0.0, 1.0) * h0);
}

namespace {

DerivValues flat_plate_values(double k_reduced) {
  const double K = k_reduced;
  const std::complex<double> c = theodorsen_function(0.5 * K);
  const double F = c.real();
  const double G = c.imag();
  DerivValues d;
  d.h1 = -2.0 * kPi * F / K;
  d.h2 = -(kPi / (2.0 * K)) * (1.0 + F + 4.0 * G / K);
  d.h3 = -(2.0 * kPi / (K * K)) * (F - K * G / 4.0);
  d.h4 = (kPi / 2.0) * (1.0 + 4.0 * G / K);
  d.a1 = kPi * F / (2.0 * K);
  d.a2 = -(kPi / (8.0 * K)) * (1.0 - F - 4.0 * G / K);
  d.a3 = (kPi / (2.0 * K * K)) * (K * K / 32.0 + F - K * G / 4.0);
  d.a4 = -kPi * G / (2.0 * K);
  return d;
}

}  // namespace

double FlutterDerivativeSet::value(Deriv d, double ur) const {
  if (kind_ == Kind::FlatPlate) {
    if (!(ur > 0.0)) throw DataError("derivative evaluation needs U_r > 0");
    const DerivValues v = flat_plate_values(2.0 * kPi / ur);
    switch (d) {
      case Deriv::H1: return v.h1;
      case Deriv::H2: return v.h2;
      case Deriv::H3: return v.h3;
      case Deriv::H4: return v.h4;
      case Deriv::A1: return v.a1;
      case Deriv::A2: return v.a2;
      case Deriv::A3: return v.a3;
      case Deriv::A4: return v.a4;
    }
  }
  const DerivativeCurve& c = curves_[static_cast<std::size_t>(d)];
  if (!allow_extrapolation_ && (ur < c.ur_min || ur > c.ur_max)) {
    throw DataError(std::string("derivative ") + deriv_name(d) + " evaluated at U_r=" +
                    std::to_string(ur) + " outside fitted range [" +
                    std::to_string(c.ur_min) + ", " + std::to_string(c.ur_max) + "]");
  }
  return polyval(c.coeffs, ur);
}

DerivValues FlutterDerivativeSet::at_reduced_frequency(double k_reduced) const {
  if (!(k_reduced > 0.0)) throw DataError("at_reduced_frequency: K must be positive");
  if (kind_ == Kind::FlatPlate) return flat_plate_values(k_reduced);
  const double ur = 2.0 * kPi / k_reduced;
  DerivValues v;
  v.h1 = value(Deriv::H1, ur);
  v.h2 = value(Deriv::H2, ur);
  v.h3 = value(Deriv::H3, ur);
  v.h4 = value(Deriv::H4, ur);
  v.a1 = value(Deriv::A1, ur);
  v.a2 = value(Deriv::A2, ur);
  v.a3 = value(Deriv::A3, ur);
  v.a4 = value(Deriv::A4, ur);
  return v;
}

FlutterDerivativeSet theodorsen_derivatives() { return FlutterDerivativeSet::flat_plate(); }

FlutterDerivativeSet fit_derivatives(const DerivativeMeasurements& measurements,
                                     const std::map<Deriv, int>& orders,
                                     const std::map<Deriv, std::vector<std::size_t>>& exclusions) {
  std::array<DerivativeCurve, 8> curves;
  for (int di = 0; di < 8; ++di) {
    const Deriv d = static_cast<Deriv>(di);
    const auto mit = measurements.find(d);
    if (mit == measurements.end()) {
      throw DataError(std::string("fit_derivatives: no measurements for ") + deriv_name(d));
    }
    int order = 2;
    if (const auto oit = orders.find(d); oit != orders.end()) order = oit->second;
    if (order < 1) throw DataError("fit_derivatives: polynomial order must be >= 1");

    std::vector<std::pair<double, double>> pts;
    const auto eit = exclusions.find(d);
    for (std::size_t i = 0; i < mit->second.size(); ++i) {
      if (eit != exclusions.end() &&
          std::find(eit->second.begin(), eit->second.end(), i) != eit->second.end()) {
        continue;
      }
      pts.push_back(mit->second[i]);
    }
    if (pts.size() < static_cast<std::size_t>(order) + 2) {
      throw DataError(std::string("fit_derivatives: ") + deriv_name(d) + " has " +
                      std::to_string(pts.size()) + " retained points, needs at least " +
                      std::to_string(order + 2));
    }

    Eigen::MatrixXd design(static_cast<Eigen::Index>(pts.size()), order + 1);
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(pts.size()));
    double lo = pts.front().first, hi = pts.front().first;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double ur = pts[i].first;
      lo = std::min(lo, ur);
      hi = std::max(hi, ur);
      double p = 1.0;
      for (int j = 0; j <= order; ++j) {
        design(static_cast<Eigen::Index>(i), j) = p;
        p *= ur;
      }
      rhs(static_cast<Eigen::Index>(i)) = pts[i].second;
    }
    DerivativeCurve c;
    c.coeffs = design.colPivHouseholderQr().solve(rhs);
    c.ur_min = lo;
    c.ur_max = hi;
    c.order = order;
    const Eigen::VectorXd resid = rhs - design * c.coeffs;
    c.residual_rms = std::sqrt(resid.squaredNorm() / static_cast<double>(pts.size()));
    curves[static_cast<std::size_t>(di)] = std::move(c);
  }
  return FlutterDerivativeSet::from_curves(std::move(curves));
}

Eigen::Matrix2cd flutter_system_matrix(double k_reduced, double chi,
                                       const DerivValues& dv, const FlutterParams& p) {
  if (!(k_reduced > 0.0) || !(chi > 0.0)) {
    throw DataError("flutter_system_matrix: K and chi must be positive");
  }
  const double chi2 = chi * chi;
  const double r = p.freq_ratio;
  const ModalIntegrals& mi = p.integrals;
  using C = std::complex<double>;

  const C e11(-chi2 + r * r - mi.q_v1 * chi2 * dv.h4 * mi.g_vv,
              2.0 * p.zeta_v1 * r * chi - mi.q_v1 * chi2 * dv.h1 * mi.g_vv);
  const C e12(-mi.q_v1 * chi2 * dv.h3 * mi.g_vt, -mi.q_v1 * chi2 * dv.h2 * mi.g_vt);

  const double q21 = p.variant == Eq4Variant::Corrected ? mi.q_t1 : mi.q_v1;
  const C e21(-q21 * chi2 * dv.a4 * mi.g_vt, -q21 * chi2 * dv.a1 * mi.g_vt);

  const double lead22 = p.variant == Eq4Variant::Corrected ? 1.0 - chi2 : 1.0 + chi2;
  const C e22(lead22 - mi.q_t1 * chi2 * dv.a3 * mi.g_tt,
              2.0 * p.zeta_t1 * chi - mi.q_t1 * chi2 * dv.a2 * mi.g_tt);

  Eigen::Matrix2cd e;
  e << e11, e12, e21, e22;
  return e;
}

namespace {

std::complex<double> det_e(double k_reduced, double chi, const DerivValues& dv,
                           const FlutterParams& p) {
  const Eigen::Matrix2cd e = flutter_system_matrix(k_reduced, chi, dv, p);
  return e(0, 0) * e(1, 1) - e(0, 1) * e(1, 0);
}

// All roots of the given real-valued slice of det E in chi over the grid.
template <typename Part>
std::vector<double> chi_roots(double k_reduced, const DerivValues& dv,
                              const FlutterParams& p, const SolveOptions& opt, Part part) {
  std::vector<double> roots;
  const int n = opt.chi_grid;
  const double dchi = (opt.chi_hi - opt.chi_lo) / static_cast<double>(n - 1);
  double prev_chi = opt.chi_lo;
  double prev_val = part(det_e(k_reduced, prev_chi, dv, p));
  for (int i = 1; i < n; ++i) {
    const double chi = opt.chi_lo + dchi * static_cast<double>(i);
    const double val = part(det_e(k_reduced, chi, dv, p));
    if (prev_val == 0.0) roots.push_back(prev_chi);
    if (prev_val * val < 0.0) {
      double lo = prev_chi, hi = chi, flo = prev_val;
      for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = part(det_e(k_reduced, mid, dv, p));
        if (flo * fm <= 0.0) {
          hi = mid;
        } else {
          lo = mid;
          flo = fm;
        }
        if (hi - lo < 1e-13) break;
      }
      roots.push_back(0.5 * (lo + hi));
    }
    prev_chi = chi;
    prev_val = val;
  }
  return roots;
}

double nearest(const std::vector<double>& values, double target) {
  double best = std::numeric_limits<double>::quiet_NaN();
  double dist = std::numeric_limits<double>::infinity();
  for (double v : values) {
    const double d = std::fabs(v - target);
    if (d < dist) {
      dist = d;
      best = v;
    }
  }
  return best;
}

struct BranchPoint {
  double chi_re = 0.0;
  double chi_im = 0.0;
  bool valid = false;
  double gap() const { return chi_re - chi_im; }
};

// Newton polish of detE(K, chi) = 0 in both arguments.
bool polish_root(const FlutterDerivativeSet& derivs, const FlutterParams& p,
                 double& k_reduced, double& chi) {
  for (int it = 0; it < 60; ++it) {
    const DerivValues dv = derivs.at_reduced_frequency(k_reduced);
    const std::complex<double> f0 = det_e(k_reduced, chi, dv, p);
    const double hk = 1e-7 * std::max(1.0, std::fabs(k_reduced));
    const double hc = 1e-7 * std::max(1.0, std::fabs(chi));
    const std::complex<double> fk =
        (det_e(k_reduced + hk, chi, derivs.at_reduced_frequency(k_reduced + hk), p) -
         det_e(k_reduced - hk, chi, derivs.at_reduced_frequency(k_reduced - hk), p)) /
        (2.0 * hk);
    const std::complex<double> fc =
        (det_e(k_reduced, chi + hc, dv, p) - det_e(k_reduced, chi - hc, dv, p)) / (2.0 * hc);
    Eigen::Matrix2d jac;
    jac << fk.real(), fc.real(), fk.imag(), fc.imag();
    Eigen::Vector2d rhs(-f0.real(), -f0.imag());
    const Eigen::Vector2d step = jac.fullPivLu().solve(rhs);
    if (!step.allFinite()) return false;
    k_reduced += step(0);
    chi += step(1);
    if (!(k_reduced > 0.0) || !(chi > 0.0)) return false;
    if (step.cwiseAbs().maxCoeff() < 1e-13) return true;
  }
  return true;
}

}  // namespace

FlutterScan solve_flutter(const BridgeModel& bridge, const FlutterDerivativeSet& derivs,
                          double f_v1, double f_t1, double zeta_v1, double zeta_t1,
                          const SolveOptions& options) {
  if (!(f_t1 > f_v1) || !(f_v1 > 0.0)) {
    throw DataError("solve_flutter: needs f_t1 > f_v1 > 0");
  }
  if (!(zeta_v1 > 0.0) || zeta_v1 >= 0.2 || !(zeta_t1 > 0.0) || zeta_t1 >= 0.2) {
    throw DataError("solve_flutter: damping ratios must lie in (0, 0.2)");
  }

  FlutterParams params;
  params.integrals = modal_integrals(bridge);
  params.zeta_v1 = zeta_v1;
  params.zeta_t1 = zeta_t1;
  params.freq_ratio = f_v1 / f_t1;
  params.variant = options.variant;

  double ur_lo = options.ur_lo;
  double ur_hi = options.ur_hi;
  if (!derivs.allow_extrapolation()) {
    ur_lo = std::max(ur_lo, derivs.ur_min());
    ur_hi = std::min(ur_hi, derivs.ur_max());
  }
  if (!(ur_hi > ur_lo)) {
    throw DataError("solve_flutter: empty reduced-velocity scan range [" +
                    std::to_string(ur_lo) + ", " + std::to_string(ur_hi) + "]");
  }

  const double omega_t1 = 2.0 * kPi * f_t1;
  const int nk = options.k_grid;

  // All real-part root branches at one K, each paired with its nearest
  // imaginary-part root.
  auto pairs_at = [&](double k_reduced) {
    const DerivValues dv = derivs.at_reduced_frequency(k_reduced);
    const auto re_roots =
        chi_roots(k_reduced, dv, params, options, [](std::complex<double> z) { return z.real(); });
    const auto im_roots =
        chi_roots(k_reduced, dv, params, options, [](std::complex<double> z) { return z.imag(); });
    std::vector<BranchPoint> pairs;
    if (im_roots.empty()) return pairs;
    for (double r : re_roots) {
      BranchPoint bp;
      bp.chi_re = r;
      bp.chi_im = nearest(im_roots, r);
      bp.valid = true;
      pairs.push_back(bp);
    }
    return pairs;
  };

  // Gap of the branch nearest to a chi hint; used during refinement.
  auto branch_gap = [&](double k_reduced, double& chi_hint, bool& ok) {
    const auto pairs = pairs_at(k_reduced);
    ok = false;
    double best = std::numeric_limits<double>::infinity();
    BranchPoint sel;
    for (const auto& bp : pairs) {
      const double d = std::fabs(bp.chi_re - chi_hint);
      if (d < best) {
        best = d;
        sel = bp;
        ok = true;
      }
    }
    if (!ok) return 0.0;
    chi_hint = sel.chi_re;
    return sel.gap();
  };

  FlutterScan scan;

  // March from high U_r (low K) to low U_r and watch every branch for a
  // sign change of the gap between its real-root and imaginary-root chi.
  std::vector<double> ur_values(static_cast<std::size_t>(nk));
  for (int i = 0; i < nk; ++i) {
    ur_values[static_cast<std::size_t>(i)] =
        ur_hi - (ur_hi - ur_lo) * static_cast<double>(i) / static_cast<double>(nk - 1);
  }

  double prev_k = 2.0 * kPi / ur_values[0];
  std::vector<BranchPoint> prev_pairs = pairs_at(prev_k);
  for (int i = 1; i < nk; ++i) {
    const double k = 2.0 * kPi / ur_values[static_cast<std::size_t>(i)];
    const std::vector<BranchPoint> cur_pairs = pairs_at(k);
    for (const auto& bp : prev_pairs) {
      // Continue this branch by chi proximity.
      const BranchPoint* next = nullptr;
      double best = std::numeric_limits<double>::infinity();
      for (const auto& cp : cur_pairs) {
        const double d = std::fabs(cp.chi_re - bp.chi_re);
        if (d < best) {
          best = d;
          next = &cp;
        }
      }
      if (!next || best > 0.2) continue;  // branch lost between grid points
      if (!(bp.gap() * next->gap() < 0.0)) continue;

      // Secant refinement of the branch gap in K.
      double k0 = prev_k, k1 = k;
      double g0 = bp.gap(), g1 = next->gap();
      double chi_star = next->chi_re;
      double k_star = k1;
      for (int it = 0; it < 60; ++it) {
        const double k2 = k1 - g1 * (k1 - k0) / (g1 - g0);
        if (!std::isfinite(k2) || k2 <= 0.0) break;
        bool ok = false;
        double hint = chi_star;
        const double g2 = branch_gap(k2, hint, ok);
        if (!ok) break;
        k0 = k1;
        g0 = g1;
        k1 = k2;
        g1 = g2;
        chi_star = hint;
        k_star = k2;
        if (std::fabs(g2) < 1e-9) break;
      }
      double k_ref = k_star, chi_ref = chi_star;
      if (polish_root(derivs, params, k_ref, chi_ref) && k_ref > 0.0 && chi_ref > 0.0) {
        k_star = k_ref;
        chi_star = chi_ref;
      }
      FlutterSolution sol;
      sol.k_reduced = k_star;
      sol.chi = chi_star;
      sol.flutter_omega = chi_star * omega_t1;
      sol.u_cr = chi_star * omega_t1 * bridge.deck_width / k_star;
      sol.ur = 2.0 * kPi / k_star;
      const bool dup = std::any_of(scan.crossings.begin(), scan.crossings.end(),
                                   [&](const FlutterSolution& s) {
                                     return std::fabs(s.k_reduced - sol.k_reduced) <
                                            1e-4 * sol.k_reduced;
                                   });
      if (!dup) scan.crossings.push_back(sol);
    }
    prev_pairs = cur_pairs;
    prev_k = k;
  }

  if (!scan.crossings.empty()) {
    scan.solution = *std::min_element(
        scan.crossings.begin(), scan.crossings.end(),
        [](const FlutterSolution& a, const FlutterSolution& b) { return a.u_cr < b.u_cr; });
  }
  return scan;
}

std::vector<BranchSample> det_branch_diagnostics(const BridgeModel& bridge,
                                                 const FlutterDerivativeSet& derivs,
                                                 double f_v1, double f_t1, double zeta_v1,
                                                 double zeta_t1, const SolveOptions& options) {
  FlutterParams params;
  params.integrals = modal_integrals(bridge);
  params.zeta_v1 = zeta_v1;
  params.zeta_t1 = zeta_t1;
  params.freq_ratio = f_v1 / f_t1;
  params.variant = options.variant;

  double ur_lo = options.ur_lo;
  double ur_hi = options.ur_hi;
  if (!derivs.allow_extrapolation()) {
    ur_lo = std::max(ur_lo, derivs.ur_min());
    ur_hi = std::min(ur_hi, derivs.ur_max());
  }

  std::vector<BranchSample> out;
  for (int i = 0; i < options.k_grid; ++i) {
    const double ur = ur_hi - (ur_hi - ur_lo) * static_cast<double>(i) /
                                  static_cast<double>(options.k_grid - 1);
    const double k = 2.0 * kPi / ur;
    const DerivValues dv = derivs.at_reduced_frequency(k);
    const auto re_roots =
        chi_roots(k, dv, params, options, [](std::complex<double> z) { return z.real(); });
    const auto im_roots =
        chi_roots(k, dv, params, options, [](std::complex<double> z) { return z.imag(); });
    BranchSample s;
    s.ur = ur;
    if (!re_roots.empty() && !im_roots.empty()) {
      // Report the closest real/imaginary root pair: the branch whose gap
      // closes at flutter.
      double best = std::numeric_limits<double>::infinity();
      for (double r : re_roots) {
        const double im = nearest(im_roots, r);
        if (std::fabs(r - im) < best) {
          best = std::fabs(r - im);
          s.chi_re = r;
          s.chi_im = im;
        }
      }
      s.valid = true;
    }
    out.push_back(s);
  }
  return out;
}

FlutterScan eigen_sweep_oracle(const BridgeModel& bridge, const FlutterDerivativeSet& derivs,
                               double f_v1, double f_t1, double zeta_v1, double zeta_t1,
                               const SweepOptions& options) {
  if (!(f_t1 > f_v1) || !(f_v1 > 0.0)) {
    throw DataError("eigen_sweep_oracle: needs f_t1 > f_v1 > 0");
  }
  const ModalIntegrals mi = modal_integrals(bridge);
  const double omega_v = 2.0 * kPi * f_v1;
  const double omega_t = 2.0 * kPi * f_t1;
  const double b = bridge.deck_width;

  double u_lo = options.u_lo > 0.0 ? options.u_lo : options.ur_lo * f_t1 * b;
  double u_hi = options.u_hi > 0.0 ? options.u_hi : options.ur_hi * f_t1 * b;
  if (!(u_hi > u_lo) || !(u_lo > 0.0)) {
    throw DataError("eigen_sweep_oracle: bad wind speed range");
  }

  // Least-damped eigenvalue growth rate at wind speed u, with the response
  // frequency matched by fixed-point iteration.
  auto growth = [&](double u, double* omega_out) {
    double omega = omega_t;
    double grow = 0.0;
    bool done = false;
    for (int it = 0; it < 200; ++it) {
      const double k_red = omega * b / u;
      const DerivValues dv = derivs.at_reduced_frequency(k_red);
      Eigen::Matrix2d k_eff, c_eff;
      const double w2 = omega * omega;
      k_eff << omega_v * omega_v - mi.q_v1 * w2 * dv.h4 * mi.g_vv,
          -mi.q_v1 * w2 * dv.h3 * mi.g_vt,
          -mi.q_t1 * w2 * dv.a4 * mi.g_vt,
          omega_t * omega_t - mi.q_t1 * w2 * dv.a3 * mi.g_tt;
      c_eff << 2.0 * zeta_v1 * omega_v - mi.q_v1 * omega * dv.h1 * mi.g_vv,
          -mi.q_v1 * omega * dv.h2 * mi.g_vt,
          -mi.q_t1 * omega * dv.a1 * mi.g_vt,
          2.0 * zeta_t1 * omega_t - mi.q_t1 * omega * dv.a2 * mi.g_tt;
      Eigen::Matrix4d sys = Eigen::Matrix4d::Zero();
      sys.topRightCorner<2, 2>().setIdentity();
      sys.bottomLeftCorner<2, 2>() = -k_eff;
      sys.bottomRightCorner<2, 2>() = -c_eff;
      const Eigen::EigenSolver<Eigen::Matrix4d> es(sys);
      // Critical eigenvalue: largest real part among positive-frequency ones.
      double best_re = -std::numeric_limits<double>::infinity();
      double best_im = omega;
      for (int e = 0; e < 4; ++e) {
        const std::complex<double> lam = es.eigenvalues()(e);
        if (lam.imag() <= 0.0) continue;
        if (lam.real() > best_re) {
          best_re = lam.real();
          best_im = lam.imag();
        }
      }
      const double omega_new = it < 30 ? best_im : 0.5 * (omega + best_im);
      grow = best_re;
      if (std::fabs(omega_new - omega) <= 1e-8 * omega) {
        omega = omega_new;
        done = true;
        break;
      }
      omega = omega_new;
    }
    if (!done) {
      throw NumericalError("eigen_sweep_oracle: frequency fixed point did not converge");
    }
    if (omega_out) *omega_out = omega;
    return grow;
  };

  FlutterScan scan;
  const int nu = options.u_grid;
  double prev_u = u_lo;
  double prev_g = growth(u_lo, nullptr);
  for (int i = 1; i < nu; ++i) {
    const double u = u_lo + (u_hi - u_lo) * static_cast<double>(i) / static_cast<double>(nu - 1);
    const double g = growth(u, nullptr);
    if (prev_g < 0.0 && g >= 0.0) {
      double lo = prev_u, hi = u;
      for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (growth(mid, nullptr) < 0.0) {
          lo = mid;
        } else {
          hi = mid;
        }
        if (hi - lo < 1e-10 * hi) break;
      }
      const double u_star = 0.5 * (lo + hi);
      double omega_star = omega_t;
      growth(u_star, &omega_star);
      FlutterSolution sol;
      sol.u_cr = u_star;
      sol.flutter_omega = omega_star;
      sol.chi = omega_star / omega_t;
      sol.k_reduced = omega_star * b / u_star;
      sol.ur = 2.0 * kPi / sol.k_reduced;
      scan.crossings.push_back(sol);
      if (!scan.solution) scan.solution = sol;
      break;
    }
    prev_u = u;
    prev_g = g;
  }
  return scan;
}

}  // namespace flutterlife
