#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <functional>
#include <map>
#include <optional>
#include <vector>

namespace flutterlife {

// Deck constants and first vertical/torsional mode shapes over [0, span].
struct BridgeModel {
  double deck_width = 0.0;        // B, m
  double span = 0.0;              // l, m
  double mass_per_length = 0.0;   // m0, kg/m
  double inertia_per_length = 0.0;// I0, kg m^2 / m
  double air_density = 1.225;     // rho, kg/m^3
  std::function<double(double)> h_v1;     // dimensionless vertical shape
  std::function<double(double)> alpha_t1; // dimensionless torsional shape

  // First asymmetric sine shapes sin(2 pi x / l) for both modes.
  static BridgeModel with_sine_shapes(double deck_width, double span,
                                      double mass_per_length,
                                      double inertia_per_length,
                                      double air_density = 1.225);
};

// Span-normalized shape integrals, generalized inertias and force scales.
struct ModalIntegrals {
  double g_vv = 0.0;
  double g_tt = 0.0;
  double g_vt = 0.0;
  double inertia_v1 = 0.0;  // m0 l B^2 g_vv
  double inertia_t1 = 0.0;  // I0 l g_tt
  double q_v1 = 0.0;        // 0.5 rho B^4 l / inertia_v1
  double q_t1 = 0.0;        // 0.5 rho B^4 l / inertia_t1
};
ModalIntegrals modal_integrals(const BridgeModel& bridge);

enum class Deriv { H1, H2, H3, H4, A1, A2, A3, A4 };
const char* deriv_name(Deriv d);
Deriv deriv_from_name(const std::string& name);

// Values of all eight derivatives at one reduced frequency.
struct DerivValues {
  double h1 = 0, h2 = 0, h3 = 0, h4 = 0;
  double a1 = 0, a2 = 0, a3 = 0, a4 = 0;
};

struct DerivativeCurve {
  Eigen::VectorXd coeffs;  // ascending powers of U_r
  double ur_min = 0.0;
  double ur_max = 0.0;
  double residual_rms = 0.0;
  int order = 0;
};

// Wind-tunnel polynomial set or the closed-form flat-plate set. Evaluation
// outside the fitted reduced-velocity range throws unless extrapolation is
// explicitly allowed.
class FlutterDerivativeSet {
 public:
  enum class Kind { Polynomial, FlatPlate };

  static FlutterDerivativeSet flat_plate();
  static FlutterDerivativeSet from_curves(std::array<DerivativeCurve, 8> curves);

  double value(Deriv d, double ur) const;
  DerivValues at_reduced_frequency(double k_reduced) const;  // U_r = 2 pi / K

  Kind kind() const { return kind_; }
  double ur_min() const;  // common valid range across curves
  double ur_max() const;
  const DerivativeCurve& curve(Deriv d) const {
    return curves_[static_cast<std::size_t>(d)];
  }
  void set_allow_extrapolation(bool allow) { allow_extrapolation_ = allow; }
  bool allow_extrapolation() const { return allow_extrapolation_; }

 private:
  Kind kind_ = Kind::FlatPlate;
  std::array<DerivativeCurve, 8> curves_{};
  bool allow_extrapolation_ = false;
};

// Measured points per derivative: (U_r, value). Exclusions are indices into
// each derivative's point list (aberrant points left out of the fit).
using DerivativeMeasurements = std::map<Deriv, std::vector<std::pair<double, double>>>;
FlutterDerivativeSet fit_derivatives(const DerivativeMeasurements& measurements,
                                     const std::map<Deriv, int>& orders,
                                     const std::map<Deriv, std::vector<std::size_t>>& exclusions = {});

// Theodorsen circulation function C(k) at half-chord reduced frequency k.
std::complex<double> theodorsen_function(double k);
// Closed-form flat-plate derivative set built on theodorsen_function.
FlutterDerivativeSet theodorsen_derivatives();

// Printed equation vs the physically consistent correction of the torsional
// row (E22 leading term 1 - chi^2, E21 scaled by q_t1).
enum class Eq4Variant { Corrected, AsPrinted };

struct FlutterParams {
  ModalIntegrals integrals;
  double zeta_v1 = 0.0;
  double zeta_t1 = 0.0;
  double freq_ratio = 0.0;  // K_v1 / K_t1 = f_v1 / f_t1
  Eq4Variant variant = Eq4Variant::Corrected;
};

// The 2x2 complex system matrix at reduced frequency K and frequency ratio chi.
Eigen::Matrix2cd flutter_system_matrix(double k_reduced, double chi,
                                       const DerivValues& dv, const FlutterParams& p);

struct FlutterSolution {
  double u_cr = 0.0;         // m/s
  double k_reduced = 0.0;    // K at flutter
  double chi = 0.0;          // flutter frequency / torsional frequency
  double flutter_omega = 0.0;// rad/s
  double ur = 0.0;           // 2 pi / K
};

struct FlutterScan {
  std::optional<FlutterSolution> solution;  // lowest critical speed
  std::vector<FlutterSolution> crossings;   // all branch crossings found
};

struct SolveOptions {
  double ur_lo = 5.0;
  double ur_hi = 16.0;
  int k_grid = 221;
  double chi_lo = 0.15;
  double chi_hi = 1.45;
  int chi_grid = 1401;
  Eq4Variant variant = Eq4Variant::Corrected;
};

// Determinant-root search: scans K, solves Re det = 0 and Im det = 0
// separately for chi, and locates the K where the branches cross.
FlutterScan solve_flutter(const BridgeModel& bridge, const FlutterDerivativeSet& derivs,
                          double f_v1, double f_t1, double zeta_v1, double zeta_t1,
                          const SolveOptions& options = {});

// One sample of the chi(K) root branches of Re det and Im det.
struct BranchSample {
  double ur = 0.0;
  double chi_re = 0.0;
  double chi_im = 0.0;
  bool valid = false;
};
std::vector<BranchSample> det_branch_diagnostics(const BridgeModel& bridge,
                                                 const FlutterDerivativeSet& derivs,
                                                 double f_v1, double f_t1, double zeta_v1,
                                                 double zeta_t1, const SolveOptions& options = {});

struct SweepOptions {
  double u_lo = 0.0;   // 0 -> derived from ur_lo * f_t1 * B
  double u_hi = 0.0;   // 0 -> derived from ur_hi * f_t1 * B
  int u_grid = 121;
  double ur_lo = 5.0;
  double ur_hi = 16.0;
  Eq4Variant variant = Eq4Variant::Corrected;
};

// Independent check: complex eigenvalue sweep over wind speed with
// fixed-point matching of the response frequency; reports the smallest U at
// which the least-damped eigenvalue turns unstable.
FlutterScan eigen_sweep_oracle(const BridgeModel& bridge, const FlutterDerivativeSet& derivs,
                               double f_v1, double f_t1, double zeta_v1, double zeta_t1,
                               const SweepOptions& options = {});

}  // namespace flutterlife
