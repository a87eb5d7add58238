#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tpms/properties.hpp"

namespace tpms {

/// One unit-cell flow/heat run.
struct RveRow {
  double c = 0.0;      ///< level-set offset [m]
  double vdot = 0.0;   ///< volume flow rate [m^3/s]
  double dp = 0.0;     ///< pressure drop across the cell [Pa]
  double q = 0.0;      ///< wall-to-fluid heat rate [W]
  double t_w = 0.0;    ///< mean wall temperature [K]
  double t_i = 0.0;    ///< mean fluid temperature [K]
  double area = 0.0;   ///< wall area facing the fluid [m^2]
  double v_f = 0.0;    ///< fluid volume [m^3]
};

struct RveSampleTable {
  std::vector<RveRow> rows;
  double cell_size = 4.6e-3;
  Materials materials;
  std::string provenance = "measured";  ///< "measured" or "synthetic"
  /// Extra key=value metadata carried in '#' lines of the CSV.
  std::map<std::string, std::string> metadata;

  /// Distinct offsets in ascending order.
  std::vector<double> offsets() const;
  void validate() const;
};

/// CSV with header c_m,Vdot_m3s,dp_Pa,Q_W,Tw_K,Ti_K,A_m2,Vf_m3, preceded by
/// optional "# key=value" lines (cell_size_m, provenance, rho, mu, cp, k_f,
/// k_s are recognised).
void write_rve_csv(const std::string& path, const RveSampleTable& table);
RveSampleTable read_rve_csv(const std::string& path);
RveSampleTable parse_rve_csv(const std::string& text, const std::string& source = "<input>");

/// Q / (A (T_w - T_i)).
double compute_h_star(const RveRow& row);

/// Darcy-Forchheimer resistance of a cell: dp / L = alpha U + beta U^2.
struct DarcyForchheimerFit {
  double alpha = 0.0;
  double beta = 0.0;
  double residual_norm = 0.0;  ///< of dp / L [Pa/m]
  bool clamped = false;        ///< a coefficient was held at zero
};
DarcyForchheimerFit fit_darcy_forchheimer(const std::vector<double>& speed,
                                          const std::vector<double>& dp, double cell_size);

struct HSurfaceOptions {
  /// Fixed degrees; negative selects by cross-validation over 1..3 each.
  int deg_gamma = -1;
  int deg_speed = -1;
  int folds = 5;
  int validation_grid = 50;
};

struct HSurfaceFit {
  Polynomial2D poly;
  double speed_lo = 0.0;
  double speed_hi = 1.0;
  double rms = 0.0;              ///< over the samples [W/(m^2 K)]
  double cv_error = 0.0;         ///< RMS of held-out predictions
  bool penalized = false;        ///< positivity rows were required
  std::vector<std::string> candidates;  ///< "dg,du:cv" per tried pair
};

/// Least-squares h*(gamma_hat, u) with u the normalized speed.
HSurfaceFit fit_h_surface(const std::vector<double>& gamma_hat, const std::vector<double>& speed,
                          const std::vector<double>& h, const HSurfaceOptions& options = {});

/// Closed-form stand-in for unit-cell flow runs. With porosity eps and
/// fluid-side area A of the cell, D = 4 eps L^3 / A,
///   alpha = 64 mu / (eps D^2),  beta = 0.3 rho / (eps^2 D),
///   h* = k_f / D * (3 + 0.4 Re^0.6 Pr^(1/3)),  Re = rho U D / (eps mu),
/// with U = Vdot / L^2, dp = (alpha U + beta U^2) L, T_i = 312.65 + 0.2 r1,
/// T_w = 313.15 + 0.2 r2 (r uniform in [0,1) from the seed) and
/// Q = h* A (T_w - T_i).
struct SyntheticRveConfig {
  double cell_size = 4.6e-3;
  std::vector<double> offsets{1.426e-3, 1.75e-3, 2.0e-3, 2.25e-3, 2.5e-3,
                              2.75e-3,  3.0e-3,  3.25e-3, 3.5e-3, 3.75e-3};
  double vdot_lo = 1.0e-8;
  double vdot_hi = 2.5e-6;
  int flow_rates = 20;
  /// Geometric instead of linear spacing of the flow rates.
  bool log_spacing = false;
  Materials materials;
  /// Relative standard deviation of multiplicative noise on dp and Q.
  double noise = 0.0;
  long volume_samples = 262144;
  int area_resolution = 48;
};

double synthetic_alpha(double eps, double hydraulic_diameter, const Materials& m);
double synthetic_beta(double eps, double hydraulic_diameter, const Materials& m);
double synthetic_h_star(double eps, double hydraulic_diameter, double speed, const Materials& m);

RveSampleTable generate_synthetic_rve_table(std::uint64_t seed, const SyntheticRveConfig& config = {});

struct PropertyFitOptions {
  int scalar_degree = 2;
  int resistance_degree = 3;
  int conduction_resolution = 32;
  HSurfaceOptions h_surface;
};

struct PropertyFitReport {
  std::vector<double> offsets;
  std::vector<double> gamma_hat;
  std::vector<DarcyForchheimerFit> resistance;  ///< one per offset
  std::vector<double> eps, area, k_f, k_s;      ///< per-offset samples
  std::vector<bool> conduction_disconnected;
  HSurfaceFit h_surface;
  double eps_max_rel_dev = 0.0, area_max_rel_dev = 0.0, k_f_max_rel_dev = 0.0,
         k_s_max_rel_dev = 0.0, alpha_max_rel_dev = 0.0, beta_max_rel_dev = 0.0;
  std::vector<std::string> invariant_violations;

  std::string to_json() const;
};

/// Full pipeline: per-offset porosity, area and resistance from the table,
/// conductivities from voxel homogenization of the real geometry, then
/// polynomial fits in gamma_hat = (c - c_min) / (c_max - c_min).
EffectivePropertySet fit_properties(const RveSampleTable& table, const PropertyFitOptions& options,
                                    PropertyFitReport* report = nullptr);

}  // namespace tpms
