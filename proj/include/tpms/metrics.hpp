#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tpms/porous_model.hpp"

namespace tpms {

/// Counterflow log-mean temperature difference of the two end differences.
/// Equal ends return their common value; a non-positive end difference
/// (temperature cross) throws InputError.
double lmtd(double dt_a, double dt_b);

/// (j/j0)/(f/f0)
double pec(double j, double f, double j0, double f0);

/// (1 - f_opt/f_uni) * 100. Throws InputError when f_uni is zero.
double improvement_rate(double f_low_opt, double f_low_uni);

struct Uniformity {
  double mean_speed = 0.0;  ///< area-weighted mean |u|
  double cv = 0.0;          ///< area-weighted standard deviation / mean
  std::vector<double> eta;
  std::vector<double> f_low;  ///< area fraction with |u| <= eta * mean, per eta
};

/// Uniformity of a sampled section: speeds and their areas.
Uniformity velocity_uniformity(const std::vector<double>& speeds, const std::vector<double>& areas,
                               const std::vector<double>& eta);

/// Section of the core at z-layer `layer` (the middle layer when negative)
/// for one fluid, weighted by the cell face area h^2.
Uniformity velocity_uniformity(const PorousModel& model, const State& state, int fluid, const std::vector<double>& eta,
                               int layer = -1);

/// 4 V_f / A_total with V_f = sum of both fluid volumes and A_total both
/// wall faces, from the per-cell property values on the core.
double hydraulic_diameter(const PorousModel& model, const ScalarField& gamma_hat);

struct Baseline {
  double j0 = 0.0;
  double f0 = 0.0;
};

struct MetricsReport {
  double q = 0.0;         ///< Q_ave [W]
  double dp = 0.0;        ///< dp_ave [Pa]
  double d_h = 0.0;       ///< [m]
  double re = 0.0;
  double f = 0.0;
  double lmtd = 0.0;      ///< [K]
  double u_coeff = 0.0;   ///< overall coefficient [W/(m^2 K)]
  double nu = 0.0;
  double pr = 0.0;
  double j = 0.0;
  double pec = 0.0;
  double area_total = 0.0;   ///< [m^2]
  double length = 0.0;       ///< core length along the flow [m]
  double heat_density = 0.0; ///< Q per core volume [W/m^3]
  std::array<double, 4> terminal_temperatures{};  ///< hot in, hot out, cold in, cold out [K]
  bool valid = true;      ///< false when the heat-transfer metrics are suppressed
  std::string flag;
  Uniformity uniformity;  ///< fluid 1 section
  std::optional<double> improvement_rate;

  std::string to_json() const;
  static std::string csv_header();
  std::string csv_row() const;
};

/// Metrics of a converged state. The flow length is the core extent along
/// the axis carrying most of the core flow of fluid 1, u_in the mean of the
/// two inlet speeds.
/// Without a baseline, PEC is reported relative to the state itself.
MetricsReport dimensionless_suite(const PorousModel& model, const State& state, const ScalarField& gamma_hat,
                                  const std::optional<Baseline>& baseline = std::nullopt,
                                  const std::vector<double>& eta = {0.05, 0.1, 0.15, 0.2, 0.25, 0.3});

/// j and f of the uniform gamma_hat = 0 design on the same model.
Baseline uniform_baseline(const PorousModel& model);

}  // namespace tpms
