#pragma once

#include <string>
#include <vector>

#include "tpms/polynomial.hpp"

namespace tpms {

/// Constant fluid and wall material data.
struct Materials {
  double rho = 992.2;    ///< fluid density [kg/m^3]
  double mu = 6.53e-4;   ///< dynamic viscosity [Pa s]
  double cp = 4178.0;    ///< fluid heat capacity [J/(kg K)]
  double k_f = 0.631;    ///< fluid conductivity [W/(m K)]
  double k_s = 237.0;    ///< wall conductivity [W/(m K)]

  double prandtl() const { return mu * cp / k_f; }
  void validate() const;
};

/// Property tuple at one (gamma_hat, |U|) with first derivatives.
struct PropertyValues {
  double eps = 0.0;     ///< porosity of one fluid
  double area = 0.0;    ///< wall area per unit cell facing one fluid [m^2]
  double k_f = 0.0;     ///< effective fluid conductivity [W/(m K)]
  double k_s = 0.0;     ///< effective wall conductivity [W/(m K)]
  double alpha = 0.0;   ///< Darcy coefficient [Pa s/m^2]
  double beta = 0.0;    ///< Forchheimer coefficient [Pa s^2/m^3]
  double h = 0.0;       ///< exchange coefficient [W/(m^2 K)]

  double d_eps = 0.0, d_area = 0.0, d_k_f = 0.0, d_k_s = 0.0, d_alpha = 0.0, d_beta = 0.0;
  double dh_dgamma = 0.0;
  double dh_dspeed = 0.0;

  bool gamma_clamped = false;
  bool speed_clamped = false;
};

/// Interpolated effective properties of the graded gyroid. Scalar
/// properties are polynomials in gamma_hat; the exchange coefficient is a
/// bivariate polynomial in (gamma_hat, u) with u = (|U| - speed_lo) /
/// (speed_hi - speed_lo) the normalized Darcy speed.
struct EffectivePropertySet {
  std::string provenance = "synthetic";
  double cell_size = 4.6e-3;
  double c_min = 1.426e-3;
  double c_max = 3.75e-3;
  double speed_lo = 0.0;
  double speed_hi = 1.0;

  Polynomial eps, area, k_f, k_s, alpha, beta;
  Polynomial2D h_star;

  /// Evaluates with clamping of gamma_hat to [0, 1] and |U| to the validity
  /// range; derivatives across a clamped argument are zero.
  PropertyValues eval(double gamma_hat, double speed) const;

  /// Same polynomials with all gamma_hat dependence evaluated at a fixed
  /// tuple; used for constant-property test sets.
  static EffectivePropertySet constant(double eps, double area, double k_f, double k_s,
                                       double alpha, double beta, double h,
                                       double cell_size = 4.6e-3);

  /// Describes every violated invariant (empty when valid): eps in (0, 0.5]
  /// and decreasing, alpha > 0, beta >= 0, the resistance alpha U + beta U^2
  /// increasing in gamma_hat and |U| on a 101 x 101 grid, h > 0 on a 50 x 50
  /// grid, conductivities >= 0, area > 0.
  std::vector<std::string> check_invariants(bool require_monotone = true) const;
  /// Throws InputError listing the violations.
  void validate(bool require_monotone = true) const;

  std::string to_json() const;
  static EffectivePropertySet from_json(const std::string& text);
  void save(const std::string& path) const;
  static EffectivePropertySet load(const std::string& path);
};

}  // namespace tpms
