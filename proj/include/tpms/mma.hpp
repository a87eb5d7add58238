#pragma once

#include <vector>

namespace tpms {

struct MmaSettings {
  double asymptote_init = 0.5;  ///< initial asymptote offset as a fraction of the box range
  double asymptote_incr = 1.2;
  double asymptote_decr = 0.7;
  double move_limit = 0.2;      ///< fraction of the box range
  /// Closest and farthest allowed asymptote distance, as fractions of the
  /// box range. Near a minimum the iterates oscillate with an amplitude of
  /// about 0.9 * asymptote_min.
  double asymptote_min = 1e-3;
  double asymptote_max = 10.0;
  /// Convexity regularization relative to the largest |gradient| entry,
  /// which keeps the update invariant to a rescaling of the objective.
  double raa0 = 1e-5;

  void validate() const;
};

/// Asymptotes and iterate history of the box-constrained MMA.
struct MmaState {
  MmaSettings settings;
  std::vector<double> low, upp;
  std::vector<double> x_prev1, x_prev2;
  int iteration = 0;
};

/// The separable subproblem solved in one update, kept for inspection:
/// minimize sum_j p_j/(upp_j - y_j) + q_j/(y_j - low_j) over
/// lower_j <= y_j <= upper_j.
struct MmaSubproblem {
  std::vector<double> p, q, low, upp, lower, upper, y;

  /// Largest violation of the per-variable optimality conditions, relative
  /// to the local derivative scale p/(upp-y)^2 + q/(y-low)^2.
  double kkt_violation() const;
};

/// One MMA step on the box [x_min, x_max]. The subproblem is solved in
/// closed form from its stationarity condition and clipped to the move
/// limits, so the result satisfies the box exactly.
std::vector<double> mma_update(const std::vector<double>& x, const std::vector<double>& grad, MmaState& state,
                               double x_min = 0.0, double x_max = 1.0, MmaSubproblem* sub = nullptr);

/// Infinity norm of the projected gradient on the box: the first-order
/// optimality residual of a bound-constrained problem.
double projected_gradient_norm(const std::vector<double>& x, const std::vector<double>& grad, double x_min = 0.0,
                               double x_max = 1.0);

}  // namespace tpms
