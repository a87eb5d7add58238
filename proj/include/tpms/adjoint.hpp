#pragma once

#include "tpms/filter.hpp"
#include "tpms/porous_model.hpp"

namespace tpms {

struct Sensitivity {
  ScalarField dJ_dgamma_hat;  ///< zero outside the core
  ScalarField dJ_dgamma;      ///< after the filter transpose
  ObjectiveValue objective;
  /// Largest relative residual of the transposed solves.
  double adjoint_residual = 0.0;
};

/// Discrete adjoint gradient of J at a converged state. The flow systems
/// do not depend on temperature, so the transposed system is block
/// triangular: the energy multipliers are solved first, then one
/// multiplier per fluid.
///
/// Throws ContractError when `state` is not converged for `gamma_hat`
/// (relative flow residual above 10x the solver tolerance) and
/// ConvergenceError when a transposed solve fails.
Sensitivity sensitivities(const PorousModel& model, const State& state, const ScalarField& gamma_hat,
                          const DensityFilter& filter, double w, const ObjectiveScales& scales);

}  // namespace tpms
