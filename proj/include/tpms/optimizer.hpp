#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tpms/filter.hpp"
#include "tpms/mma.hpp"
#include "tpms/porous_model.hpp"

namespace tpms {

struct OptimizationProblem {
  StructuredGrid grid;
  EffectivePropertySet props;
  BoundaryConditions bc;
  SolverConfig solver;
  double w = 0.0;
  int max_iterations = 50;
  /// Stop once the largest design change of an update falls below this.
  double change_tolerance = 1e-3;
  /// Filter radius [m]; non-positive selects 1.5 grid spacings.
  double filter_radius = 0.0;
  double initial_gamma = 0.5;
  MmaSettings mma;
  /// Objective normalization. When unset, Q_ref and dp_ref are the values
  /// of the initial design so that w is dimensionless.
  std::optional<ObjectiveScales> scales;

  double effective_filter_radius() const { return filter_radius > 0.0 ? filter_radius : 1.5 * grid.h(); }
  void validate() const;
};

struct TraceRow {
  int iteration = 0;
  double J = 0.0;
  double q_ave = 0.0;
  double dp_ave = 0.0;
  double max_change = 0.0;  ///< largest |gamma| change of the update leading here
  double kkt = 0.0;         ///< projected-gradient norm at this design
};

struct OptimizationTrace {
  double w = 0.0;
  ObjectiveScales scales;
  ObjectiveValue initial;
  double initial_kkt = 0.0;
  std::vector<TraceRow> rows;  ///< one row per MMA update
  DesignField final_design;
  State final_state;
  ObjectiveValue final_objective;
  bool aborted = false;
  std::string error;

  std::string to_csv() const;
};

/// Density-method loop: filter, solve flow and energy, objective, adjoint,
/// MMA, repeated for the iteration budget or until the design settles.
/// A primal failure stops the loop and returns the partial trace with
/// `aborted` set.
OptimizationTrace optimize(const OptimizationProblem& problem);

/// Independent optimizations per weighting factor, run on up to `threads`
/// workers (0 reads TPMSOPT_THREADS, default 1). Results follow w_list
/// order; a failed run is reported through its trace.
std::vector<OptimizationTrace> sweep(const OptimizationProblem& problem, const std::vector<double>& w_list,
                                     int threads = 0);

/// w, final Q_ave and dp_ave per run.
std::string pareto_csv(const std::vector<OptimizationTrace>& traces);

}  // namespace tpms
