#pragma once

#include <Eigen/SparseCore>
#include <array>
#include <string>
#include <vector>

#include "tpms/grid.hpp"
#include "tpms/properties.hpp"

namespace tpms {

/// Per-fluid inflow and outflow data. Fluid index 0 is the hot stream.
struct BoundaryConditions {
  std::array<double, 2> inlet_speed{0.03, 0.03};              ///< Darcy inflow [m/s]
  std::array<double, 2> inlet_temperature{333.15, 293.15};    ///< [K]
  std::array<double, 2> outlet_pressure{0.0, 0.0};            ///< [Pa]

  void validate(const StructuredGrid& grid) const;
};

struct SolverConfig {
  /// Only "upwind" is implemented.
  std::string convection = "upwind";
  double relax_momentum = 0.7;
  double relax_pressure = 0.3;
  /// Accepted for configuration compatibility; the energy system is linear
  /// in the temperatures and is solved directly.
  double relax_energy = 0.9;
  /// Lagged-coefficient iterations run until the relative residual drops
  /// below this, then Newton takes over.
  double picard_tolerance = 1e-2;
  double tolerance = 1e-6;
  int max_iterations = 2000;
  /// No-slip (true) or free-slip side walls. With a single cell in z the z
  /// walls are always free-slip.
  bool no_slip_walls = true;
  /// Smoothing of |U| = sqrt(U.U + delta^2) [m/s].
  double speed_smoothing = 1e-10;
  Materials materials;

  void validate() const;
};

/// Discrete unknowns of a solve. Per fluid, `flow` holds the normal
/// velocity on every open interior or outlet face followed by the pressure
/// of every cell the fluid occupies; `temperature` holds T1 over fluid-1
/// cells, T2 over fluid-2 cells and the wall temperature over core cells.
struct State {
  std::array<std::vector<double>, 2> flow;
  std::vector<double> temperature;
  std::array<std::vector<double>, 2> flow_history;
  bool wall_regularized = false;
};

struct ObjectiveScales {
  double q_ref = 1.0;
  double dp_ref = 1.0;
};

struct ObjectiveValue {
  std::array<double, 2> q{0.0, 0.0};   ///< heat picked up or released per stream [W]
  std::array<double, 2> dp{0.0, 0.0};  ///< inlet-minus-outlet pressure per stream [Pa]
  double q_ave = 0.0;
  double dp_ave = 0.0;
  double J = 0.0;
};

/// Partial derivatives of the discrete residuals and the objective at one
/// state. Residual blocks: flow_f = R_f(s_f, g), thermal = R_T(T, s_0, s_1, g).
struct Linearization {
  std::array<Eigen::SparseMatrix<double>, 2> flow_state;    ///< dR_f/ds_f
  std::array<Eigen::SparseMatrix<double>, 2> flow_design;   ///< dR_f/dg
  Eigen::SparseMatrix<double> thermal_temperature;          ///< dR_T/dT
  std::array<Eigen::SparseMatrix<double>, 2> thermal_flow;  ///< dR_T/ds_f
  Eigen::SparseMatrix<double> thermal_design;               ///< dR_T/dg
  Eigen::VectorXd dJ_dT;
  std::array<Eigen::VectorXd, 2> dJ_dflow;
  Eigen::VectorXd dJ_ddesign;  ///< over core cells in grid order
  ObjectiveValue objective;
};

/// Steady homogenized two-fluid model on a staggered grid: normal
/// velocities on faces, pressures and temperatures at cell centres.
///
/// Momentum per unit volume on each face:
///   dp/dn + alpha u + beta |U| u - (mu/eps) lap u + (rho/eps) div(u u/eps) = 0
/// with first-order upwind convection and eps, alpha, beta taken from the
/// adjacent cells (harmonic mean of eps, arithmetic mean of the
/// resistances). Plenum cells use eps = 1 and no resistance. Energy:
///   rho cp div(U T_i) - div(k_f* grad T_i) = a_i (T_w - T_i)
///   -div(k_s* grad T_w) = -a_1 (T_w - T_1) - a_2 (T_w - T_2)
/// with a_i = h*(g, |U_i|) A(g) / L_cell^3 on core cells.
class PorousModel {
 public:
  PorousModel(const StructuredGrid& grid, const EffectivePropertySet& props,
              const BoundaryConditions& bc, const SolverConfig& cfg);

  const StructuredGrid& grid() const { return grid_; }
  const EffectivePropertySet& properties() const { return props_; }
  const BoundaryConditions& boundary() const { return bc_; }
  const SolverConfig& config() const { return cfg_; }

  int flow_size(int fluid) const { return flow_[fluid].size; }
  int face_count(int fluid) const { return static_cast<int>(flow_[fluid].faces.size()); }
  int temperature_size() const { return t_size_; }
  int design_size() const { return static_cast<int>(core_.size()); }
  const std::vector<int>& core_cells() const { return core_; }

  /// Solves both flow systems in place, warm-starting from `state.flow`
  /// when it has the right size. Throws ConvergenceError.
  void solve_flow(const ScalarField& gamma_hat, State& state) const;
  /// Solves the three coupled energy equations for the current flow.
  void solve_thermal(const ScalarField& gamma_hat, State& state) const;
  State solve(const ScalarField& gamma_hat, const State* warm = nullptr) const;

  ObjectiveValue objective(const State& state, const ScalarField& gamma_hat, double w,
                           const ObjectiveScales& scales = {}) const;

  /// Stacked residual [R_flow0 | R_flow1 | R_thermal].
  std::vector<double> residual(const State& state, const ScalarField& gamma_hat) const;
  /// Relative flow residual of one fluid as used for convergence.
  double flow_relative_residual(const State& state, const ScalarField& gamma_hat, int fluid) const;
  /// Energy residual norm relative to that of the zero temperature field.
  double thermal_relative_residual(const State& state, const ScalarField& gamma_hat) const;
  /// d residual / d [s_0 | s_1 | T] as one sparse matrix.
  Eigen::SparseMatrix<double> state_jacobian(const State& state, const ScalarField& gamma_hat) const;
  Linearization linearize(const State& state, const ScalarField& gamma_hat, double w,
                          const ObjectiveScales& scales) const;

  /// Normal velocity (positive along +axis) on a face of `cell`, including
  /// prescribed inflow and zero on walls.
  double face_velocity(const State& state, int fluid, int cell, Side side) const;
  VectorField velocity(const State& state, int fluid) const;
  ScalarField pressure(const State& state, int fluid) const;
  /// which: 0 -> T1, 1 -> T2, 2 -> wall. Zero outside the field's cells.
  ScalarField temperature(const State& state, int which) const;
  /// Mixing-cup outlet temperature of a stream [K].
  double outlet_temperature(const State& state, int fluid) const;
  /// Inlet volume flow of a stream [m^3/s].
  double volume_flow(int fluid) const;
  /// Area-averaged inlet static pressure including the half-cell resistance.
  double inlet_pressure(const State& state, const ScalarField& gamma_hat, int fluid) const;

  // Internal layout, public for the residual kernels.
  struct FaceRef {
    enum Kind : std::uint8_t { Wall, Unknown, Inlet } kind = Wall;
    int index = -1;      ///< unknown index for Unknown
    double value = 0.0;  ///< prescribed normal velocity for Inlet
  };
  struct Face {
    int axis = 0;
    int lo = -1;  ///< cell on the low side, -1 outside the domain
    int hi = -1;
    bool outlet = false;
  };
  struct FlowLayout {
    std::vector<Face> faces;
    std::vector<int> pressure;                 ///< unknown index per cell or -1
    std::vector<std::array<FaceRef, 6>> refs;  ///< per cell and side
    std::vector<std::pair<int, Side>> inlets;  ///< inlet cells and their side
    std::vector<int> outlet_faces;
    int size = 0;
  };
  const FlowLayout& layout(int fluid) const { return flow_[fluid]; }
  /// Temperature unknown per cell for T1, T2, wall (-1 when absent).
  const std::array<std::vector<int>, 3>& temperature_index() const { return t_index_; }
  /// Design index per cell (-1 outside the core).
  const std::vector<int>& design_index() const { return design_index_; }

 private:
  StructuredGrid grid_;
  EffectivePropertySet props_;
  BoundaryConditions bc_;
  SolverConfig cfg_;
  std::array<FlowLayout, 2> flow_;
  std::array<std::vector<int>, 3> t_index_;
  int t_size_ = 0;
  std::vector<int> core_;
  std::vector<int> design_index_;
};

/// Free-function forms.
void solve_flow(const PorousModel& model, const ScalarField& gamma_hat, State& state);
void solve_thermal(const PorousModel& model, const ScalarField& gamma_hat, State& state);
ObjectiveValue compute_objective(const PorousModel& model, const State& state,
                                 const ScalarField& gamma_hat, double w,
                                 const ObjectiveScales& scales = {});
std::vector<double> residual_operator(const PorousModel& model, const State& state,
                                      const ScalarField& gamma_hat);

}  // namespace tpms
