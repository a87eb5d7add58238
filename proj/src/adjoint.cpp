#include "tpms/adjoint.hpp"

#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>

#include "tpms/error.hpp"

namespace tpms {

namespace {

using SpMat = Eigen::SparseMatrix<double>;

Eigen::VectorXd solve_transposed(const SpMat& A, const Eigen::VectorXd& rhs, const char* what, double* residual,
                                 const std::vector<int>* shift_rows = nullptr) {
  SpMat At = A.transpose();
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
  lu.analyzePattern(At);
  lu.factorize(At);
  if (lu.info() != Eigen::Success && shift_rows) {
    // Same weak pinning as the primal energy solve.
    double scale = 0.0;
    for (int k = 0; k < At.outerSize(); ++k) {
      for (SpMat::InnerIterator it(At, k); it; ++it) scale = std::max(scale, std::abs(it.value()));
    }
    for (int r : *shift_rows) At.coeffRef(r, r) += 1e-12 * (scale > 0.0 ? scale : 1.0);
    lu.analyzePattern(At);
    lu.factorize(At);
  }
  if (lu.info() != Eigen::Success) {
    throw ConvergenceError(std::string(what) + ": transposed system is singular", {});
  }
  Eigen::VectorXd x = lu.solve(rhs);
  const double bn = rhs.norm();
  const double r = (At * x - rhs).norm() / (bn > 0.0 ? bn : 1.0);
  if (!x.allFinite() || r > 1e-6) {
    throw ConvergenceError(std::string(what) + ": transposed solve residual " + std::to_string(r), {r});
  }
  *residual = std::max(*residual, r);
  return x;
}

}  // namespace

Sensitivity sensitivities(const PorousModel& model, const State& state, const ScalarField& gamma_hat,
                          const DensityFilter& filter, double w, const ObjectiveScales& scales) {
  if (filter.cell_count() != model.grid().cell_count()) {
    throw ContractError("filter was built for a different grid");
  }
  const double tol = 10.0 * model.config().tolerance;
  for (int f = 0; f < 2; ++f) {
    if (static_cast<int>(state.flow[f].size()) != model.flow_size(f) ||
        !(model.flow_relative_residual(state, gamma_hat, f) <= tol)) {
      throw ContractError("sensitivities need a converged flow state for this design");
    }
  }
  if (!(model.thermal_relative_residual(state, gamma_hat) <= 1e-8)) {
    throw ContractError("sensitivities need a converged temperature state for this design");
  }

  const Linearization L = model.linearize(state, gamma_hat, w, scales);
  Sensitivity out;
  out.objective = L.objective;

  std::vector<int> wall_rows;
  for (int c : model.core_cells()) wall_rows.push_back(model.temperature_index()[2][c]);
  const Eigen::VectorXd lam_T =
      solve_transposed(L.thermal_temperature, -L.dJ_dT, "energy adjoint", &out.adjoint_residual, &wall_rows);

  Eigen::VectorXd grad = L.dJ_ddesign + L.thermal_design.transpose() * lam_T;
  for (int f = 0; f < 2; ++f) {
    const Eigen::VectorXd rhs = -(L.dJ_dflow[f] + L.thermal_flow[f].transpose() * lam_T);
    const Eigen::VectorXd lam = solve_transposed(L.flow_state[f], rhs, "flow adjoint", &out.adjoint_residual);
    grad += L.flow_design[f].transpose() * lam;
  }

  const int n = model.grid().cell_count();
  out.dJ_dgamma_hat = ScalarField("dJ_dgamma_hat", "1", n);
  for (int c : model.core_cells()) out.dJ_dgamma_hat[c] = grad[model.design_index()[c]];
  out.dJ_dgamma = filter.apply_transpose(out.dJ_dgamma_hat);
  out.dJ_dgamma.name = "dJ_dgamma";
  return out;
}

}  // namespace tpms
