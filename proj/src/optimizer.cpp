#include "tpms/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <thread>

#include "tpms/adjoint.hpp"
#include "tpms/error.hpp"
#include "tpms/field_io.hpp"

namespace tpms {

void OptimizationProblem::validate() const {
  grid.validate();
  bc.validate(grid);
  solver.validate();
  mma.validate();
  if (!(w >= 0.0) || !std::isfinite(w)) throw InputError("weighting factor w must be non-negative");
  if (max_iterations < 0) throw InputError("iteration budget must be non-negative");
  if (!(change_tolerance >= 0.0)) throw InputError("change tolerance must be non-negative");
  if (!(initial_gamma >= 0.0 && initial_gamma <= 1.0)) throw InputError("initial gamma must lie in [0, 1]");
  if (scales && !(scales->q_ref > 0.0 && scales->dp_ref > 0.0)) {
    throw InputError("objective reference values must be positive");
  }
}

std::string OptimizationTrace::to_csv() const {
  std::ostringstream out;
  out << "iter,J,Q_ave_W,dp_ave_Pa,max_dgamma,kkt\n";
  out << 0 << ',' << format_double(initial.J) << ',' << format_double(initial.q_ave) << ','
      << format_double(initial.dp_ave) << ',' << format_double(0.0) << ',' << format_double(initial_kkt) << '\n';
  for (const auto& r : rows) {
    out << r.iteration << ',' << format_double(r.J) << ',' << format_double(r.q_ave) << ','
        << format_double(r.dp_ave) << ',' << format_double(r.max_change) << ',' << format_double(r.kkt) << '\n';
  }
  return out.str();
}

namespace {

std::vector<double> core_values(const StructuredGrid& grid, const ScalarField& f) {
  std::vector<double> v;
  for (int c : grid.core_cells()) v.push_back(f[c]);
  return v;
}

}  // namespace

OptimizationTrace optimize(const OptimizationProblem& problem) {
  problem.validate();
  const auto& grid = problem.grid;
  const PorousModel model(grid, problem.props, problem.bc, problem.solver);
  const DensityFilter filter(grid, problem.effective_filter_radius());
  const std::vector<int> core = grid.core_cells();

  OptimizationTrace trace;
  trace.w = problem.w;
  ScalarField gamma("gamma", "1", grid.cell_count());
  for (int c : core) gamma[c] = problem.initial_gamma;

  State state;
  bool scales_fixed = problem.scales.has_value();
  auto evaluate = [&](const ScalarField& g, ObjectiveValue& value, std::vector<double>& grad) {
    const ScalarField gh = filter.apply(g);
    model.solve_flow(gh, state);
    model.solve_thermal(gh, state);
    if (!scales_fixed) {
      // First evaluation fixes the normalization.
      scales_fixed = true;
      const auto raw = model.objective(state, gh, problem.w);
      trace.scales.q_ref = raw.q_ave > 0.0 ? raw.q_ave : 1.0;
      trace.scales.dp_ref = raw.dp_ave > 0.0 ? raw.dp_ave : 1.0;
    }
    const auto sens = sensitivities(model, state, gh, filter, problem.w, trace.scales);
    value = sens.objective;
    grad = core_values(grid, sens.dJ_dgamma);
  };
  if (problem.scales) trace.scales = *problem.scales;

  auto finish = [&](const ScalarField& g) {
    trace.final_design = DesignField::from_gamma(grid, g, problem.effective_filter_radius(), problem.props.c_min,
                                                 problem.props.c_max);
    trace.final_state = state;
  };

  std::vector<double> grad;
  try {
    evaluate(gamma, trace.initial, grad);
  } catch (const ConvergenceError& e) {
    trace.aborted = true;
    trace.error = e.what();
    finish(gamma);
    return trace;
  }
  std::vector<double> x = core_values(grid, gamma);
  trace.initial_kkt = projected_gradient_norm(x, grad);
  trace.final_objective = trace.initial;

  MmaState mma;
  mma.settings = problem.mma;
  for (int it = 1; it <= problem.max_iterations; ++it) {
    const std::vector<double> next = mma_update(x, grad, mma);
    double change = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) change = std::max(change, std::abs(next[j] - x[j]));
    ScalarField trial = gamma;
    for (std::size_t j = 0; j < core.size(); ++j) trial[core[j]] = next[j];
    ObjectiveValue value;
    std::vector<double> trial_grad;
    try {
      evaluate(trial, value, trial_grad);
    } catch (const ConvergenceError& e) {
      trace.aborted = true;
      trace.error = "iteration " + std::to_string(it) + ": " + e.what();
      break;
    }
    gamma = std::move(trial);
    x = next;
    grad = std::move(trial_grad);
    trace.final_objective = value;
    trace.rows.push_back({it, value.J, value.q_ave, value.dp_ave, change, projected_gradient_norm(x, grad)});
    if (change < problem.change_tolerance) break;
  }
  finish(gamma);
  return trace;
}

std::vector<OptimizationTrace> sweep(const OptimizationProblem& problem, const std::vector<double>& w_list,
                                     int threads) {
  if (w_list.empty()) throw InputError("weighting-factor list is empty");
  for (double w : w_list) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw InputError("weighting factors must be non-negative");
  }
  if (threads <= 0) {
    threads = 1;
    if (const char* env = std::getenv("TPMSOPT_THREADS")) threads = std::max(1, std::atoi(env));
  }
  threads = std::min<int>(threads, static_cast<int>(w_list.size()));

  std::vector<OptimizationTrace> out(w_list.size());
  auto run = [&](std::size_t i) {
    OptimizationProblem p = problem;
    p.w = w_list[i];
    try {
      out[i] = optimize(p);
    } catch (const Error& e) {
      out[i].w = w_list[i];
      out[i].aborted = true;
      out[i].error = e.what();
    }
  };
  if (threads == 1) {
    for (std::size_t i = 0; i < w_list.size(); ++i) run(i);
    return out;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < w_list.size(); i += threads) run(i);
    });
  }
  for (auto& th : pool) th.join();
  return out;
}

std::string pareto_csv(const std::vector<OptimizationTrace>& traces) {
  std::ostringstream out;
  out << "w,Q_ave_W,dp_ave_Pa,J,iterations,aborted\n";
  for (const auto& t : traces) {
    out << format_double(t.w) << ',' << format_double(t.final_objective.q_ave) << ','
        << format_double(t.final_objective.dp_ave) << ',' << format_double(t.final_objective.J) << ','
        << t.rows.size() << ',' << (t.aborted ? 1 : 0) << '\n';
  }
  return out.str();
}

}  // namespace tpms
