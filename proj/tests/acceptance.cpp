// Runs every acceptance criterion at its stated tolerance and prints one
// PASS/FAIL line per criterion. Exit status is the number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "tpms/adjoint.hpp"
#include "tpms/conduction.hpp"
#include "tpms/field_io.hpp"
#include "tpms/metrics.hpp"
#include "tpms/optimizer.hpp"
#include "tpms/workbench.hpp"

using namespace tpms;
namespace fs = std::filesystem;

namespace {

constexpr double kL = 4.6e-3;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    detail << (detail.tellp() > 0 ? "; " : "") << what << (ok ? "" : " [fail]");
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

fs::path work_dir() {
  const auto d = fixture::cache_dir() / "acceptance";
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

// Shared between criteria.
struct Desk {
  EffectivePropertySet props;
  PropertyFitReport report;
  RveSampleTable table;
  OptimizationProblem problem;
  std::vector<double> w_list{0.0, 0.25, 0.5, 1.0};
  std::vector<OptimizationTrace> sweep;
  double sweep_seconds = 0.0;
};

Desk& desk() {
  static Desk d = [] {
    Desk x;
    x.table = generate_synthetic_rve_table(42);
    x.props = fit_properties(x.table, {}, &x.report);
    x.problem = RunConfig{}.problem(x.props);
    const auto t0 = std::chrono::steady_clock::now();
    x.sweep = sweep(x.problem, x.w_list);
    x.sweep_seconds = seconds_since(t0);
    return x;
  }();
  return d;
}

void criterion_1(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto m = measure_cell(1.426e-3, kL, 1000000, 16);
  const auto z = measure_cell(0.0, kL, 1000000, 16);
  const double dt = seconds_since(t0);
  const double total = m.eps1 + m.eps2;
  o.check(std::abs(total - 0.80) <= 0.01, "fluid fraction " + fmt("%.4f", total));
  o.check(std::abs(z.eps1 - 0.5) <= 0.005 && std::abs(z.eps2 - 0.5) <= 0.005,
          "c=0 fractions " + fmt("%.4f", z.eps1) + "/" + fmt("%.4f", z.eps2));
  o.check(dt < 10.0, "runtime " + fmt("%.2f s", dt));
}

void criterion_2(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const double alpha = 2e4, U = 0.01;
  const auto props = EffectivePropertySet::constant(0.4, 3e-5, 0.0, 0.0, alpha, 0.0, 1000.0);
  const auto grid = make_channel_grid(100, kL, false);
  BoundaryConditions bc;
  bc.inlet_speed = {U, U};
  SolverConfig cfg;
  cfg.no_slip_walls = false;
  PorousModel m(grid, props, bc, cfg);
  const ScalarField g("gamma_hat", "1", grid.cell_count(), 0.5);
  const auto obj = m.objective(m.solve(g), g, 0.0);
  const double dt = seconds_since(t0);
  const double rel = std::abs(obj.dp[0] / (alpha * U * 100 * kL) - 1.0);
  o.check(rel <= 1e-6, "relative error " + fmt("%.2e", rel));
  o.check(dt < 1.0, "runtime " + fmt("%.3f s", dt));
}

void criterion_3(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const int N = 200;
  const double A = 3e-5, hs = 1000.0, U = 0.01;
  const auto props = EffectivePropertySet::constant(0.4, A, 0.0, 0.0, 2e4, 0.0, hs);
  const auto grid = make_channel_grid(N, kL, true);
  BoundaryConditions bc;
  bc.inlet_speed = {U, U};
  SolverConfig cfg;
  cfg.no_slip_walls = false;
  PorousModel m(grid, props, bc, cfg);
  const ScalarField g("gamma_hat", "1", grid.cell_count(), 0.5);
  const auto s = m.solve(g);
  const double dt = seconds_since(t0);
  // Wall between the streams: half the cell's exchange conductance per side
  // in series.
  const double ntu = N * A * hs / 2.0 / (cfg.materials.rho * cfg.materials.cp * U * kL * kL);
  const double want = oracle::balanced_counterflow_effectiveness(ntu);
  const double dT = bc.inlet_temperature[0] - bc.inlet_temperature[1];
  const double hot = (bc.inlet_temperature[0] - m.outlet_temperature(s, 0)) / dT;
  const double cold = (m.outlet_temperature(s, 1) - bc.inlet_temperature[1]) / dT;
  const double rel = std::max(std::abs(hot / want - 1.0), std::abs(cold / want - 1.0));
  o.check(rel <= 0.01, "NTU " + fmt("%.3f", ntu) + ", effectiveness " + fmt("%.5f", cold) + " vs " +
                           fmt("%.5f", want) + " (" + fmt("%.3f%%", 100 * rel) + ")");
  o.check(dt < 5.0, "runtime " + fmt("%.2f s", dt));
}

void criterion_4(Outcome& o) {
  const auto& d = desk();
  PorousModel m(d.problem.grid, d.props, d.problem.bc, d.problem.solver);
  double worst = 0.0;
  int solves = 0;
  auto probe = [&](const ScalarField& gh) {
    const auto obj = m.objective(m.solve(gh), gh, 0.0);
    worst = std::max(worst, std::abs(obj.q[0] - obj.q[1]) / std::max(obj.q[0], obj.q[1]));
    ++solves;
  };
  for (double v : {0.0, 0.5, 1.0}) probe(ScalarField("gamma_hat", "1", d.problem.grid.cell_count(), v));
  for (const auto& t : d.sweep) probe(t.final_design.gamma_hat);
  o.check(worst <= 1e-3, std::to_string(solves) + " solves, worst |Q1-Q2|/max " + fmt("%.2e", worst));
}

void criterion_5(Outcome& o) {
  const double ks = 237.0;
  const auto full = conduction_homogenize(GyroidSpec::unit_cell(kL, 1.6 * kL), ConductionPhase::Solid, 16, ks);
  const double rel = std::abs(full.k_eff / ks - 1.0);
  o.check(rel <= 1e-6, "full solid " + fmt("%.2e", rel));

  const int n = 64;
  std::vector<double> k(static_cast<std::size_t>(n) * n * n, 0.0);
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) k[x + n * (y + n * z)] = y % 4 == 0 ? ks : 0.0;
  const auto slab = voxel_conductivity(k, n);
  const double srel = std::abs(slab.k_eff / (0.25 * ks) - 1.0);
  o.check(srel <= 0.01, "slab phi*k " + fmt("%.2e", srel));

  SyntheticRveConfig cfg;
  double prev = 0.0;
  bool mono = true;
  for (double c : cfg.offsets) {
    const auto r = conduction_homogenize(GyroidSpec::unit_cell(kL, c), ConductionPhase::Solid, 32, ks);
    mono = mono && r.k_eff > prev;
    prev = r.k_eff;
  }
  o.check(mono, "k_s* monotone over " + fmt("%.0f", static_cast<double>(cfg.offsets.size())) + " offsets");
}

void criterion_6(Outcome& o) {
  SyntheticRveConfig cfg;
  cfg.noise = 0.01;
  cfg.log_spacing = true;
  double wa = 0.0, wb = 0.0;
  int fits = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto t = generate_synthetic_rve_table(seed, cfg);
    std::map<double, std::vector<const RveRow*>> by;
    for (const auto& r : t.rows) by[r.c].push_back(&r);
    for (const auto& [c, rows] : by) {
      std::vector<double> U, dp;
      for (const auto* r : rows) {
        U.push_back(r->vdot / (kL * kL));
        dp.push_back(r->dp);
      }
      const auto f = fit_darcy_forchheimer(U, dp, kL);
      const double eps = rows[0]->v_f / (kL * kL * kL);
      const double D = 4.0 * rows[0]->v_f / rows[0]->area;
      wa = std::max(wa, std::abs(f.alpha / synthetic_alpha(eps, D, cfg.materials) - 1.0));
      wb = std::max(wb, std::abs(f.beta / synthetic_beta(eps, D, cfg.materials) - 1.0));
      ++fits;
    }
  }
  o.check(wa <= 0.02 && wb <= 0.02, std::to_string(fits) + " fits, worst alpha " + fmt("%.2f%%", 100 * wa) +
                                        " beta " + fmt("%.2f%%", 100 * wb));

  const auto& d = desk();
  double lo = 1e300, hi = -1e300;
  for (const auto& r : d.table.rows) {
    const double h = compute_h_star(r);
    lo = std::min(lo, h);
    hi = std::max(hi, h);
  }
  const double frac = d.report.h_surface.rms / (hi - lo);
  o.check(frac <= 0.03, "h* surface RMS " + fmt("%.2f%%", 100 * frac) + " of range");
}

void criterion_7(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& d = desk();
  const auto& grid = d.problem.grid;
  PorousModel m(grid, d.props, d.problem.bc, d.problem.solver);
  const DensityFilter filter(grid, d.problem.effective_filter_radius());
  ScalarField gamma("gamma", "1", grid.cell_count(), 0.0);
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> u(0.25, 0.75);
  for (int c : grid.core_cells()) gamma[c] = u(rng);
  const ObjectiveScales sc{100.0, 20.0};
  const double w = 0.5;
  const auto gh = filter.apply(gamma);
  const auto state = m.solve(gh);
  const auto sens = sensitivities(m, state, gh, filter, w, sc);
  auto J = [&](const ScalarField& x) {
    const auto g = filter.apply(x);
    return m.objective(m.solve(g, &state), g, w, sc).J;
  };
  auto core = grid.core_cells();
  std::shuffle(core.begin(), core.end(), rng);
  double worst = 0.0;
  for (int i = 0; i < 6; ++i) {
    const int c = core[i];
    const double fd = oracle::central_difference(
        [&](double v) {
          ScalarField x = gamma;
          x[c] = v;
          return J(x);
        },
        gamma[c], 1e-4);
    worst = std::max(worst, std::abs(sens.dJ_dgamma[c] - fd) / std::abs(fd));
  }
  const double dt = seconds_since(t0);
  o.check(worst <= 1e-3, "6 random core cells, worst relative error " + fmt("%.2e", worst));
  o.check(dt < 300.0, "runtime " + fmt("%.1f s", dt));
}

void criterion_8(Outcome& o) {
  const auto& d = desk();
  const auto& ws = d.w_list;
  const double dt = d.sweep_seconds;
  bool ok = true, mono = true;
  std::string dps;
  for (std::size_t i = 0; i < ws.size(); ++i) {
    const auto& t = d.sweep[i];
    ok = ok && !t.aborted && t.final_objective.J < t.initial.J;
    if (i > 0) mono = mono && t.final_objective.dp_ave <= d.sweep[i - 1].final_objective.dp_ave;
    dps += (i ? "/" : "") + fmt("%.2f", t.final_objective.dp_ave);
  }
  o.check(ok, "J decreased for every w");
  o.check(mono, "dp_ave " + dps + " Pa");
  // The initial design is the uniform gamma = 0.5 design.
  const auto& t0w = d.sweep[0];
  o.check(t0w.final_objective.q_ave > t0w.initial.q_ave,
          "w=0 Q_ave " + fmt("%.2f", t0w.initial.q_ave) + " -> " + fmt("%.2f W", t0w.final_objective.q_ave));
  o.check(dt < 1800.0, "runtime " + fmt("%.1f s", dt));
}

// Fluid-1 flux through the top faces of the middle core row in the outer
// columns.
double lateral_flux(const PorousModel& m, const State& s) {
  const auto& g = m.grid();
  const int row = g.ny() / 2;
  double q = 0.0;
  for (int k = 0; k < g.nz(); ++k) {
    for (int i : {0, g.nx() - 1}) q += m.face_velocity(s, 0, g.index(i, row, k), Side::YMax) * g.h() * g.h();
  }
  return q;
}

void criterion_9(Outcome& o) {
  const auto& d = desk();
  const auto& grid = d.problem.grid;
  PorousModel m(grid, d.props, d.problem.bc, d.problem.solver);
  const ScalarField uni("gamma_hat", "1", grid.cell_count(), 0.5);
  const double base = lateral_flux(m, m.solve(uni));
  ScalarField center = uni;
  for (int c : grid.core_cells()) {
    const int i = grid.ijk(c)[0];
    if (i >= 2 && i <= grid.nx() - 3) center[c] = 1.0;
  }
  const double thick = lateral_flux(m, m.solve(center));
  o.check(thick > base, "center-thickened lateral flux " + fmt("%.4e", thick) + " vs uniform " +
                            fmt("%.4e m^3/s", base));
  const auto& opt = d.sweep[0].final_design.gamma_hat;
  const double optimized = lateral_flux(m, m.solve(opt));
  o.detail << "; optimized (w=0) " << fmt("%.4e", optimized) << (optimized > base ? " (higher)" : " (not higher)");
}

void criterion_10(Outcome& o, const fs::path& dir) {
  const Baseline b{0.0123, 0.456};
  o.check(pec(b.j0, b.f0, b.j0, b.f0) == 1.0, "PEC(baseline, baseline) == 1");
  o.check(lmtd(7.25, 7.25) == 7.25, "LMTD equal ends");
  o.check(std::abs(improvement_rate(0.3, 0.5) - 40.0) < 1e-12 && std::abs(improvement_rate(0.25, 0.2) + 25.0) < 1e-12,
          "improvement rate 40 / -25 %");

  // Uniformity from fields stored by the solve command.
  const auto& d = desk();
  RunConfig cfg;
  d.props.save((dir / "props.json").string());
  cfg.properties_json = (dir / "props.json").string();
  cmd_solve(cfg, (dir / "solve").string());
  const auto img = read_vtk((dir / "solve" / "U1.vtk").string());
  const auto grid = cfg.grid();
  std::vector<double> speed, area;
  const int layer = grid.nz() / 2;
  for (int c : grid.core_cells()) {
    if (grid.ijk(c)[2] != layer) continue;
    const double* v = &img.values[3 * c];
    speed.push_back(std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]));
    area.push_back(grid.h() * grid.h());
  }
  const auto ref = oracle::uniformity(speed, area, cfg.eta);
  PorousModel m(grid, d.props, cfg.bc, cfg.solver);
  const ScalarField gh("gamma_hat", "1", grid.cell_count(), cfg.uniform_gamma_hat);
  const auto got = velocity_uniformity(m, m.solve(gh), 0, cfg.eta);
  double err = std::abs(got.cv - ref.cv);
  for (std::size_t i = 0; i < cfg.eta.size(); ++i) err = std::max(err, std::abs(got.f_low[i] - ref.f_low[i]));
  o.check(err <= 1e-12, "f_low/CV vs stored-field recomputation " + fmt("%.1e", err));
}

void criterion_11(Outcome& o, const fs::path& dir) {
  const auto& d = desk();
  const auto& t = d.sweep[0];
  const DesignFile file{d.problem.grid, t.final_design, d.props.cell_size};
  file.save((dir / "design_w0.json").string());
  DehomogenizeArgs a;
  a.design_path = (dir / "design_w0.json").string();
  a.out_stl = (dir / "design_w0.stl").string();
  const auto m = cmd_dehomogenize(a);
  const auto chk = oracle::check_stl(a.out_stl);
  o.check(chk.closed(), fmt("%.0f", static_cast<double>(chk.facets)) + " facets, " +
                            fmt("%.0f", static_cast<double>(chk.bad_edges)) + " bad edges");
  oracle::ZRayCaster rc(a.out_stl, 128);
  const auto& grid = d.problem.grid;
  const double h = grid.h();
  std::vector<double> gh, chord;
  for (int c : grid.core_cells()) {
    const auto p = grid.ijk(c);
    gh.push_back(t.final_design.gamma_hat[c]);
    chord.push_back(oracle::mean_chord(rc, p[0] * h, (p[0] + 1) * h, p[1] * h, (p[1] + 1) * h, 24));
  }
  const double rho = oracle::spearman(gh, chord);
  o.check(rho > 0.9, "rank correlation " + fmt("%.4f", rho) + " over " + fmt("%.0f", static_cast<double>(gh.size())) + " cells");
}

void criterion_12(Outcome& o, const fs::path& dir) {
  const auto& d = desk();
  RunConfig cfg;
  cfg.properties_json = (dir / "props.json").string();
  d.props.save(cfg.properties_json);
  cfg.max_iterations = 5;
  cmd_optimize(cfg, (dir / "opt").string());
  DehomogenizeArgs a;
  a.design_path = (dir / "opt" / "design.json").string();
  a.out_stl = (dir / "opt_design.stl").string();
  a.resolution = 8;
  cmd_dehomogenize(a);
  int files = 0;
  std::vector<std::string> bad;
  for (const auto& [manifest, out] :
       std::vector<std::pair<fs::path, fs::path>>{{dir / "solve" / "manifest.json", dir / "solve_again"},
                                                  {dir / "opt" / "manifest.json", dir / "opt_again"},
                                                  {dir / "opt_design.stl.manifest.json", dir / "stl_again"}}) {
    const auto rep = cmd_rerun(manifest.string(), out.string());
    files += static_cast<int>(rep.manifest.outputs.size());
    bad.insert(bad.end(), rep.mismatched.begin(), rep.mismatched.end());
  }
  std::string names;
  for (const auto& b : bad) names += " " + b;
  o.check(bad.empty(), std::to_string(files) + " outputs of solve, optimize and dehomogenize" +
                           (bad.empty() ? " bit-identical" : " differ:" + names));
}

}  // namespace

int main() {
  const auto dir = work_dir();
  const std::vector<std::pair<const char*, std::function<void(Outcome&)>>> criteria{
      {"porosity of the unit cell", criterion_1},
      {"Darcy limit", criterion_2},
      {"counterflow effectiveness", criterion_3},
      {"energy conservation", criterion_4},
      {"conduction homogenization", criterion_5},
      {"property fit recovery", criterion_6},
      {"adjoint gradient", criterion_7},
      {"weighting sweep", criterion_8},
      {"thickness redirects flow", criterion_9},
      {"metrics", [&](Outcome& o) { criterion_10(o, dir); }},
      {"dehomogenized geometry", [&](Outcome& o) { criterion_11(o, dir); }},
      {"reproducibility", [&](Outcome& o) { criterion_12(o, dir); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << (o.detail.tellp() > 0 ? "; " : "") << "exception: " << e.what();
    }
    failed += !o.pass;
    std::printf("%s criterion %2zu (%s, %.1f s): %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                seconds_since(t0), o.detail.str().c_str());
    std::fflush(stdout);
  }
  return failed;
}
