#include "tpms/porous_model.hpp"

#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>

#include "tpms/dual.hpp"
#include "tpms/error.hpp"

namespace tpms {

using SpMat = Eigen::SparseMatrix<double>;
using FaceRef = PorousModel::FaceRef;

namespace {

Side side_of(int axis, bool high) { return static_cast<Side>(2 * axis + (high ? 1 : 0)); }

template <class S>
S harmonic(const S& a, const S& b) {
  if (!(value(a) + value(b) > 0.0)) return S(0.0);
  return 2.0 * a * b / (a + b);
}

template <class S>
S smooth_abs(const S& x) {
  return value(x) < 0.0 ? S(-x) : x;
}

/// Per-cell flow coefficients of one fluid.
template <class S>
struct FlowCoeffs {
  std::vector<S> eps, alpha, beta;
};

template <class S>
FlowCoeffs<S> flow_coeffs(const PorousModel& m, const std::vector<S>& g) {
  const auto& grid = m.grid();
  FlowCoeffs<S> c;
  const int n = grid.cell_count();
  c.eps.assign(n, S(1.0));
  c.alpha.assign(n, S(0.0));
  c.beta.assign(n, S(0.0));
  for (int cell : m.core_cells()) {
    const auto pv = m.properties().eval(value(g[cell]), m.properties().speed_lo);
    if (!(pv.eps > 0.0)) throw InputError("porosity evaluates non-positive in a core cell");
    c.eps[cell] = apply_unary(pv.eps, pv.d_eps, g[cell]);
    c.alpha[cell] = apply_unary(pv.alpha, pv.d_alpha, g[cell]);
    c.beta[cell] = apply_unary(pv.beta, pv.d_beta, g[cell]);
  }
  return c;
}

template <class S>
S ref_value(const FaceRef& r, const std::vector<S>& x) {
  switch (r.kind) {
    case FaceRef::Unknown: return x[r.index];
    case FaceRef::Inlet: return S(r.value);
    default: return S(0.0);
  }
}

double ref_value_d(const FaceRef& r, const std::vector<double>& x) { return ref_value<double>(r, x); }

/// Flow residual of one fluid: momentum rows for faces, continuity rows for
/// cells. With `lag` set, |U| and the advecting velocities are taken from
/// the lagged state so the residual is linear in x.
template <class S>
void flow_residual(const PorousModel& m, int fluid, const std::vector<S>& x, const FlowCoeffs<S>& pc,
                   const std::vector<double>* lag, std::vector<S>& R) {
  const auto& grid = m.grid();
  const auto& lay = m.layout(fluid);
  const auto& cfg = m.config();
  const double h = grid.h();
  const double rho = cfg.materials.rho;
  const double mu = cfg.materials.mu;
  const double d2 = cfg.speed_smoothing * cfg.speed_smoothing;
  R.assign(lay.size, S(0.0));

  auto val = [&](const FaceRef& r) { return ref_value(r, x); };
  auto adv = [&](const FaceRef& r) -> S { return lag ? S(ref_value_d(r, *lag)) : val(r); };
  auto face_eps = [&](int cell, const FaceRef& r) -> S {
    if (r.kind == FaceRef::Unknown) {
      const auto& f = lay.faces[r.index];
      if (f.lo >= 0 && f.hi >= 0) return 2.0 / (1.0 / pc.eps[f.lo] + 1.0 / pc.eps[f.hi]);
    }
    return pc.eps[cell];
  };
  auto phi = [&](int cell, const FaceRef& r) -> S {
    if (r.kind == FaceRef::Wall) return S(0.0);
    return val(r) / face_eps(cell, r);
  };
  auto neighbour = [&](int cell, int axis, int dir) {
    auto p = grid.ijk(cell);
    p[axis] += dir;
    if (!grid.contains(p)) return -1;
    const int q = grid.index(p);
    return grid.active(fluid, q) ? q : -1;
  };

  for (std::size_t i = 0; i < lay.faces.size(); ++i) {
    const auto& f = lay.faces[i];
    const int a = f.axis;
    const S& u = x[i];
    if (f.outlet) {
      const int P = f.lo >= 0 ? f.lo : f.hi;
      const bool high = f.lo >= 0;
      const S pP = x[lay.pressure[P]];
      const double pb = m.boundary().outlet_pressure[fluid];
      const S grad = high ? S((pb - pP) / (0.5 * h)) : S((pP - pb) / (0.5 * h));
      S speed = lag ? S(std::sqrt((*lag)[i] * (*lag)[i] + d2)) : sqrt(u * u + d2);
      R[i] = grad + pc.alpha[P] * u + pc.beta[P] * speed * u;
      continue;
    }
    const int P = f.lo;
    const int N = f.hi;
    const FaceRef self{FaceRef::Unknown, static_cast<int>(i), 0.0};
    const S ef = 2.0 / (1.0 / pc.eps[P] + 1.0 / pc.eps[N]);
    const S af = 0.5 * (pc.alpha[P] + pc.alpha[N]);
    const S bf = 0.5 * (pc.beta[P] + pc.beta[N]);
    const S grad = (x[lay.pressure[N]] - x[lay.pressure[P]]) / h;

    S speed;
    if (lag) {
      double s2 = (*lag)[i] * (*lag)[i] + d2;
      for (int b = 0; b < 3; ++b) {
        if (b == a) continue;
        const double t = 0.25 * (ref_value_d(lay.refs[P][2 * b], *lag) + ref_value_d(lay.refs[P][2 * b + 1], *lag) +
                                 ref_value_d(lay.refs[N][2 * b], *lag) + ref_value_d(lay.refs[N][2 * b + 1], *lag));
        s2 += t * t;
      }
      speed = S(std::sqrt(s2));
    } else {
      S s2 = u * u + d2;
      for (int b = 0; b < 3; ++b) {
        if (b == a) continue;
        const S t = 0.25 * (val(lay.refs[P][2 * b]) + val(lay.refs[P][2 * b + 1]) + val(lay.refs[N][2 * b]) +
                            val(lay.refs[N][2 * b + 1]));
        s2 += t * t;
      }
      speed = sqrt(s2);
    }

    // Viscous term and transverse convection share the neighbour lookup.
    const FaceRef& lo_ref = lay.refs[P][2 * a];
    const FaceRef& hi_ref = lay.refs[N][2 * a + 1];
    S lap = (val(lo_ref) - u) + (val(hi_ref) - u);
    const S phi_self = u / ef;
    const S adv_N = 0.5 * (adv(self) + adv(hi_ref));
    const S adv_P = 0.5 * (adv(lo_ref) + adv(self));
    S div = adv_N * (value(adv_N) >= 0.0 ? phi_self : phi(N, hi_ref)) -
            adv_P * (value(adv_P) >= 0.0 ? phi(P, lo_ref) : phi_self);
    for (int b = 0; b < 3; ++b) {
      if (b == a) continue;
      const bool slip = !cfg.no_slip_walls || (b == 2 && grid.nz() == 1);
      for (int dir : {-1, 1}) {
        const int Pn = neighbour(P, b, dir);
        const int Nn = neighbour(N, b, dir);
        S phi_nb;
        if (Pn >= 0 && Nn >= 0) {
          const FaceRef& nb = lay.refs[Pn][2 * a + 1];
          lap += val(nb) - u;
          phi_nb = phi(Pn, nb);
        } else {
          if (!slip) lap += -2.0 * u;
          phi_nb = slip ? phi_self : S(0.0);
        }
        const int side = 2 * b + (dir > 0 ? 1 : 0);
        const S ab = 0.5 * (adv(lay.refs[P][side]) + adv(lay.refs[N][side]));
        if (dir > 0) {
          div += ab * (value(ab) >= 0.0 ? phi_self : phi_nb);
        } else {
          div -= ab * (value(ab) >= 0.0 ? phi_nb : phi_self);
        }
      }
    }
    R[i] = grad + af * u + bf * speed * u - (mu / ef) * lap / (h * h) + (rho / ef) * div / h;
  }

  for (int c = 0; c < grid.cell_count(); ++c) {
    const int k = lay.pressure[c];
    if (k < 0) continue;
    S s(0.0);
    for (int a = 0; a < 3; ++a) s += val(lay.refs[c][2 * a + 1]) - val(lay.refs[c][2 * a]);
    R[k] = s / h;
  }
}

template <class S>
S cell_speed(const PorousModel& m, int fluid, int cell, const std::vector<S>& x) {
  const auto& refs = m.layout(fluid).refs[cell];
  const double d = m.config().speed_smoothing;
  S s2(d * d);
  for (int a = 0; a < 3; ++a) {
    const S c = 0.5 * (ref_value(refs[2 * a], x) + ref_value(refs[2 * a + 1], x));
    s2 += c * c;
  }
  return sqrt(s2);
}

/// Energy residuals [T1 rows | T2 rows | wall rows] in W/m^3.
template <class S>
void thermal_residual(const PorousModel& m, const std::vector<S>& T,
                      const std::array<const std::vector<S>*, 2>& flow, const std::vector<S>& g,
                      std::vector<S>& R) {
  const auto& grid = m.grid();
  const auto& props = m.properties();
  const auto& mat = m.config().materials;
  const auto& tix = m.temperature_index();
  const double h = grid.h();
  const double vol = props.cell_size * props.cell_size * props.cell_size;
  const int n = grid.cell_count();
  R.assign(m.temperature_size(), S(0.0));

  std::vector<S> kf(n, S(mat.k_f)), ks(n, S(0.0));
  std::array<std::vector<S>, 2> exch{std::vector<S>(n, S(0.0)), std::vector<S>(n, S(0.0))};
  for (int c : m.core_cells()) {
    for (int f = 0; f < 2; ++f) {
      const S speed = cell_speed(m, f, c, *flow[f]);
      const auto pv = props.eval(value(g[c]), value(speed));
      const S hs = apply_binary(pv.h, pv.dh_dgamma, pv.dh_dspeed, g[c], speed);
      const S area = apply_unary(pv.area, pv.d_area, g[c]);
      exch[f][c] = hs * area / vol;
      if (f == 0) {
        kf[c] = apply_unary(pv.k_f, pv.d_k_f, g[c]);
        ks[c] = apply_unary(pv.k_s, pv.d_k_s, g[c]);
      }
    }
  }

  for (int f = 0; f < 2; ++f) {
    const auto& lay = m.layout(f);
    const double t_in = m.boundary().inlet_temperature[f];
    for (int c = 0; c < n; ++c) {
      const int row = tix[f][c];
      if (row < 0) continue;
      const S& TP = T[row];
      S conv(0.0), cond(0.0);
      for (int s = 0; s < 6; ++s) {
        const FaceRef& r = lay.refs[c][s];
        if (r.kind == FaceRef::Wall) continue;
        const bool high = s % 2 == 1;
        const S u = ref_value(r, *flow[f]);
        const S u_out = high ? u : S(-u);
        if (r.kind == FaceRef::Inlet) {
          conv += u_out * (value(u_out) >= 0.0 ? TP : S(t_in));
          continue;
        }
        const auto& face = lay.faces[r.index];
        if (face.outlet) {
          conv += u_out * TP;
          continue;
        }
        const int nb = face.lo == c ? face.hi : face.lo;
        const S& TN = T[tix[f][nb]];
        conv += u_out * (value(u_out) >= 0.0 ? TP : TN);
        cond += harmonic(kf[c], kf[nb]) * (TN - TP);
      }
      S r = (mat.rho * mat.cp / h) * conv - cond / (h * h);
      if (tix[2][c] >= 0) r -= exch[f][c] * (T[tix[2][c]] - TP);
      R[row] = r;
    }
  }
  for (int c : m.core_cells()) {
    const int row = tix[2][c];
    const S& TW = T[row];
    S cond(0.0);
    const auto p = grid.ijk(c);
    for (int a = 0; a < 3; ++a) {
      for (int dir : {-1, 1}) {
        auto q = p;
        q[a] += dir;
        if (!grid.contains(q)) continue;
        const int nb = grid.index(q);
        if (!grid.is_core(nb)) continue;
        cond += harmonic(ks[c], ks[nb]) * (T[tix[2][nb]] - TW);
      }
    }
    R[row] = -cond / (h * h) + exch[0][c] * (TW - T[tix[0][c]]) + exch[1][c] * (TW - T[tix[1][c]]);
  }
}

template <class S>
struct ObjectiveT {
  std::array<S, 2> q, dp;
  S q_ave, dp_ave, J;
};

template <class S>
ObjectiveT<S> objective_t(const PorousModel& m, const std::vector<S>& T,
                          const std::array<const std::vector<S>*, 2>& flow, const std::vector<S>& g,
                          double w, const ObjectiveScales& scales) {
  const auto& grid = m.grid();
  const auto& mat = m.config().materials;
  const auto& bc = m.boundary();
  const double h = grid.h();
  ObjectiveT<S> o;
  for (int f = 0; f < 2; ++f) {
    const auto& lay = m.layout(f);
    const auto& x = *flow[f];
    S q(0.0);
    for (int i : lay.outlet_faces) {
      const auto& face = lay.faces[i];
      const int P = face.lo >= 0 ? face.lo : face.hi;
      const S u_out = face.lo >= 0 ? x[i] : S(-x[i]);
      q += u_out * (T[m.temperature_index()[f][P]] - bc.inlet_temperature[f]);
    }
    o.q[f] = smooth_abs(S(mat.rho * mat.cp * h * h * q));
    S dp(0.0);
    const double U = bc.inlet_speed[f];
    for (const auto& [c, side] : lay.inlets) {
      (void)side;
      S pb = x[lay.pressure[c]];
      if (grid.is_core(c)) {
        const auto pv = m.properties().eval(value(g[c]), m.properties().speed_lo);
        const S al = apply_unary(pv.alpha, pv.d_alpha, g[c]);
        const S be = apply_unary(pv.beta, pv.d_beta, g[c]);
        pb += 0.5 * h * (al * U + be * U * U);
      }
      dp += pb - bc.outlet_pressure[f];
    }
    o.dp[f] = dp / static_cast<double>(lay.inlets.size());
  }
  o.q_ave = 0.5 * (o.q[0] + o.q[1]);
  o.dp_ave = 0.5 * (o.dp[0] + o.dp[1]);
  o.J = -o.q_ave / scales.q_ref + w * o.dp_ave / scales.dp_ref;
  return o;
}

std::vector<Dual> seeded(const std::vector<double>& x, int offset) {
  std::vector<Dual> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = Dual::variable(x[i], offset + static_cast<int>(i));
  return out;
}

std::vector<Dual> constants(const std::vector<double>& x) { return {x.begin(), x.end()}; }

std::vector<Dual> seeded_design(const PorousModel& m, const ScalarField& g, int offset) {
  std::vector<Dual> out(g.values.begin(), g.values.end());
  for (int c : m.core_cells()) out[c] = Dual::variable(g[c], offset + m.design_index()[c]);
  return out;
}

/// Columns [lo, lo + count) of the gradients of `rows`, shifted to start at 0.
SpMat block(const std::vector<Dual>& rows, int lo, int count) {
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (const auto& [idx, v] : rows[r].d) {
      if (idx >= lo && idx < lo + count && v != 0.0) trip.emplace_back(static_cast<int>(r), idx - lo, v);
    }
  }
  SpMat A(static_cast<int>(rows.size()), count);
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

Eigen::VectorXd gradient(const Dual& y, int lo, int count) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(count);
  for (const auto& [idx, v] : y.d) {
    if (idx >= lo && idx < lo + count) g[idx - lo] += v;
  }
  return g;
}

Eigen::VectorXd sparse_solve(const SpMat& A, const Eigen::VectorXd& b, const char* what, bool* ok = nullptr) {
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
  lu.analyzePattern(A);
  lu.factorize(A);
  if (lu.info() != Eigen::Success) {
    if (ok) {
      *ok = false;
      return {};
    }
    throw ConvergenceError(std::string(what) + ": singular linear system", {});
  }
  Eigen::VectorXd x = lu.solve(b);
  if (ok) *ok = x.allFinite();
  if (!x.allFinite() && !ok) throw ConvergenceError(std::string(what) + ": linear solve produced non-finite values", {});
  return x;
}

std::vector<double> gamma_vector(const PorousModel& m, const ScalarField& g) {
  if (static_cast<int>(g.size()) != m.grid().cell_count()) {
    throw ContractError("design field size does not match the grid");
  }
  for (int c : m.core_cells()) {
    if (!std::isfinite(g[c])) throw InputError("design field has non-finite entries");
  }
  return g.values;
}

}  // namespace

void BoundaryConditions::validate(const StructuredGrid& grid) const {
  grid.validate();
  for (int f = 0; f < 2; ++f) {
    if (!(inlet_speed[f] > 0.0) || !std::isfinite(inlet_speed[f])) {
      throw InputError("inflow velocity must be positive");
    }
    if (!(inlet_temperature[f] > 0.0) || !std::isfinite(inlet_temperature[f])) {
      throw InputError("inlet temperature must be a positive absolute temperature");
    }
    if (!std::isfinite(outlet_pressure[f])) throw InputError("outlet pressure must be finite");
  }
}

void SolverConfig::validate() const {
  if (convection != "upwind") {
    throw InputError("convection scheme '" + convection + "' is not available (use \"upwind\")");
  }
  for (double r : {relax_momentum, relax_pressure, relax_energy}) {
    if (!(r > 0.0 && r <= 1.0)) throw InputError("relaxation factors must lie in (0, 1]");
  }
  if (!(tolerance > 0.0) || !(picard_tolerance > 0.0)) throw InputError("tolerances must be positive");
  if (max_iterations < 1) throw InputError("max_iterations must be at least 1");
  if (!(speed_smoothing > 0.0)) throw InputError("speed smoothing must be positive");
  materials.validate();
}

PorousModel::PorousModel(const StructuredGrid& grid, const EffectivePropertySet& props,
                         const BoundaryConditions& bc, const SolverConfig& cfg)
    : grid_(grid), props_(props), bc_(bc), cfg_(cfg) {
  bc_.validate(grid_);
  cfg_.validate();
  const auto bad = props_.check_invariants(false);
  if (!bad.empty()) throw InputError("effective properties are invalid: " + bad.front());
  const int n = grid_.cell_count();
  core_ = grid_.core_cells();
  design_index_.assign(n, -1);
  for (std::size_t i = 0; i < core_.size(); ++i) design_index_[core_[i]] = static_cast<int>(i);

  for (int f = 0; f < 2; ++f) {
    auto& lay = flow_[f];
    lay.refs.assign(n, {});
    lay.pressure.assign(n, -1);
    // Boundary patch kind per (cell, side): 0 none, 1 inlet, 2 outlet.
    std::vector<std::array<std::uint8_t, 6>> patch(n, std::array<std::uint8_t, 6>{});
    for (const auto& p : grid_.patches()) {
      if (p.fluid != f) continue;
      for (int c : p.cells) {
        patch[c][static_cast<int>(p.side)] = p.kind == PatchKind::Inlet ? 1 : 2;
      }
    }
    auto add_face = [&](int axis, int lo, int hi, bool outlet) {
      lay.faces.push_back({axis, lo, hi, outlet});
      return static_cast<int>(lay.faces.size()) - 1;
    };
    for (int c = 0; c < n; ++c) {
      if (!grid_.active(f, c)) continue;
      const auto p = grid_.ijk(c);
      for (int a = 0; a < 3; ++a) {
        for (bool high : {false, true}) {
          const int s = 2 * a + (high ? 1 : 0);
          auto q = p;
          q[a] += high ? 1 : -1;
          if (grid_.contains(q)) {
            const int nb = grid_.index(q);
            if (!grid_.active(f, nb)) continue;  // wall
            if (high) {
              const int id = add_face(a, c, nb, false);
              lay.refs[c][s] = {FaceRef::Unknown, id, 0.0};
              lay.refs[nb][2 * a] = {FaceRef::Unknown, id, 0.0};
            }
            continue;
          }
          if (patch[c][s] == 1) {
            lay.refs[c][s] = {FaceRef::Inlet, -1, high ? -bc_.inlet_speed[f] : bc_.inlet_speed[f]};
            lay.inlets.emplace_back(c, side_of(a, high));
          } else if (patch[c][s] == 2) {
            const int id = add_face(a, high ? c : -1, high ? -1 : c, true);
            lay.refs[c][s] = {FaceRef::Unknown, id, 0.0};
            lay.outlet_faces.push_back(id);
          }
        }
      }
    }
    int next = static_cast<int>(lay.faces.size());
    for (int c = 0; c < n; ++c) {
      if (grid_.active(f, c)) lay.pressure[c] = next++;
    }
    lay.size = next;
  }
  for (int w = 0; w < 3; ++w) t_index_[w].assign(n, -1);
  int next = 0;
  for (int f = 0; f < 2; ++f) {
    for (int c = 0; c < n; ++c) {
      if (grid_.active(f, c)) t_index_[f][c] = next++;
    }
  }
  for (int c : core_) t_index_[2][c] = next++;
  t_size_ = next;
}

namespace {

struct FlowScales {
  double momentum = 1.0;
  double continuity = 1.0;
};

FlowScales flow_scales(const PorousModel& m, int fluid) {
  const auto& props = m.properties();
  const auto& mat = m.config().materials;
  const double U = m.boundary().inlet_speed[fluid];
  const double h = m.grid().h();
  double amax = 0.0, bmax = 0.0;
  for (double g : {0.0, 0.5, 1.0}) {
    const auto pv = props.eval(g, props.speed_lo);
    amax = std::max(amax, std::abs(pv.alpha));
    bmax = std::max(bmax, std::abs(pv.beta));
  }
  FlowScales s;
  s.momentum = amax * U + bmax * U * U + mat.rho * U * U / h + mat.mu * U / (h * h);
  s.continuity = U / h;
  return s;
}

double scaled_norm(const PorousModel& m, int fluid, const std::vector<double>& R, const FlowScales& s) {
  const int nf = m.face_count(fluid);
  double sum = 0.0;
  for (std::size_t i = 0; i < R.size(); ++i) {
    const double r = R[i] / (static_cast<int>(i) < nf ? s.momentum : s.continuity);
    sum += r * r;
  }
  return std::sqrt(sum);
}

std::vector<double> flow_residual_d(const PorousModel& m, int fluid, const std::vector<double>& x,
                                    const FlowCoeffs<double>& pc) {
  std::vector<double> R;
  flow_residual<double>(m, fluid, x, pc, nullptr, R);
  return R;
}

/// Residual and Jacobian of one fluid; with `lag` the Picard linearization.
std::vector<Dual> flow_residual_dual(const PorousModel& m, int fluid, const std::vector<double>& x,
                                     const FlowCoeffs<Dual>& pc, const std::vector<double>* lag) {
  std::vector<Dual> R;
  flow_residual<Dual>(m, fluid, seeded(x, 0), pc, lag, R);
  return R;
}

}  // namespace

double PorousModel::flow_relative_residual(const State& state, const ScalarField& gamma_hat, int fluid) const {
  const auto g = gamma_vector(*this, gamma_hat);
  const auto pc = flow_coeffs<double>(*this, g);
  const auto s = flow_scales(*this, fluid);
  const std::vector<double> zero(flow_[fluid].size, 0.0);
  const double r0 = scaled_norm(*this, fluid, flow_residual_d(*this, fluid, zero, pc), s);
  return scaled_norm(*this, fluid, flow_residual_d(*this, fluid, state.flow[fluid], pc), s) / r0;
}

double PorousModel::thermal_relative_residual(const State& state, const ScalarField& gamma_hat) const {
  const auto g = gamma_vector(*this, gamma_hat);
  if (static_cast<int>(state.temperature.size()) != t_size_) throw ContractError("state has no temperatures");
  const std::array<const std::vector<double>*, 2> flow{&state.flow[0], &state.flow[1]};
  std::vector<double> R, R0;
  thermal_residual<double>(*this, state.temperature, flow, g, R);
  // The system is linear in T, so the residual of T = 0 is the right-hand
  // side of the discrete equations.
  thermal_residual<double>(*this, std::vector<double>(t_size_, 0.0), flow, g, R0);
  const double r = Eigen::Map<const Eigen::VectorXd>(R.data(), R.size()).norm();
  const double r0 = Eigen::Map<const Eigen::VectorXd>(R0.data(), R0.size()).norm();
  if (r0 == 0.0) return r == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return r / r0;
}

void PorousModel::solve_flow(const ScalarField& gamma_hat, State& state) const {
  const auto g = gamma_vector(*this, gamma_hat);
  const auto pc = flow_coeffs<double>(*this, g);
  const auto pcd = flow_coeffs<Dual>(*this, constants(g));
  for (int f = 0; f < 2; ++f) {
    const int n = flow_[f].size;
    const int nf = face_count(f);
    auto& x = state.flow[f];
    if (static_cast<int>(x.size()) != n) x.assign(n, 0.0);
    auto& hist = state.flow_history[f];
    hist.clear();
    const auto scales = flow_scales(*this, f);
    const double r0 = scaled_norm(*this, f, flow_residual_d(*this, f, std::vector<double>(n, 0.0), pc), scales);
    auto jac_step = [&](const std::vector<double>* lag, bool* ok) {
      const auto R = flow_residual_dual(*this, f, x, pcd, lag);
      const SpMat J = block(R, 0, n);
      Eigen::VectorXd rhs(n);
      for (int i = 0; i < n; ++i) rhs[i] = -R[i].v;
      return sparse_solve(J, rhs, "flow", ok);
    };
    auto picard = [&]() {
      bool ok = true;
      const auto dx = jac_step(&x, &ok);
      if (!ok) throw ConvergenceError("flow: singular lagged system", hist);
      for (int i = 0; i < n; ++i) x[i] += (i < nf ? cfg_.relax_momentum : cfg_.relax_pressure) * dx[i];
    };
    bool newton = false;
    int picard_steps = 0;
    bool converged = false;
    for (int it = 0; it < cfg_.max_iterations; ++it) {
      const double norm = scaled_norm(*this, f, flow_residual_d(*this, f, x, pc), scales);
      const double rel = norm / r0;
      hist.push_back(rel);
      if (!std::isfinite(rel)) break;
      if (rel <= cfg_.tolerance) {
        converged = true;
        break;
      }
      if (!newton && (rel <= cfg_.picard_tolerance || picard_steps >= 100)) newton = true;
      if (!newton) {
        picard();
        ++picard_steps;
        continue;
      }
      bool ok = true;
      const auto dx = jac_step(nullptr, &ok);
      bool accepted = false;
      if (ok) {
        double step = 1.0;
        for (int ls = 0; ls < 12 && !accepted; ++ls, step *= 0.5) {
          std::vector<double> trial = x;
          for (int i = 0; i < n; ++i) trial[i] += step * dx[i];
          const double tn = scaled_norm(*this, f, flow_residual_d(*this, f, trial, pc), scales);
          if (std::isfinite(tn) && tn < (1.0 - 1e-4 * step) * norm) {
            x = std::move(trial);
            accepted = true;
          }
        }
      }
      if (!accepted) picard();
    }
    if (!converged) {
      throw ConvergenceError("flow solve for fluid " + std::to_string(f + 1) + " did not converge (relative residual " +
                                 std::to_string(hist.empty() ? 0.0 : hist.back()) + ")",
                             hist);
    }
  }
}

void PorousModel::solve_thermal(const ScalarField& gamma_hat, State& state) const {
  const auto g = gamma_vector(*this, gamma_hat);
  for (int f = 0; f < 2; ++f) {
    if (static_cast<int>(state.flow[f].size()) != flow_[f].size) {
      throw ContractError("thermal solve needs a converged flow state");
    }
  }
  auto& T = state.temperature;
  if (static_cast<int>(T.size()) != t_size_) {
    T.assign(t_size_, 0.5 * (bc_.inlet_temperature[0] + bc_.inlet_temperature[1]));
  }
  const auto gd = constants(g);
  const auto f0 = constants(state.flow[0]);
  const auto f1 = constants(state.flow[1]);
  state.wall_regularized = false;
  for (int pass = 0; pass < 2; ++pass) {
    std::vector<Dual> R;
    thermal_residual<Dual>(*this, seeded(T, 0), {&f0, &f1}, gd, R);
    SpMat C = block(R, 0, t_size_);
    Eigen::VectorXd rhs(t_size_);
    for (int i = 0; i < t_size_; ++i) rhs[i] = -R[i].v;
    bool ok = true;
    Eigen::VectorXd dT = sparse_solve(C, rhs, "thermal", &ok);
    if (!ok) {
      // Wall temperature is undetermined without exchange; pin it weakly.
      double scale = 0.0;
      for (int k = 0; k < C.outerSize(); ++k) {
        for (SpMat::InnerIterator it(C, k); it; ++it) scale = std::max(scale, std::abs(it.value()));
      }
      if (scale == 0.0) scale = 1.0;
      for (int c : core_) C.coeffRef(t_index_[2][c], t_index_[2][c]) += 1e-12 * scale;
      state.wall_regularized = true;
      dT = sparse_solve(C, rhs, "thermal");
    }
    for (int i = 0; i < t_size_; ++i) T[i] += dT[i];
  }
}

State PorousModel::solve(const ScalarField& gamma_hat, const State* warm) const {
  State s;
  if (warm) s = *warm;
  solve_flow(gamma_hat, s);
  solve_thermal(gamma_hat, s);
  return s;
}

ObjectiveValue PorousModel::objective(const State& state, const ScalarField& gamma_hat, double w,
                                      const ObjectiveScales& scales) const {
  const auto g = gamma_vector(*this, gamma_hat);
  if (static_cast<int>(state.temperature.size()) != t_size_) throw ContractError("state has no temperatures");
  const auto o = objective_t<double>(*this, state.temperature, {&state.flow[0], &state.flow[1]}, g, w, scales);
  ObjectiveValue v;
  v.q = o.q;
  v.dp = o.dp;
  v.q_ave = o.q_ave;
  v.dp_ave = o.dp_ave;
  v.J = o.J;
  return v;
}

std::vector<double> PorousModel::residual(const State& state, const ScalarField& gamma_hat) const {
  const auto g = gamma_vector(*this, gamma_hat);
  for (int f = 0; f < 2; ++f) {
    if (static_cast<int>(state.flow[f].size()) != flow_[f].size) throw ContractError("flow state has the wrong size");
  }
  if (static_cast<int>(state.temperature.size()) != t_size_) {
    throw ContractError("temperature state has the wrong size");
  }
  const auto pc = flow_coeffs<double>(*this, g);
  std::vector<double> out;
  for (int f = 0; f < 2; ++f) {
    const auto R = flow_residual_d(*this, f, state.flow[f], pc);
    out.insert(out.end(), R.begin(), R.end());
  }
  std::vector<double> RT;
  thermal_residual<double>(*this, state.temperature, {&state.flow[0], &state.flow[1]}, g, RT);
  out.insert(out.end(), RT.begin(), RT.end());
  return out;
}

SpMat PorousModel::state_jacobian(const State& state, const ScalarField& gamma_hat) const {
  const auto g = gamma_vector(*this, gamma_hat);
  const int n0 = flow_[0].size, n1 = flow_[1].size;
  const int total = n0 + n1 + t_size_;
  const auto pcd = flow_coeffs<Dual>(*this, constants(g));
  std::vector<Eigen::Triplet<double>> trip;
  auto add = [&](const std::vector<Dual>& rows, int row_offset, int col_offset) {
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (const auto& [idx, v] : rows[r].d) trip.emplace_back(row_offset + static_cast<int>(r), col_offset + idx, v);
    }
  };
  std::vector<Dual> R;
  flow_residual<Dual>(*this, 0, seeded(state.flow[0], 0), pcd, nullptr, R);
  add(R, 0, 0);
  flow_residual<Dual>(*this, 1, seeded(state.flow[1], 0), pcd, nullptr, R);
  add(R, n0, n0);
  const auto s0 = seeded(state.flow[0], t_size_);
  const auto s1 = seeded(state.flow[1], t_size_ + n0);
  thermal_residual<Dual>(*this, seeded(state.temperature, 0), {&s0, &s1}, constants(g), R);
  // Thermal seeds are [T | s0 | s1]; map them to the stacked [s0 | s1 | T] columns.
  for (std::size_t r = 0; r < R.size(); ++r) {
    for (const auto& [idx, v] : R[r].d) {
      const int col = idx < t_size_ ? n0 + n1 + idx : idx - t_size_;
      trip.emplace_back(n0 + n1 + static_cast<int>(r), col, v);
    }
  }
  SpMat J(total, total);
  J.setFromTriplets(trip.begin(), trip.end());
  return J;
}

Linearization PorousModel::linearize(const State& state, const ScalarField& gamma_hat, double w,
                                     const ObjectiveScales& scales) const {
  const auto g = gamma_vector(*this, gamma_hat);
  const int n0 = flow_[0].size, n1 = flow_[1].size;
  const int nd = design_size();
  Linearization L;
  for (int f = 0; f < 2; ++f) {
    const int n = flow_[f].size;
    const auto gd = seeded_design(*this, gamma_hat, n);
    const auto pcd = flow_coeffs<Dual>(*this, gd);
    std::vector<Dual> R;
    flow_residual<Dual>(*this, f, seeded(state.flow[f], 0), pcd, nullptr, R);
    L.flow_state[f] = block(R, 0, n);
    L.flow_design[f] = block(R, n, nd);
  }
  const int o0 = t_size_, o1 = t_size_ + n0, od = t_size_ + n0 + n1;
  const auto T = seeded(state.temperature, 0);
  const auto s0 = seeded(state.flow[0], o0);
  const auto s1 = seeded(state.flow[1], o1);
  const auto gd = seeded_design(*this, gamma_hat, od);
  std::vector<Dual> R;
  thermal_residual<Dual>(*this, T, {&s0, &s1}, gd, R);
  L.thermal_temperature = block(R, 0, t_size_);
  L.thermal_flow[0] = block(R, o0, n0);
  L.thermal_flow[1] = block(R, o1, n1);
  L.thermal_design = block(R, od, nd);
  const auto o = objective_t<Dual>(*this, T, {&s0, &s1}, gd, w, scales);
  L.dJ_dT = gradient(o.J, 0, t_size_);
  L.dJ_dflow[0] = gradient(o.J, o0, n0);
  L.dJ_dflow[1] = gradient(o.J, o1, n1);
  L.dJ_ddesign = gradient(o.J, od, nd);
  L.objective.q = {o.q[0].v, o.q[1].v};
  L.objective.dp = {o.dp[0].v, o.dp[1].v};
  L.objective.q_ave = o.q_ave.v;
  L.objective.dp_ave = o.dp_ave.v;
  L.objective.J = o.J.v;
  (void)g;
  return L;
}

double PorousModel::face_velocity(const State& state, int fluid, int cell, Side side) const {
  if (!grid_.active(fluid, cell)) return 0.0;
  return ref_value_d(flow_[fluid].refs[cell][static_cast<int>(side)], state.flow[fluid]);
}

VectorField PorousModel::velocity(const State& state, int fluid) const {
  VectorField v(fluid == 0 ? "U1" : "U2", "m/s", grid_.cell_count());
  for (int c = 0; c < grid_.cell_count(); ++c) {
    if (!grid_.active(fluid, c)) continue;
    for (int a = 0; a < 3; ++a) {
      v.values[c][a] = 0.5 * (ref_value_d(flow_[fluid].refs[c][2 * a], state.flow[fluid]) +
                              ref_value_d(flow_[fluid].refs[c][2 * a + 1], state.flow[fluid]));
    }
  }
  return v;
}

ScalarField PorousModel::pressure(const State& state, int fluid) const {
  ScalarField p(fluid == 0 ? "p1" : "p2", "Pa", grid_.cell_count());
  for (int c = 0; c < grid_.cell_count(); ++c) {
    const int k = flow_[fluid].pressure[c];
    if (k >= 0) p[c] = state.flow[fluid][k];
  }
  return p;
}

ScalarField PorousModel::temperature(const State& state, int which) const {
  static const char* names[] = {"T1", "T2", "Tw"};
  if (which < 0 || which > 2) throw ContractError("temperature field index must be 0, 1 or 2");
  ScalarField t(names[which], "K", grid_.cell_count());
  for (int c = 0; c < grid_.cell_count(); ++c) {
    const int k = t_index_[which][c];
    if (k >= 0) t[c] = state.temperature[k];
  }
  return t;
}

double PorousModel::outlet_temperature(const State& state, int fluid) const {
  const auto& lay = flow_[fluid];
  double flux = 0.0, enthalpy = 0.0;
  for (int i : lay.outlet_faces) {
    const auto& face = lay.faces[i];
    const int P = face.lo >= 0 ? face.lo : face.hi;
    const double u_out = face.lo >= 0 ? state.flow[fluid][i] : -state.flow[fluid][i];
    flux += u_out;
    enthalpy += u_out * state.temperature[t_index_[fluid][P]];
  }
  return enthalpy / flux;
}

double PorousModel::volume_flow(int fluid) const {
  return bc_.inlet_speed[fluid] * static_cast<double>(flow_[fluid].inlets.size()) * grid_.h() * grid_.h();
}

double PorousModel::inlet_pressure(const State& state, const ScalarField& gamma_hat, int fluid) const {
  const auto g = gamma_vector(*this, gamma_hat);
  const auto o = objective_t<double>(*this, std::vector<double>(t_size_, bc_.inlet_temperature[0]),
                                     {&state.flow[0], &state.flow[1]}, g, 0.0, {});
  return o.dp[fluid] + bc_.outlet_pressure[fluid];
}

void solve_flow(const PorousModel& model, const ScalarField& gamma_hat, State& state) {
  model.solve_flow(gamma_hat, state);
}

void solve_thermal(const PorousModel& model, const ScalarField& gamma_hat, State& state) {
  model.solve_thermal(gamma_hat, state);
}

ObjectiveValue compute_objective(const PorousModel& model, const State& state, const ScalarField& gamma_hat,
                                 double w, const ObjectiveScales& scales) {
  return model.objective(state, gamma_hat, w, scales);
}

std::vector<double> residual_operator(const PorousModel& model, const State& state, const ScalarField& gamma_hat) {
  return model.residual(state, gamma_hat);
}

}  // namespace tpms
