#include "tpms/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <sstream>

#include "tpms/error.hpp"
#include "tpms/field_io.hpp"

namespace tpms {

using nlohmann::json;

double lmtd(double dt_a, double dt_b) {
  if (!(dt_a > 0.0) || !(dt_b > 0.0)) {
    throw InputError("LMTD undefined: non-positive end temperature difference (temperature cross)");
  }
  const double r = dt_a / dt_b;
  if (std::abs(r - 1.0) < 1e-9) return 0.5 * (dt_a + dt_b);
  return (dt_a - dt_b) / std::log(r);
}

double pec(double j, double f, double j0, double f0) {
  if (!(j0 > 0.0) || !(f0 > 0.0) || !(f > 0.0)) throw InputError("PEC needs positive j0, f0 and f");
  return (j / j0) / (f / f0);
}

double improvement_rate(double f_low_opt, double f_low_uni) {
  if (f_low_uni == 0.0) throw InputError("improvement rate undefined: uniform-design f_low is zero");
  return (1.0 - f_low_opt / f_low_uni) * 100.0;
}

Uniformity velocity_uniformity(const std::vector<double>& speeds, const std::vector<double>& areas,
                               const std::vector<double>& eta) {
  if (speeds.empty() || speeds.size() != areas.size()) throw InputError("velocity section is empty");
  for (double e : eta) {
    if (!(e > 0.0 && e < 1.0)) throw InputError("eta values must lie in (0, 1)");
  }
  double total = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < speeds.size(); ++i) {
    total += areas[i];
    mean += areas[i] * speeds[i];
  }
  if (!(total > 0.0)) throw InputError("velocity section has no area");
  mean /= total;
  double var = 0.0;
  for (std::size_t i = 0; i < speeds.size(); ++i) var += areas[i] * (speeds[i] - mean) * (speeds[i] - mean);
  var /= total;
  Uniformity u;
  u.mean_speed = mean;
  u.cv = mean > 0.0 ? std::sqrt(var) / mean : 0.0;
  u.eta = eta;
  for (double e : eta) {
    double low = 0.0;
    for (std::size_t i = 0; i < speeds.size(); ++i) {
      if (speeds[i] <= e * mean) low += areas[i];
    }
    u.f_low.push_back(low / total);
  }
  return u;
}

Uniformity velocity_uniformity(const PorousModel& model, const State& state, int fluid, const std::vector<double>& eta,
                               int layer) {
  const auto& grid = model.grid();
  if (layer < 0) layer = grid.nz() / 2;
  if (layer >= grid.nz()) throw InputError("section layer lies outside the grid");
  const VectorField v = model.velocity(state, fluid);
  std::vector<double> speeds, areas;
  for (int c : model.core_cells()) {
    if (grid.ijk(c)[2] != layer) continue;
    const auto& u = v.values[c];
    speeds.push_back(std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]));
    areas.push_back(grid.h() * grid.h());
  }
  return velocity_uniformity(speeds, areas, eta);
}

namespace {

struct CoreTotals {
  double fluid_volume = 0.0;
  double area = 0.0;
  double volume = 0.0;
};

CoreTotals core_totals(const PorousModel& model, const ScalarField& gamma_hat) {
  const auto& props = model.properties();
  const double h = model.grid().h();
  const double vc = h * h * h;
  const double ratio = vc / (props.cell_size * props.cell_size * props.cell_size);
  CoreTotals t;
  for (int c : model.core_cells()) {
    const auto pv = props.eval(gamma_hat[c], props.speed_lo);
    t.fluid_volume += 2.0 * pv.eps * vc;
    t.area += 2.0 * pv.area * ratio;
    t.volume += vc;
  }
  return t;
}

}  // namespace

double hydraulic_diameter(const PorousModel& model, const ScalarField& gamma_hat) {
  if (model.core_cells().empty()) throw InputError("hydraulic diameter needs a non-empty core");
  const auto t = core_totals(model, gamma_hat);
  if (!(t.area > 0.0)) throw InputError("hydraulic diameter undefined: zero wall area");
  return 4.0 * t.fluid_volume / t.area;
}

MetricsReport dimensionless_suite(const PorousModel& model, const State& state, const ScalarField& gamma_hat,
                                  const std::optional<Baseline>& baseline, const std::vector<double>& eta) {
  const auto& grid = model.grid();
  const auto& mat = model.config().materials;
  const auto& bc = model.boundary();
  const auto obj = model.objective(state, gamma_hat, 0.0);
  const auto totals = core_totals(model, gamma_hat);

  MetricsReport r;
  r.q = obj.q_ave;
  r.dp = obj.dp_ave;
  r.d_h = hydraulic_diameter(model, gamma_hat);
  r.area_total = totals.area;
  r.pr = mat.prandtl();
  r.heat_density = r.q / totals.volume;

  // Flow length: core extent along the dominant core velocity component.
  const VectorField v = model.velocity(state, 0);
  std::array<double, 3> flux{0.0, 0.0, 0.0};
  std::array<int, 3> lo{grid.nx(), grid.ny(), grid.nz()}, hi{-1, -1, -1};
  for (int c : model.core_cells()) {
    const auto p = grid.ijk(c);
    for (int a = 0; a < 3; ++a) {
      flux[a] += std::abs(v.values[c][a]);
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  }
  const int axis = static_cast<int>(std::max_element(flux.begin(), flux.end()) - flux.begin());
  r.length = (hi[axis] - lo[axis] + 1) * grid.h();

  const double u_in = 0.5 * (bc.inlet_speed[0] + bc.inlet_speed[1]);
  r.re = mat.rho * u_in * r.d_h / mat.mu;
  r.f = r.d_h * r.dp / (2.0 * mat.rho * u_in * u_in * r.length);

  const int hot = bc.inlet_temperature[0] >= bc.inlet_temperature[1] ? 0 : 1;
  const int cold = 1 - hot;
  r.terminal_temperatures = {bc.inlet_temperature[hot], model.outlet_temperature(state, hot),
                             bc.inlet_temperature[cold], model.outlet_temperature(state, cold)};
  try {
    r.lmtd = lmtd(r.terminal_temperatures[0] - r.terminal_temperatures[3],
                  r.terminal_temperatures[1] - r.terminal_temperatures[2]);
    r.u_coeff = r.q / (r.area_total * r.lmtd);
    r.nu = r.u_coeff * r.d_h / mat.k_f;
    r.j = r.nu / (r.re * std::cbrt(r.pr));
    const Baseline b = baseline ? *baseline : Baseline{r.j, r.f};
    r.pec = pec(r.j, r.f, b.j0, b.f0);
  } catch (const InputError& e) {
    r.valid = false;
    r.flag = e.what();
    r.lmtd = r.u_coeff = r.nu = r.j = r.pec = 0.0;
  }
  r.uniformity = velocity_uniformity(model, state, 0, eta);
  return r;
}

Baseline uniform_baseline(const PorousModel& model) {
  const ScalarField zero("gamma_hat", "1", model.grid().cell_count(), 0.0);
  const State s = model.solve(zero);
  const auto r = dimensionless_suite(model, s, zero);
  if (!r.valid) throw InputError("baseline metrics undefined: " + r.flag);
  return {r.j, r.f};
}

std::string MetricsReport::to_json() const {
  json j;
  j["Q_W"] = q;
  j["dp_Pa"] = dp;
  j["D_h_m"] = d_h;
  j["Re"] = re;
  j["f"] = f;
  j["LMTD_K"] = lmtd;
  j["U_W_per_m2K"] = u_coeff;
  j["Nu"] = nu;
  j["Pr"] = pr;
  j["j"] = this->j;
  j["PEC"] = pec;
  j["A_total_m2"] = area_total;
  j["L_HX_m"] = length;
  j["heat_density_W_per_m3"] = heat_density;
  j["terminal_temperatures_K"] = {{"hot_in", terminal_temperatures[0]},
                                  {"hot_out", terminal_temperatures[1]},
                                  {"cold_in", terminal_temperatures[2]},
                                  {"cold_out", terminal_temperatures[3]}};
  j["valid"] = valid;
  if (!flag.empty()) j["flag"] = flag;
  json u;
  u["mean_speed_m_per_s"] = uniformity.mean_speed;
  u["cv"] = uniformity.cv;
  u["eta"] = uniformity.eta;
  u["f_low"] = uniformity.f_low;
  j["velocity_uniformity"] = u;
  if (improvement_rate) j["improvement_rate_percent"] = *improvement_rate;
  return j.dump(2) + "\n";
}

std::string MetricsReport::csv_header() {
  return "Q_W,dp_Pa,D_h_m,Re,f,LMTD_K,U_W_per_m2K,Nu,Pr,j,PEC,cv,valid";
}

std::string MetricsReport::csv_row() const {
  std::ostringstream out;
  for (double x : {q, dp, d_h, re, f, lmtd, u_coeff, nu, pr, j, pec, uniformity.cv}) out << format_double(x) << ',';
  out << (valid ? 1 : 0);
  return out.str();
}

}  // namespace tpms
