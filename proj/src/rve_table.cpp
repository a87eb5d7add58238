#include "tpms/rve_table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "tpms/conduction.hpp"
#include "tpms/error.hpp"
#include "tpms/field_io.hpp"
#include "tpms/gyroid.hpp"

namespace tpms {

namespace {

const char* kHeader = "c_m,Vdot_m3s,dp_Pa,Q_W,Tw_K,Ti_K,A_m2,Vf_m3";

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& field, const std::string& where) {
  const std::string t = trim(field);
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size() || !std::isfinite(v)) {
    throw InputError(where + ": '" + t + "' is not a finite number");
  }
  return v;
}

}  // namespace

std::vector<double> RveSampleTable::offsets() const {
  std::set<double> s;
  for (const auto& r : rows) s.insert(r.c);
  return {s.begin(), s.end()};
}

void RveSampleTable::validate() const {
  if (!(cell_size > 0.0)) throw InputError("RVE table cell size must be positive");
  materials.validate();
  const double volume = cell_size * cell_size * cell_size;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const std::string where = "RVE row " + std::to_string(i + 1);
    if (r.c < 0.0) throw InputError(where + ": negative offset");
    if (!(r.vdot > 0.0)) throw InputError(where + ": flow rate must be positive");
    if (!(r.dp > 0.0)) throw InputError(where + ": pressure drop must be positive");
    if (r.t_w < 293.15 || r.t_w > 333.15 || r.t_i < 293.15 || r.t_i > 333.15) {
      throw InputError(where + ": temperatures outside [293.15, 333.15] K");
    }
    if (!(r.area > 0.0)) throw InputError(where + ": area must be positive");
    if (!(r.v_f > 0.0) || r.v_f > volume) throw InputError(where + ": fluid volume outside (0, L^3]");
  }
}

void write_rve_csv(const std::string& path, const RveSampleTable& t) {
  std::string s;
  s += "# provenance=" + t.provenance + "\n";
  s += "# cell_size_m=" + format_double(t.cell_size) + "\n";
  s += "# rho=" + format_double(t.materials.rho) + "\n";
  s += "# mu=" + format_double(t.materials.mu) + "\n";
  s += "# cp=" + format_double(t.materials.cp) + "\n";
  s += "# k_f=" + format_double(t.materials.k_f) + "\n";
  s += "# k_s=" + format_double(t.materials.k_s) + "\n";
  for (const auto& [k, v] : t.metadata) s += "# " + k + "=" + v + "\n";
  s += std::string(kHeader) + "\n";
  for (const auto& r : t.rows) {
    s += format_double(r.c) + "," + format_double(r.vdot) + "," + format_double(r.dp) + "," +
         format_double(r.q) + "," + format_double(r.t_w) + "," + format_double(r.t_i) + "," +
         format_double(r.area) + "," + format_double(r.v_f) + "\n";
  }
  write_text_file(path, s);
}

RveSampleTable parse_rve_csv(const std::string& text, const std::string& source) {
  RveSampleTable t;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool header = false;
  const std::vector<std::string> expected = {"c_m", "Vdot_m3s", "dp_Pa", "Q_W",
                                             "Tw_K", "Ti_K", "A_m2", "Vf_m3"};
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = source + " line " + std::to_string(lineno);
    line = trim(line);
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = trim(line.substr(1, eq - 1));
      const std::string val = trim(line.substr(eq + 1));
      if (key == "provenance") t.provenance = val;
      else if (key == "cell_size_m") t.cell_size = parse_number(val, where);
      else if (key == "rho") t.materials.rho = parse_number(val, where);
      else if (key == "mu") t.materials.mu = parse_number(val, where);
      else if (key == "cp") t.materials.cp = parse_number(val, where);
      else if (key == "k_f") t.materials.k_f = parse_number(val, where);
      else if (key == "k_s") t.materials.k_s = parse_number(val, where);
      else t.metadata[key] = val;
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(trim(f));
    if (!header) {
      for (const auto& name : expected) {
        if (std::find(fields.begin(), fields.end(), name) == fields.end()) {
          throw InputError(where + ": header is missing column '" + name + "'");
        }
      }
      if (fields != expected) throw InputError(where + ": header must be exactly " + kHeader);
      header = true;
      continue;
    }
    if (fields.size() != expected.size()) {
      throw InputError(where + ": expected 8 values, found " + std::to_string(fields.size()));
    }
    RveRow r;
    r.c = parse_number(fields[0], where);
    r.vdot = parse_number(fields[1], where);
    r.dp = parse_number(fields[2], where);
    r.q = parse_number(fields[3], where);
    r.t_w = parse_number(fields[4], where);
    r.t_i = parse_number(fields[5], where);
    r.area = parse_number(fields[6], where);
    r.v_f = parse_number(fields[7], where);
    t.rows.push_back(r);
  }
  if (!header) throw InputError(source + ": missing header " + kHeader);
  t.validate();
  return t;
}

RveSampleTable read_rve_csv(const std::string& path) { return parse_rve_csv(read_text_file(path), path); }

double compute_h_star(const RveRow& row) {
  const double dT = row.t_w - row.t_i;
  if (!(std::abs(dT) > 1e-9)) throw InputError("wall and fluid temperatures coincide; h* is undefined");
  if (!(row.area > 0.0)) throw InputError("h* needs a positive wall area");
  return row.q / (row.area * dT);
}

DarcyForchheimerFit fit_darcy_forchheimer(const std::vector<double>& speed,
                                          const std::vector<double>& dp, double cell_size) {
  if (speed.size() != dp.size()) throw ContractError("speed and pressure-drop lists differ in length");
  if (!(cell_size > 0.0)) throw InputError("cell size must be positive");
  std::set<double> distinct;
  for (double u : speed) {
    if (!(u > 0.0)) throw InputError("Darcy-Forchheimer fit needs positive velocities");
    distinct.insert(u);
  }
  if (distinct.size() < 3) throw FitError("Darcy-Forchheimer fit needs at least 3 distinct velocities");
  std::vector<double> c0(speed.size()), c1(speed.size()), y(speed.size());
  // Columns are scaled to unit magnitude so the two unknowns are balanced.
  // Rows are divided by the measured gradient: relative least squares, the
  // natural weighting for proportional measurement error.
  const double umax = *distinct.rbegin();
  for (std::size_t i = 0; i < speed.size(); ++i) {
    if (!(dp[i] > 0.0)) throw InputError("Darcy-Forchheimer fit needs positive pressure drops");
    const double g = dp[i] / cell_size;
    c0[i] = speed[i] / umax / g;
    c1[i] = speed[i] * speed[i] / (umax * umax) / g;
    y[i] = 1.0;
  }
  const auto sol = nnls2(c0, c1, y);
  DarcyForchheimerFit fit;
  fit.alpha = sol.x0 / umax;
  fit.beta = sol.x1 / (umax * umax);
  double r2 = 0.0;
  for (std::size_t i = 0; i < speed.size(); ++i) {
    const double r = fit.alpha * speed[i] + fit.beta * speed[i] * speed[i] - dp[i] / cell_size;
    r2 += r * r;
  }
  fit.residual_norm = std::sqrt(r2);
  fit.clamped = sol.clamped;
  return fit;
}

namespace {

double rms_of(const Polynomial2D& p, const std::vector<double>& a, const std::vector<double>& b,
              const std::vector<double>& z, const std::vector<std::size_t>& idx) {
  double s = 0.0;
  for (std::size_t i : idx) {
    const double r = p(a[i], b[i]) - z[i];
    s += r * r;
  }
  return idx.empty() ? 0.0 : std::sqrt(s / idx.size());
}

}  // namespace

HSurfaceFit fit_h_surface(const std::vector<double>& gamma_hat, const std::vector<double>& speed,
                          const std::vector<double>& h, const HSurfaceOptions& opt) {
  if (gamma_hat.size() != speed.size() || gamma_hat.size() != h.size()) {
    throw ContractError("h* fit inputs differ in length");
  }
  std::set<double> levels_g(gamma_hat.begin(), gamma_hat.end());
  std::set<double> levels_u(speed.begin(), speed.end());
  if (levels_g.size() < 4 || levels_u.size() < 4) {
    throw FitError("h* fit needs at least 4 thickness levels and 4 speed levels");
  }
  HSurfaceFit out;
  out.speed_lo = *levels_u.begin();
  out.speed_hi = *levels_u.rbegin();
  const std::size_t n = h.size();
  std::vector<double> u(n);
  for (std::size_t i = 0; i < n; ++i) u[i] = (speed[i] - out.speed_lo) / (out.speed_hi - out.speed_lo);

  std::vector<std::pair<int, int>> candidates;
  if (opt.deg_gamma >= 0 && opt.deg_speed >= 0) {
    candidates.emplace_back(opt.deg_gamma, opt.deg_speed);
  } else {
    for (int dg = 1; dg <= 3; ++dg) {
      for (int du = 1; du <= 3; ++du) candidates.emplace_back(dg, du);
    }
  }
  const int k = std::max(2, opt.folds);
  double best = std::numeric_limits<double>::infinity();
  std::pair<int, int> chosen = candidates.front();
  for (const auto& [dg, du] : candidates) {
    double sse = 0.0;
    std::size_t count = 0;
    bool ok = true;
    for (int fold = 0; fold < k && ok; ++fold) {
      std::vector<double> ta, tb, tz;
      std::vector<std::size_t> held;
      for (std::size_t i = 0; i < n; ++i) {
        if (static_cast<int>(i % k) == fold) {
          held.push_back(i);
        } else {
          ta.push_back(gamma_hat[i]);
          tb.push_back(u[i]);
          tz.push_back(h[i]);
        }
      }
      try {
        const auto p = fit_polynomial_2d(ta, tb, tz, dg, du);
        const double r = rms_of(p, gamma_hat, u, h, held);
        sse += r * r * held.size();
        count += held.size();
      } catch (const FitError&) {
        ok = false;
      }
    }
    const double cv = ok ? std::sqrt(sse / count) : std::numeric_limits<double>::infinity();
    out.candidates.push_back(std::to_string(dg) + "," + std::to_string(du) + ":" + format_double(cv));
    const int size = (dg + 1) * (du + 1);
    const int best_size = (chosen.first + 1) * (chosen.second + 1);
    // Prefer the smaller model when held-out errors agree to round-off.
    const double scale = 1e-12 * (*std::max_element(h.begin(), h.end())) +
                         (std::isfinite(best) ? 1e-9 * best : 0.0);
    if (!std::isfinite(cv)) continue;
    if (!std::isfinite(best) || cv < best - scale || (cv <= best + scale && size < best_size)) {
      best = cv;
      chosen = {dg, du};
    }
  }
  if (!std::isfinite(best)) throw FitError("h* fit failed for every candidate degree");
  out.cv_error = best;

  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  out.poly = fit_polynomial_2d(gamma_hat, u, h, chosen.first, chosen.second);

  const int grid = std::max(2, opt.validation_grid);
  std::vector<double> sorted_h = h;
  std::sort(sorted_h.begin(), sorted_h.end());
  const double floor_value = 0.05 * std::abs(sorted_h[n / 2]);
  std::vector<std::vector<double>> rows;
  std::vector<double> targets;
  double weight = 1.0;
  for (int round = 0;; ++round) {
    std::vector<std::pair<double, double>> negative;
    for (int i = 0; i < grid; ++i) {
      for (int j = 0; j < grid; ++j) {
        const double a = i / double(grid - 1);
        const double b = j / double(grid - 1);
        if (!(out.poly(a, b) > 0.0)) negative.emplace_back(a, b);
      }
    }
    if (negative.empty()) break;
    if (round == 8) {
      std::string msg = "h* fit stays non-positive on the validation grid at (gamma_hat, u):";
      for (std::size_t i = 0; i < std::min<std::size_t>(negative.size(), 10); ++i) {
        msg += " (" + format_double(negative[i].first) + ", " + format_double(negative[i].second) + ")";
      }
      throw FitError(msg);
    }
    out.penalized = true;
    for (const auto& [a, b] : negative) {
      auto row = monomial_row_2d(a, b, chosen.first, chosen.second);
      for (double& v : row) v *= weight;
      rows.push_back(std::move(row));
      targets.push_back(weight * floor_value);
    }
    out.poly = fit_polynomial_2d(gamma_hat, u, h, chosen.first, chosen.second, rows, targets);
    weight *= 4.0;
  }
  out.rms = rms_of(out.poly, gamma_hat, u, h, all);
  return out;
}

double synthetic_alpha(double eps, double d, const Materials& m) { return 64.0 * m.mu / (eps * d * d); }

double synthetic_beta(double eps, double d, const Materials& m) { return 0.3 * m.rho / (eps * eps * d); }

double synthetic_h_star(double eps, double d, double speed, const Materials& m) {
  const double re = m.rho * speed * d / (eps * m.mu);
  const double nu = 3.0 + 0.4 * std::pow(re, 0.6) * std::cbrt(m.prandtl());
  return m.k_f / d * nu;
}

RveSampleTable generate_synthetic_rve_table(std::uint64_t seed, const SyntheticRveConfig& cfg) {
  if (cfg.offsets.empty() || cfg.flow_rates < 2 || !(cfg.vdot_hi > cfg.vdot_lo) || !(cfg.vdot_lo > 0.0)) {
    throw InputError("synthetic RVE configuration is incomplete");
  }
  cfg.materials.validate();
  RveSampleTable t;
  t.cell_size = cfg.cell_size;
  t.materials = cfg.materials;
  t.provenance = "synthetic";
  t.metadata["seed"] = std::to_string(seed);
  t.metadata["noise"] = format_double(cfg.noise);
  t.metadata["spacing"] = cfg.log_spacing ? "geometric" : "linear";
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double L = cfg.cell_size;
  const double volume = L * L * L;
  for (double c : cfg.offsets) {
    const auto cell = measure_cell(c, L, cfg.volume_samples, cfg.area_resolution);
    const double eps = cell.eps1;
    const double area = cell.area1;
    const double d = 4.0 * eps * volume / area;
    const double alpha = synthetic_alpha(eps, d, cfg.materials);
    const double beta = synthetic_beta(eps, d, cfg.materials);
    for (int k = 0; k < cfg.flow_rates; ++k) {
      RveRow r;
      r.c = c;
      const double s = static_cast<double>(k) / (cfg.flow_rates - 1);
      r.vdot = cfg.log_spacing ? cfg.vdot_lo * std::pow(cfg.vdot_hi / cfg.vdot_lo, s)
                               : cfg.vdot_lo + (cfg.vdot_hi - cfg.vdot_lo) * s;
      const double U = r.vdot / (L * L);
      r.dp = (alpha * U + beta * U * U) * L;
      r.t_i = 312.65 + 0.2 * unit(rng);
      r.t_w = 313.15 + 0.2 * unit(rng);
      r.area = area;
      r.v_f = eps * volume;
      r.q = synthetic_h_star(eps, d, U, cfg.materials) * area * (r.t_w - r.t_i);
      if (cfg.noise > 0.0) {
        r.dp *= 1.0 + cfg.noise * normal(rng);
        r.q *= 1.0 + cfg.noise * normal(rng);
      }
      t.rows.push_back(r);
    }
  }
  t.validate();
  return t;
}

std::string PropertyFitReport::to_json() const {
  nlohmann::json j;
  j["offsets_m"] = offsets;
  j["gamma_hat"] = gamma_hat;
  std::vector<double> a, b, res;
  for (const auto& r : resistance) {
    a.push_back(r.alpha);
    b.push_back(r.beta);
    res.push_back(r.residual_norm);
  }
  j["alpha_per_offset"] = a;
  j["beta_per_offset"] = b;
  j["resistance_residual_norm"] = res;
  j["epsilon_per_offset"] = eps;
  j["area_per_offset_m2"] = area;
  j["k_f_eff_per_offset"] = k_f;
  j["k_s_eff_per_offset"] = k_s;
  j["h_star"] = {{"deg_gamma", h_surface.poly.deg_a},
                 {"deg_u", h_surface.poly.deg_b},
                 {"rms", h_surface.rms},
                 {"cv_error", h_surface.cv_error},
                 {"positivity_penalty", h_surface.penalized},
                 {"candidates", h_surface.candidates}};
  j["max_relative_deviation"] = {{"epsilon", eps_max_rel_dev}, {"area", area_max_rel_dev},
                                 {"k_f_eff", k_f_max_rel_dev}, {"k_s_eff", k_s_max_rel_dev},
                                 {"alpha", alpha_max_rel_dev}, {"beta", beta_max_rel_dev}};
  j["monotonicity_ok"] = invariant_violations.empty();
  j["invariant_violations"] = invariant_violations;
  return j.dump(2) + "\n";
}

EffectivePropertySet fit_properties(const RveSampleTable& table, const PropertyFitOptions& opt,
                                    PropertyFitReport* report_out) {
  table.validate();
  const auto offsets = table.offsets();
  if (offsets.size() < 2) throw FitError("property fit needs at least two offsets");
  const double L = table.cell_size;
  const double volume = L * L * L;
  PropertyFitReport rep;
  rep.offsets = offsets;
  const double c_min = offsets.front();
  const double c_max = offsets.back();
  auto to_gamma = [&](double c) { return (c - c_min) / (c_max - c_min); };

  std::vector<double> alpha_v, beta_v;
  std::vector<double> hg, hu, hh;
  for (double c : offsets) {
    std::vector<double> speeds, dps;
    double vf = 0.0, area = 0.0;
    int count = 0;
    for (const auto& r : table.rows) {
      if (r.c != c) continue;
      speeds.push_back(r.vdot / (L * L));
      dps.push_back(r.dp);
      vf += r.v_f;
      area += r.area;
      ++count;
      hg.push_back(to_gamma(c));
      hu.push_back(r.vdot / (L * L));
      hh.push_back(compute_h_star(r));
    }
    rep.gamma_hat.push_back(to_gamma(c));
    rep.eps.push_back(vf / count / volume);
    rep.area.push_back(area / count);
    const auto df = fit_darcy_forchheimer(speeds, dps, L);
    rep.resistance.push_back(df);
    alpha_v.push_back(df.alpha);
    beta_v.push_back(df.beta);
    const auto spec = GyroidSpec::unit_cell(L, c);
    const auto ks = conduction_homogenize(spec, ConductionPhase::Solid, opt.conduction_resolution,
                                          table.materials.k_s);
    const auto kf = conduction_homogenize(spec, ConductionPhase::Fluid1, opt.conduction_resolution,
                                          table.materials.k_f);
    rep.k_s.push_back(ks.k_eff);
    rep.k_f.push_back(kf.k_eff);
    rep.conduction_disconnected.push_back(ks.disconnected || kf.disconnected);
  }
  const int m = static_cast<int>(offsets.size());
  const int sdeg = std::min(opt.scalar_degree, m - 1);
  const int rdeg = std::min(opt.resistance_degree, m - 1);
  EffectivePropertySet p;
  p.provenance = table.provenance;
  p.cell_size = L;
  p.c_min = c_min;
  p.c_max = c_max;
  auto fit = [&](const std::vector<double>& v, int deg, double& dev) {
    auto f = fit_polynomial(rep.gamma_hat, v, deg);
    dev = f.max_rel_deviation;
    return f.poly;
  };
  p.eps = fit(rep.eps, sdeg, rep.eps_max_rel_dev);
  p.area = fit(rep.area, sdeg, rep.area_max_rel_dev);
  p.k_f = fit(rep.k_f, sdeg, rep.k_f_max_rel_dev);
  p.k_s = fit(rep.k_s, sdeg, rep.k_s_max_rel_dev);
  p.alpha = fit(alpha_v, rdeg, rep.alpha_max_rel_dev);
  p.beta = fit(beta_v, rdeg, rep.beta_max_rel_dev);
  rep.h_surface = fit_h_surface(hg, hu, hh, opt.h_surface);
  p.h_star = rep.h_surface.poly;
  p.speed_lo = rep.h_surface.speed_lo;
  p.speed_hi = rep.h_surface.speed_hi;
  rep.invariant_violations = p.check_invariants(true);
  if (report_out) *report_out = std::move(rep);
  return p;
}

}  // namespace tpms
