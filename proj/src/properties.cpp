#include "tpms/properties.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <sstream>

#include "tpms/error.hpp"
#include "tpms/field_io.hpp"

namespace tpms {

using nlohmann::json;

void Materials::validate() const {
  if (!(rho > 0.0 && mu > 0.0 && cp > 0.0 && k_f > 0.0 && k_s > 0.0)) {
    throw InputError("material constants must be positive");
  }
}

PropertyValues EffectivePropertySet::eval(double gamma_hat, double speed) const {
  PropertyValues v;
  double g = gamma_hat;
  if (g < 0.0 || g > 1.0) {
    g = std::clamp(g, 0.0, 1.0);
    v.gamma_clamped = true;
  }
  const double span = speed_hi - speed_lo;
  double u = (speed - speed_lo) / span;
  if (u < 0.0 || u > 1.0) {
    u = std::clamp(u, 0.0, 1.0);
    v.speed_clamped = true;
  }
  v.eps = eps(g);
  v.area = area(g);
  v.k_f = k_f(g);
  v.k_s = k_s(g);
  v.alpha = alpha(g);
  v.beta = beta(g);
  v.h = h_star(g, u);
  if (!v.gamma_clamped) {
    v.d_eps = eps.derivative(g);
    v.d_area = area.derivative(g);
    v.d_k_f = k_f.derivative(g);
    v.d_k_s = k_s.derivative(g);
    v.d_alpha = alpha.derivative(g);
    v.d_beta = beta.derivative(g);
    v.dh_dgamma = h_star.d_a(g, u);
  }
  if (!v.speed_clamped) v.dh_dspeed = h_star.d_b(g, u) / span;
  return v;
}

EffectivePropertySet EffectivePropertySet::constant(double eps_v, double area_v, double k_f_v,
                                                    double k_s_v, double alpha_v, double beta_v,
                                                    double h_v, double cell_size_v) {
  EffectivePropertySet p;
  p.provenance = "constant";
  p.cell_size = cell_size_v;
  p.eps.coeffs = {eps_v};
  p.area.coeffs = {area_v};
  p.k_f.coeffs = {k_f_v};
  p.k_s.coeffs = {k_s_v};
  p.alpha.coeffs = {alpha_v};
  p.beta.coeffs = {beta_v};
  p.h_star.coeffs = {h_v};
  return p;
}

std::vector<std::string> EffectivePropertySet::check_invariants(bool require_monotone) const {
  std::vector<std::string> bad;
  auto note = [&](const std::string& what, double g, double val) {
    std::ostringstream s;
    s << what << " at gamma_hat=" << g << " (value " << val << ")";
    bad.push_back(s.str());
  };
  if (!(cell_size > 0.0)) bad.push_back("cell size must be positive");
  if (!(c_min < c_max)) bad.push_back("c_min must be below c_max");
  if (!(speed_hi > speed_lo) || speed_lo < 0.0) bad.push_back("speed validity range is invalid");
  for (const auto* p : {&eps, &area, &k_f, &k_s, &alpha, &beta}) {
    if (p->coeffs.empty()) {
      bad.push_back("a property polynomial has no coefficients");
      return bad;
    }
  }
  if (h_star.coeffs.size() != static_cast<std::size_t>((h_star.deg_a + 1) * (h_star.deg_b + 1))) {
    bad.push_back("h_star coefficient count does not match its degrees");
    return bad;
  }
  for (int i = 0; i <= 100 && bad.size() < 20; ++i) {
    const double g = i / 100.0;
    const double e = eps(g);
    if (!(e > 0.0 && e <= 0.5)) note("porosity outside (0, 0.5]", g, e);
    if (require_monotone && eps.derivative(g) > 0.0) note("porosity increases", g, eps.derivative(g));
    if (!(area(g) > 0.0)) note("area not positive", g, area(g));
    if (!(k_f(g) >= 0.0)) note("fluid conductivity negative", g, k_f(g));
    if (!(k_s(g) >= 0.0)) note("wall conductivity negative", g, k_s(g));
    if (!(alpha(g) > 0.0)) note("alpha not positive", g, alpha(g));
    if (!(beta(g) >= 0.0)) note("beta negative", g, beta(g));
    if (!require_monotone) continue;
    for (int j = 0; j <= 100; ++j) {
      const double U = speed_lo + (speed_hi - speed_lo) * j / 100.0;
      const double dg = alpha.derivative(g) * U + beta.derivative(g) * U * U;
      const double du = alpha(g) + 2.0 * beta(g) * U;
      if (!(dg > 0.0) && U > 0.0) {
        note("resistance not increasing in gamma_hat at |U|=" + format_double(U), g, dg);
        break;
      }
      if (!(du > 0.0)) {
        note("resistance not increasing in |U| at |U|=" + format_double(U), g, du);
        break;
      }
    }
  }
  for (int i = 0; i < 50 && bad.size() < 20; ++i) {
    for (int j = 0; j < 50; ++j) {
      const double g = i / 49.0;
      const double u = j / 49.0;
      const double h = h_star(g, u);
      if (!(h > 0.0)) {
        note("h_star not positive at u=" + format_double(u), g, h);
        break;
      }
    }
  }
  return bad;
}

void EffectivePropertySet::validate(bool require_monotone) const {
  const auto bad = check_invariants(require_monotone);
  if (bad.empty()) return;
  std::string msg = "effective properties violate invariants:";
  for (const auto& b : bad) msg += "\n  " + b;
  throw InputError(msg);
}

std::string EffectivePropertySet::to_json() const {
  json j;
  j["format"] = "tpmsopt-properties";
  j["version"] = 1;
  j["provenance"] = provenance;
  j["cell_size_m"] = cell_size;
  j["c_min_m"] = c_min;
  j["c_max_m"] = c_max;
  j["validity"] = {{"gamma_hat", {0.0, 1.0}}, {"speed_m_per_s", {speed_lo, speed_hi}}};
  j["epsilon"] = eps.coeffs;
  j["area_m2"] = area.coeffs;
  j["k_f_eff_W_per_mK"] = k_f.coeffs;
  j["k_s_eff_W_per_mK"] = k_s.coeffs;
  j["alpha_Pa_s_per_m2"] = alpha.coeffs;
  j["beta_Pa_s2_per_m3"] = beta.coeffs;
  j["h_star"] = {{"deg_gamma", h_star.deg_a},
                 {"deg_u", h_star.deg_b},
                 {"coeffs", h_star.coeffs},
                 {"normalization", "u = (|U| - speed_lo) / (speed_hi - speed_lo)"}};
  return j.dump(2) + "\n";
}

EffectivePropertySet EffectivePropertySet::from_json(const std::string& text) {
  EffectivePropertySet p;
  try {
    const json j = json::parse(text);
    if (j.value("format", "") != "tpmsopt-properties") {
      throw InputError("not a property-set document (format tag missing)");
    }
    p.provenance = j.at("provenance").get<std::string>();
    p.cell_size = j.at("cell_size_m").get<double>();
    p.c_min = j.at("c_min_m").get<double>();
    p.c_max = j.at("c_max_m").get<double>();
    const auto speeds = j.at("validity").at("speed_m_per_s");
    p.speed_lo = speeds.at(0).get<double>();
    p.speed_hi = speeds.at(1).get<double>();
    p.eps.coeffs = j.at("epsilon").get<std::vector<double>>();
    p.area.coeffs = j.at("area_m2").get<std::vector<double>>();
    p.k_f.coeffs = j.at("k_f_eff_W_per_mK").get<std::vector<double>>();
    p.k_s.coeffs = j.at("k_s_eff_W_per_mK").get<std::vector<double>>();
    p.alpha.coeffs = j.at("alpha_Pa_s_per_m2").get<std::vector<double>>();
    p.beta.coeffs = j.at("beta_Pa_s2_per_m3").get<std::vector<double>>();
    const auto& h = j.at("h_star");
    p.h_star.deg_a = h.at("deg_gamma").get<int>();
    p.h_star.deg_b = h.at("deg_u").get<int>();
    p.h_star.coeffs = h.at("coeffs").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed property JSON: ") + e.what());
  }
  const auto bad = p.check_invariants(false);
  if (!bad.empty()) throw InputError("property JSON is inconsistent: " + bad.front());
  return p;
}

void EffectivePropertySet::save(const std::string& path) const { write_text_file(path, to_json()); }

EffectivePropertySet EffectivePropertySet::load(const std::string& path) {
  return from_json(read_text_file(path));
}

}  // namespace tpms
