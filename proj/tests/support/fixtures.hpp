#pragma once

// Shared inputs for the test programs.

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "tpms/grid.hpp"
#include "tpms/properties.hpp"
#include "tpms/rve_table.hpp"

namespace fixture {

/// Smooth property set with every gamma_hat dependence the model has, cheap
/// to build and valid under check_invariants().
inline tpms::EffectivePropertySet graded_properties() {
  tpms::EffectivePropertySet p;
  p.provenance = "test";
  p.speed_lo = 0.0;
  p.speed_hi = 0.2;
  p.eps.coeffs = {0.4, -0.1};
  p.area.coeffs = {3.0e-5, 1.0e-5};
  p.k_f.coeffs = {0.2, -0.05};
  p.k_s.coeffs = {20.0, 30.0};
  p.alpha.coeffs = {2.0e4, 3.0e4, 1.0e4};
  p.beta.coeffs = {3.0e5, 2.0e5};
  p.h_star.deg_a = 1;
  p.h_star.deg_b = 1;
  p.h_star.coeffs = {1500.0, 800.0, -300.0, 100.0};
  return p;
}

/// Directory shared by the test programs for expensive artefacts.
inline std::filesystem::path cache_dir() {
  std::filesystem::path d = TPMS_TEST_CACHE_DIR;
  std::filesystem::create_directories(d);
  return d;
}

/// The default desk property set: the synthetic seed-42 table fitted with
/// default options. Cached on disk after the first build.
inline tpms::EffectivePropertySet desk_properties() {
  const auto path = cache_dir() / "desk_properties.json";
  if (std::filesystem::exists(path)) return tpms::EffectivePropertySet::load(path.string());
  const auto props = tpms::fit_properties(tpms::generate_synthetic_rve_table(42), {});
  const auto tmp = path.string() + ".tmp" + std::to_string(::getpid());
  props.save(tmp);
  std::filesystem::rename(tmp, path);
  return props;
}

}  // namespace fixture
