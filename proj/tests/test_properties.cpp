#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "tpms/conduction.hpp"
#include "tpms/dual.hpp"
#include "tpms/error.hpp"
#include "tpms/field_io.hpp"
#include "tpms/polynomial.hpp"
#include "tpms/properties.hpp"
#include "tpms/rve_table.hpp"

using namespace tpms;
namespace fs = std::filesystem;

namespace {

constexpr double kL = 4.6e-3;

std::vector<double> layered(int n, int period, int on, double k) {
  std::vector<double> v(static_cast<std::size_t>(n) * n * n, 0.0);
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) v[x + n * (y + n * z)] = (y % period) < on ? k : 0.0;
  return v;
}

}  // namespace

TEST(Conduction, FullSolidReturnsBulkConductivity) {
  const auto spec = GyroidSpec::unit_cell(kL, 1.6 * kL);
  const auto r = conduction_homogenize(spec, ConductionPhase::Solid, 16, 237.0);
  EXPECT_NEAR(r.k_eff / 237.0, 1.0, 1e-6);
  EXPECT_FALSE(r.disconnected);
}

TEST(Conduction, LayersParallelToTheGradient) {
  // Conducting layers normal to y carry phi * k along x.
  const auto r = voxel_conductivity(layered(32, 4, 1, 10.0), 32);
  EXPECT_NEAR(r.k_eff, 0.25 * 10.0, 0.01 * 2.5);
  EXPECT_NEAR(r.volume_fraction, 0.25, 1e-12);
}

TEST(Conduction, SeriesLayersAreHarmonic) {
  const int n = 16;
  std::vector<double> k(static_cast<std::size_t>(n) * n * n);
  for (std::size_t i = 0; i < k.size(); ++i) k[i] = (i % n) < n / 2 ? 1.0 : 3.0;
  const auto r = voxel_conductivity(k, n);
  EXPECT_NEAR(r.k_eff, 1.0 / (0.5 / 1.0 + 0.5 / 3.0), 1e-8);
}

TEST(Conduction, DisconnectedPhase) {
  // Layers normal to x block every path.
  const int n = 8;
  std::vector<double> k(static_cast<std::size_t>(n) * n * n, 1.0);
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y) k[3 + n * (y + n * z)] = 0.0;
  const auto r = voxel_conductivity(k, n);
  EXPECT_TRUE(r.disconnected);
  EXPECT_EQ(r.k_eff, 0.0);
}

TEST(Conduction, WallConductivityGrowsWithOffset) {
  double prev = 0.0;
  for (double c : {1.5e-3, 2.5e-3, 3.5e-3}) {
    const auto r = conduction_homogenize(GyroidSpec::unit_cell(kL, c), ConductionPhase::Solid, 16, 237.0);
    EXPECT_GT(r.k_eff, prev);
    prev = r.k_eff;
  }
  EXPECT_LT(prev, 237.0);
}

TEST(Polynomial, ExactFitAndDerivative) {
  const Polynomial p{{1.0, -2.0, 0.5}};
  std::vector<double> x, y;
  for (int i = 0; i < 7; ++i) {
    x.push_back(0.1 * i);
    y.push_back(p(0.1 * i));
  }
  const auto f = fit_polynomial(x, y, 2);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(f.poly.coeffs[i], p.coeffs[i], 1e-12);
  EXPECT_NEAR(p.derivative(0.3), -2.0 + 0.3, 1e-15);
  EXPECT_THROW(fit_polynomial({0.0, 0.0, 1.0}, {1.0, 1.0, 2.0}, 2), FitError);
}

TEST(Polynomial, BivariateDerivativesMatchDifferences) {
  Polynomial2D p;
  p.deg_a = 2;
  p.deg_b = 1;
  p.coeffs = {1.0, 2.0, -0.5, 0.3, 0.7, -1.1};
  const double a = 0.4, b = 0.6;
  EXPECT_NEAR(p.d_a(a, b), oracle::central_difference([&](double t) { return p(t, b); }, a, 1e-6), 1e-8);
  EXPECT_NEAR(p.d_b(a, b), oracle::central_difference([&](double t) { return p(a, t); }, b, 1e-6), 1e-8);
}

TEST(Polynomial, NonNegativeLeastSquares) {
  // y = 2 x0 - 1 x1 has a negative coefficient, so the constrained optimum
  // drops x1.
  std::vector<double> c0{1, 2, 3, 4}, c1{1, 4, 9, 16}, y;
  for (int i = 0; i < 4; ++i) y.push_back(2 * c0[i] - c1[i]);
  const auto s = nnls2(c0, c1, y);
  EXPECT_TRUE(s.clamped);
  EXPECT_EQ(s.x1, 0.0);
  EXPECT_GE(s.x0, 0.0);
  std::vector<double> y2;
  for (int i = 0; i < 4; ++i) y2.push_back(2 * c0[i] + 3 * c1[i]);
  const auto t = nnls2(c0, c1, y2);
  EXPECT_FALSE(t.clamped);
  EXPECT_NEAR(t.x0, 2.0, 1e-12);
  EXPECT_NEAR(t.x1, 3.0, 1e-12);
}

TEST(Dual, ChainRuleMatchesFiniteDifference) {
  auto f = [](const auto& x, const auto& y) { return tpms::sqrt(x * x + 3.0 * y) / (1.0 + x * y) - 2.0 * y; };
  const double x0 = 0.7, y0 = 1.3;
  const Dual r = f(Dual::variable(x0, 0), Dual::variable(y0, 1));
  EXPECT_DOUBLE_EQ(r.v, f(x0, y0));
  ASSERT_EQ(r.d.size(), 2u);
  EXPECT_NEAR(r.d[0].second, oracle::central_difference([&](double t) { return f(t, y0); }, x0, 1e-6), 1e-8);
  EXPECT_NEAR(r.d[1].second, oracle::central_difference([&](double t) { return f(x0, t); }, y0, 1e-6), 1e-8);
}

TEST(Resistance, NoiselessFitIsExact) {
  const double alpha = 3.2e5, beta = 4.1e6;
  std::vector<double> U, dp;
  for (int i = 1; i <= 10; ++i) {
    U.push_back(0.01 * i);
    dp.push_back((alpha * U.back() + beta * U.back() * U.back()) * kL);
  }
  const auto f = fit_darcy_forchheimer(U, dp, kL);
  EXPECT_NEAR(f.alpha / alpha, 1.0, 1e-10);
  EXPECT_NEAR(f.beta / beta, 1.0, 1e-10);
  EXPECT_FALSE(f.clamped);
  EXPECT_THROW(fit_darcy_forchheimer({0.1, 0.1, 0.2}, {1, 1, 2}, kL), FitError);
  EXPECT_THROW(fit_darcy_forchheimer({0.1, 0.2, -0.3}, {1, 2, 3}, kL), InputError);
}

TEST(Resistance, PureDarcyDataClampsForchheimer) {
  std::vector<double> U, dp;
  for (int i = 1; i <= 8; ++i) {
    U.push_back(0.01 * i);
    dp.push_back(1e5 * U.back() * kL * (1.0 - 0.002 * i));
  }
  const auto f = fit_darcy_forchheimer(U, dp, kL);
  EXPECT_GE(f.beta, 0.0);
  EXPECT_GT(f.alpha, 0.0);
}

TEST(Exchange, HStarDefinition) {
  RveRow r;
  r.q = 2.0;
  r.area = 1e-4;
  r.t_w = 320.0;
  r.t_i = 310.0;
  EXPECT_DOUBLE_EQ(compute_h_star(r), 2.0 / (1e-4 * 10.0));
  r.t_i = 320.0;
  EXPECT_THROW(compute_h_star(r), InputError);
}

TEST(Exchange, SurfaceFitRecoversPolynomialData) {
  std::vector<double> g, u, h;
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) {
      g.push_back(i / 5.0);
      u.push_back(0.01 + 0.02 * j);
      const double un = (u.back() - 0.01) / 0.1;
      h.push_back(1000.0 + 400.0 * un - 200.0 * g.back() + 50.0 * g.back() * un);
    }
  }
  HSurfaceOptions opt;
  opt.deg_gamma = 1;
  opt.deg_speed = 1;
  const auto f = fit_h_surface(g, u, h, opt);
  EXPECT_LT(f.rms, 1e-8);
  const auto cv = fit_h_surface(g, u, h);
  EXPECT_LT(cv.rms, 1e-6);
  EXPECT_FALSE(cv.candidates.empty());
}

TEST(RveTable, CsvRoundTripAndMalformedInput) {
  SyntheticRveConfig cfg;
  cfg.offsets = {1.5e-3, 2.5e-3};
  cfg.flow_rates = 4;
  cfg.volume_samples = 32768;
  cfg.area_resolution = 16;
  const auto t = generate_synthetic_rve_table(3, cfg);
  const auto dir = fs::temp_directory_path() / "tpms_rve";
  fs::create_directories(dir);
  const auto path = (dir / "t.csv").string();
  write_rve_csv(path, t);
  const auto back = read_rve_csv(path);
  ASSERT_EQ(back.rows.size(), t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    EXPECT_EQ(back.rows[i].dp, t.rows[i].dp);
    EXPECT_EQ(back.rows[i].q, t.rows[i].q);
  }
  EXPECT_EQ(back.provenance, "synthetic");
  EXPECT_EQ(back.offsets().size(), 2u);

  const std::string header = "c_m,Vdot_m3s,dp_Pa,Q_W,Tw_K,Ti_K,A_m2,Vf_m3\n";
  EXPECT_THROW(parse_rve_csv("a,b\n1,2\n"), InputError);
  EXPECT_THROW(parse_rve_csv(header + "0.002,1e-7,5,0.1,313,312\n"), InputError);
  EXPECT_THROW(parse_rve_csv(header + "0.002,1e-7,nan,0.1,313,312,1e-5,1e-8\n"), InputError);
  EXPECT_THROW(parse_rve_csv(header + "0.002,-1e-7,5,0.1,313,312,1e-5,1e-8\n"), InputError);
  EXPECT_THROW(parse_rve_csv(header + "0.002,1e-7,5,0.1,400,312,1e-5,1e-8\n"), InputError);
}

TEST(RveTable, SyntheticIsSeedDeterministic) {
  SyntheticRveConfig cfg;
  cfg.offsets = {2.0e-3};
  cfg.flow_rates = 5;
  cfg.noise = 0.01;
  cfg.volume_samples = 32768;
  cfg.area_resolution = 16;
  const auto a = generate_synthetic_rve_table(11, cfg), b = generate_synthetic_rve_table(11, cfg);
  const auto c = generate_synthetic_rve_table(12, cfg);
  for (std::size_t i = 0; i < a.rows.size(); ++i) EXPECT_EQ(a.rows[i].dp, b.rows[i].dp);
  EXPECT_NE(a.rows[0].dp, c.rows[0].dp);
}

TEST(PropertySet, GradedFixtureIsValidAndRoundTrips) {
  const auto p = fixture::graded_properties();
  EXPECT_TRUE(p.check_invariants().empty());
  const auto back = EffectivePropertySet::from_json(p.to_json());
  const auto v = p.eval(0.3, 0.05), w = back.eval(0.3, 0.05);
  EXPECT_EQ(v.alpha, w.alpha);
  EXPECT_EQ(v.h, w.h);
  EXPECT_EQ(v.eps, w.eps);
}

TEST(PropertySet, EvalDerivativesAndClamping) {
  const auto p = fixture::graded_properties();
  const auto v = p.eval(0.4, 0.07);
  EXPECT_NEAR(v.d_alpha, oracle::central_difference([&](double g) { return p.eval(g, 0.07).alpha; }, 0.4, 1e-6), 1e-4);
  EXPECT_NEAR(v.dh_dspeed, oracle::central_difference([&](double s) { return p.eval(0.4, s).h; }, 0.07, 1e-7), 1e-4);
  const auto lo = p.eval(-0.5, 0.07);
  EXPECT_TRUE(lo.gamma_clamped);
  EXPECT_EQ(lo.d_alpha, 0.0);
  EXPECT_EQ(lo.alpha, p.eval(0.0, 0.07).alpha);
  EXPECT_TRUE(p.eval(0.5, 0.5).speed_clamped);
}

TEST(PropertySet, InvariantViolationsAreNamed) {
  auto p = fixture::graded_properties();
  p.alpha.coeffs = {2.0e4, -3.0e4};
  EXPECT_FALSE(p.check_invariants().empty());
  EXPECT_THROW(p.validate(), InputError);
  auto q = fixture::graded_properties();
  q.eps.coeffs = {0.7};
  EXPECT_FALSE(q.check_invariants().empty());
}

TEST(PropertyFit, SyntheticPipelineIsConsistent) {
  SyntheticRveConfig cfg;
  cfg.volume_samples = 32768;
  cfg.area_resolution = 24;
  const auto t = generate_synthetic_rve_table(5, cfg);
  PropertyFitOptions opt;
  opt.conduction_resolution = 12;
  PropertyFitReport rep;
  const auto p = fit_properties(t, opt, &rep);
  EXPECT_TRUE(rep.invariant_violations.empty());
  EXPECT_EQ(rep.offsets.size(), cfg.offsets.size());
  EXPECT_LT(rep.eps_max_rel_dev, 0.02);
  EXPECT_LT(rep.alpha_max_rel_dev, 0.05);
  // Thicker walls: less fluid, more resistance, more wall conduction.
  EXPECT_LT(p.eval(1.0, 0.05).eps, p.eval(0.0, 0.05).eps);
  EXPECT_GT(p.eval(1.0, 0.05).alpha, p.eval(0.0, 0.05).alpha);
  EXPECT_GT(p.eval(1.0, 0.05).k_s, p.eval(0.0, 0.05).k_s);
}
