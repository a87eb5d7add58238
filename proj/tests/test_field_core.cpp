#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "tpms/error.hpp"
#include "tpms/field_io.hpp"
#include "tpms/filter.hpp"
#include "tpms/grid.hpp"

using namespace tpms;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto d = fs::temp_directory_path() / "tpms_field_core";
  fs::create_directories(d);
  return d / name;
}

ScalarField random_field(const StructuredGrid& g, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ScalarField f("gamma", "1", g.cell_count());
  for (int c = 0; c < g.cell_count(); ++c) f[c] = g.is_core(c) ? u(rng) : 0.0;
  return f;
}

}  // namespace

TEST(Grid, IndexRoundTrip) {
  StructuredGrid g(5, 4, 3, 1e-3);
  for (int c = 0; c < g.cell_count(); ++c) EXPECT_EQ(g.index(g.ijk(c)), c);
  const auto x = g.center(g.index(2, 1, 0));
  EXPECT_DOUBLE_EQ(x[0], 2.5e-3);
  EXPECT_DOUBLE_EQ(x[1], 1.5e-3);
  EXPECT_DOUBLE_EQ(x[2], 0.5e-3);
}

TEST(Grid, CounterflowLayoutHasBothFluids) {
  const auto g = make_counterflow_grid({});
  EXPECT_EQ(g.core_count(), 64);
  int p1 = 0, p2 = 0;
  for (int c = 0; c < g.cell_count(); ++c) {
    p1 += g.region(c) == Region::Fluid1Plenum;
    p2 += g.region(c) == Region::Fluid2Plenum;
  }
  EXPECT_GT(p1, 0);
  EXPECT_EQ(p1, p2);
  int inlets[2] = {0, 0}, outlets[2] = {0, 0};
  for (const auto& p : g.patches()) (p.kind == PatchKind::Inlet ? inlets : outlets)[p.fluid]++;
  EXPECT_GT(inlets[0] * inlets[1] * outlets[0] * outlets[1], 0);
}

TEST(Grid, RejectsMissingOutlet) {
  StructuredGrid g(4, 1, 1, 1e-3);
  g.add_patch({0, PatchKind::Inlet, Side::XMin, {0}});
  EXPECT_THROW(g.validate(), InputError);
}

TEST(Filter, MatchesDenseConeWeights) {
  const auto g = make_counterflow_grid({});
  for (double r : {1.5 * g.h(), 2.5 * g.h()}) {
    const DensityFilter f(g, r);
    const Eigen::MatrixXd ref = oracle::dense_filter(g, r);
    const Eigen::MatrixXd got = Eigen::MatrixXd(f.matrix());
    EXPECT_LT((got - ref).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Filter, TransposeIsExactAdjoint) {
  const auto g = make_counterflow_grid({});
  const DensityFilter f(g, 2.0 * g.h());
  const auto x = random_field(g, 1), y = random_field(g, 2);
  const auto fx = f.apply(x);
  const auto fty = f.apply_transpose(y);
  double a = 0.0, b = 0.0;
  for (int c = 0; c < g.cell_count(); ++c) {
    a += fx[c] * y[c];
    b += x[c] * fty[c];
  }
  EXPECT_NEAR(a, b, 1e-12 * std::abs(a));
}

TEST(Filter, PreservesConstantsAndBounds) {
  const auto g = make_counterflow_grid({});
  const DensityFilter f(g, 1.5 * g.h());
  ScalarField one("gamma", "1", g.cell_count(), 1.0);
  const auto out = f.apply(one);
  for (int c = 0; c < g.cell_count(); ++c) {
    if (g.is_core(c)) EXPECT_NEAR(out[c], 1.0, 1e-14);
    else EXPECT_EQ(out[c], 0.0);
  }
  const auto r = f.apply(random_field(g, 3));
  for (double v : r.values) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Filter, SmallRadius) {
  const auto g = make_counterflow_grid({});
  EXPECT_THROW(DensityFilter(g, 0.4 * g.h()), InputError);
  const DensityFilter id(g, 0.4 * g.h(), true);
  const auto x = random_field(g, 4);
  const auto y = id.apply(x);
  for (int c = 0; c < g.cell_count(); ++c) EXPECT_EQ(x[c], y[c]);
}

TEST(Filter, OffsetMapping) {
  ScalarField gh("gamma_hat", "1", 3);
  gh.values = {0.0, 0.5, 1.0};
  const auto c = gamma_hat_to_c(gh, 1.0, 3.0);
  EXPECT_DOUBLE_EQ(c[0], 1.0);
  EXPECT_DOUBLE_EQ(c[1], 2.0);
  EXPECT_DOUBLE_EQ(c[2], 3.0);
}

TEST(FieldIo, ShortestDoubleRoundTrips) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.5), "0.5");
}

TEST(FieldIo, VtkRoundTrip) {
  const auto g = make_counterflow_grid({});
  const auto f = random_field(g, 5);
  const auto path = scratch("f.vtk").string();
  write_vtk_scalar(path, g, f);
  const auto img = read_vtk(path);
  EXPECT_EQ(img.cells, g.dims());
  ASSERT_EQ(img.values.size(), f.values.size());
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_EQ(img.values[i], f[i]);
}

TEST(FieldIo, VectorVtkRoundTrip) {
  StructuredGrid g(3, 2, 1, 1e-3);
  VectorField v("U", "m/s", g.cell_count());
  for (int c = 0; c < g.cell_count(); ++c) v.values[c] = {c * 0.1, -c * 0.2, 1e-9 * c};
  const auto path = scratch("v.vtk").string();
  write_vtk_vector(path, g, v);
  const auto img = read_vtk(path);
  EXPECT_EQ(img.components, 3);
  for (int c = 0; c < g.cell_count(); ++c) {
    for (int a = 0; a < 3; ++a) EXPECT_EQ(img.values[3 * c + a], v.values[c][a]);
  }
}

TEST(FieldIo, CsvRoundTripAndErrors) {
  const auto g = make_counterflow_grid({});
  const auto f = random_field(g, 6);
  const auto path = scratch("f.csv").string();
  write_field_csv(path, g, f);
  const auto back = read_field_csv(path, g);
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_EQ(back[i], f[i]);
  write_text_file(path, "i,j,k,value\n0,0,0,abc\n");
  EXPECT_THROW(read_field_csv(path, g), InputError);
  EXPECT_THROW(read_vtk(scratch("missing.vtk").string()), InputError);
}

TEST(FieldIo, FiniteChecks) {
  ScalarField f("x", "1", 3);
  EXPECT_TRUE(f.all_finite());
  f[1] = std::nan("");
  EXPECT_FALSE(f.all_finite());
}
