#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "oracles.hpp"
#include "tpms/error.hpp"
#include "tpms/gyroid.hpp"
#include "tpms/trimesh.hpp"

using namespace tpms;
namespace fs = std::filesystem;

namespace {

constexpr double kL = 4.6e-3;

fs::path scratch(const std::string& name) {
  const auto d = fs::temp_directory_path() / "tpms_geometry";
  fs::create_directories(d);
  return d / name;
}

}  // namespace

TEST(Gyroid, KnownValuesAndSymmetry) {
  EXPECT_NEAR(gyroid({0, 0, 0}, kL), 0.0, 1e-15);
  EXPECT_NEAR(gyroid({kL / 4, 0, 0}, kL), 1.0, 1e-15);
  for (const Vec3 x : {Vec3{1e-4, 7e-4, 2e-3}, Vec3{3.3e-3, 1.2e-3, 4.0e-3}}) {
    EXPECT_NEAR(gyroid({x[0] + kL, x[1] - kL, x[2] + 2 * kL}, kL), gyroid(x, kL), 1e-12);
    // Point reflection flips the sign.
    EXPECT_NEAR(gyroid({-x[0], -x[1], -x[2]}, kL), -gyroid(x, kL), 1e-15);
  }
}

TEST(Gyroid, GradientMatchesCentralDifference) {
  const Vec3 x{1.1e-3, 2.7e-3, 0.4e-3};
  const auto g = gyroid_gradient(x, kL);
  for (int a = 0; a < 3; ++a) {
    const double fd = oracle::central_difference(
        [&](double t) {
          Vec3 y = x;
          y[a] = t;
          return gyroid(y, kL);
        },
        x[a], 1e-8);
    EXPECT_NEAR(g[a], fd, 1e-5 * std::abs(g[a]) + 1e-3);
  }
}

TEST(Gyroid, PhasesPartitionTheCell) {
  const auto m = measure_cell(0.0, kL, 262144, 24);
  EXPECT_NEAR(m.eps1, 0.5, 0.005);
  EXPECT_NEAR(m.eps2, 0.5, 0.005);
  EXPECT_NEAR(m.eps1 + m.eps2 + m.solid_frac, 1.0, 1e-12);
  EXPECT_GT(m.std_error, 0.0);
  const auto thick = measure_cell(2.5e-3, kL, 262144, 24);
  EXPECT_LT(thick.eps1, m.eps1);
  EXPECT_NEAR(thick.eps1, thick.eps2, 0.01);
  EXPECT_GT(thick.area1, 0.0);
  EXPECT_THROW(measure_cell(0.0, kL, 100), InputError);
}

TEST(Gyroid, PorosityFallsWithOffset) {
  double prev = 1.0 + 1e-12;
  for (double c : {0.0, 1.0e-3, 2.0e-3, 3.0e-3}) {
    const auto m = measure_cell(c, kL, 32768, 16);
    EXPECT_LT(m.eps1 + m.eps2, prev);
    prev = m.eps1 + m.eps2;
  }
}

TEST(Gyroid, PinchOffBoundsTheDesignRange) {
  const double c = pinch_off_offset(kL, 32);
  EXPECT_GT(c, 3.75e-3);
  EXPECT_LT(c, 1.5 * kL);
  EXPECT_TRUE(fluid_connected(0.5 * c, kL, 32));
  EXPECT_FALSE(fluid_connected(1.2 * c, kL, 32));
}

TEST(Gyroid, OffsetFieldInterpolatesAndClamps) {
  OffsetField f;
  f.cells = {2, 1, 1};
  f.spacing = 1.0;
  f.values = {1.0, 3.0};
  f.lo = 0.0;
  f.hi = 2.5;
  EXPECT_DOUBLE_EQ(f.at({0.5, 0.5, 0.5}), 1.0);
  EXPECT_DOUBLE_EQ(f.at({1.0, 0.5, 0.5}), 2.0);
  EXPECT_DOUBLE_EQ(f.at({1.5, 0.5, 0.5}), 2.5);
  EXPECT_DOUBLE_EQ(f.at({-3.0, 0.5, 0.5}), 1.0);
}

TEST(Mesh, BoxIsClosedWithEulerTwo) {
  auto m = box_mesh(Box{{0, 0, 0}, {1, 2, 3}}, SurfaceLabel::Cap);
  EXPECT_TRUE(is_closed_manifold(m));
  EXPECT_EQ(euler_characteristic(m), 2);
  EXPECT_NEAR(m.area(), 2 * (2 + 3 + 6), 1e-12);
}

TEST(Mesh, BoxUnionSharesFaces) {
  // Three boxes: two touching along a face and one overlapping across both.
  const std::vector<Box> boxes{Box{{0, 0, 0}, {1, 1, 1}}, Box{{1, 0, 0}, {2, 1, 1}},
                               Box{{0.5, 0.25, 0.25}, {1.5, 2.0, 0.75}}};
  auto m = box_union_mesh(boxes, SurfaceLabel::Partition);
  EXPECT_TRUE(is_closed_manifold(m));
  EXPECT_EQ(euler_characteristic(m), 2);
  const auto path = scratch("union.stl").string();
  export_stl(m, path, true);
  EXPECT_TRUE(oracle::check_stl(path).closed());
}

TEST(Mesh, OpenSurfaceIsRejected) {
  auto m = box_mesh(Box{}, SurfaceLabel::Cap);
  m.triangles.pop_back();
  m.labels.pop_back();
  EXPECT_FALSE(is_closed_manifold(m));
  EXPECT_THROW(validate_closed(m), MeshError);
  EXPECT_THROW(export_stl(m, scratch("open.stl").string(), true), MeshError);
}

TEST(Mesh, SphereIsosurfaceAreaAndClosure) {
  const double r = 0.4;
  IsoOptions opt;
  auto m = extract_zero_set([&](const Vec3& x) { return r * r - (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]); },
                            Box{{-0.5, -0.5, -0.5}, {0.5, 0.5, 0.5}}, {40, 40, 40}, opt);
  EXPECT_TRUE(is_closed_manifold(m));
  EXPECT_EQ(euler_characteristic(m), 2);
  EXPECT_NEAR(m.area(), 4 * std::numbers::pi * r * r, 0.01 * 4 * std::numbers::pi * r * r);
}

TEST(Mesh, GyroidWallIsWatertightAfterStlRoundTrip) {
  const auto spec = GyroidSpec::unit_cell(kL, 2.0e-3);
  const auto wall = extract_wall(spec, 16);
  EXPECT_TRUE(wall.watertight);
  EXPECT_GT(wall.area(SurfaceLabel::Fluid1Wall), 0.0);
  EXPECT_NEAR(wall.area(SurfaceLabel::Fluid1Wall), wall.area(SurfaceLabel::Fluid2Wall),
              0.05 * wall.area(SurfaceLabel::Fluid1Wall));
  const auto path = scratch("wall.stl").string();
  export_stl(wall, path, true);
  const auto check = oracle::check_stl(path);
  EXPECT_TRUE(check.closed()) << check.bad_edges << " bad edges";
  EXPECT_EQ(check.facets, static_cast<long>(wall.triangles.size()));
  const auto facets = read_stl(path);
  ASSERT_EQ(facets.size(), wall.triangles.size());
  EXPECT_FLOAT_EQ(facets[0].v[0][0], static_cast<float>(wall.vertices[wall.triangles[0][0]][0]));
}

TEST(Mesh, IsosurfaceResolutionFloor) {
  EXPECT_THROW(extract_wall(GyroidSpec::unit_cell(kL, 2e-3), 4), InputError);
  EXPECT_THROW(GyroidSpec::unit_cell(-1.0, 0.0), InputError);
}

TEST(Mesh, RayCastChordOfASlab) {
  // A box of height 0.3 seen by vertical rays: every chord equals 0.3.
  auto m = box_mesh(Box{{0, 0, 0.2}, {1, 1, 0.5}}, SurfaceLabel::Cap);
  const auto path = scratch("slab.stl").string();
  export_stl(m, path, true);
  oracle::ZRayCaster rc(path, 8);
  EXPECT_NEAR(oracle::mean_chord(rc, 0.1, 0.9, 0.1, 0.9, 5), 0.3, 1e-6);
}

TEST(Oracle, SpearmanHandlesTies) {
  EXPECT_NEAR(oracle::spearman({1, 2, 3, 4}, {10, 20, 30, 40}), 1.0, 1e-15);
  EXPECT_NEAR(oracle::spearman({1, 2, 3, 4}, {4, 3, 2, 1}), -1.0, 1e-15);
  // Ranks {1.5, 1.5, 3, 4} vs {1, 2, 3, 4}.
  EXPECT_NEAR(oracle::spearman({5, 5, 6, 7}, {1, 2, 3, 4}), 0.9486832980505138, 1e-12);
}
