#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "tpms/grid.hpp"
#include "tpms/trimesh.hpp"

namespace tpms {

/// Unit-amplitude gyroid function sinX cosY + sinZ cosX + sinY cosZ with
/// X = 2*pi*x/L (and likewise Y, Z).
double gyroid(const Vec3& x, double cell_size);
/// Its spatial gradient [1/m].
Vec3 gyroid_gradient(const Vec3& x, double cell_size);

/// Cell-centred level-set offsets on a uniform block, interpolated
/// trilinearly and clamped to [lo, hi].
struct OffsetField {
  std::array<int, 3> cells{1, 1, 1};
  Vec3 origin{0.0, 0.0, 0.0};  ///< corner of cell (0,0,0)
  double spacing = 1.0;
  std::vector<double> values;  ///< x fastest
  double lo = 0.0;
  double hi = 1.0;

  double at(const Vec3& x) const;
};

enum class Phase { Solid, Fluid1, Fluid2 };
enum class WallSurface { G1, G2 };

/// Gyroid with a constant or graded offset inside an axis-aligned box.
struct GyroidSpec {
  double cell_size = 4.6e-3;
  double constant_offset = 0.0;
  std::optional<OffsetField> graded;
  Box box;

  static GyroidSpec uniform(double cell_size, double c, const Box& box);
  /// Box of one unit cell at the origin.
  static GyroidSpec unit_cell(double cell_size, double c);
  static GyroidSpec with_field(double cell_size, OffsetField field);

  double offset_at(const Vec3& x) const {
    return graded ? graded->at(x) : constant_offset;
  }
  /// c/L + g
  double g1(const Vec3& x) const { return offset_at(x) / cell_size + gyroid(x, cell_size); }
  /// c/L - g
  double g2(const Vec3& x) const { return offset_at(x) / cell_size - gyroid(x, cell_size); }
  /// Non-negative inside the solid wall.
  double solid(const Vec3& x) const;
  void validate() const;
};

Phase phase_at(const Vec3& x, const GyroidSpec& spec);

struct CellMeasure {
  double eps1 = 0.0;
  double eps2 = 0.0;
  double solid_frac = 0.0;
  double area1 = 0.0;  ///< wall area facing fluid 1 [m^2]
  double area2 = 0.0;
  /// Binomial standard error of each volume fraction.
  double std_error = 0.0;
  long samples = 0;
};

/// Volume fractions of one unit cell at constant offset `c` by midpoint
/// sampling on round(cbrt(samples))^3 points, and wall areas from isosurfaces
/// at `area_resolution` voxels per cell.
CellMeasure measure_cell(double c, double cell_size, long samples = 262144,
                         int area_resolution = 64);

/// True when the fluid-1 voxels of a unit cell at offset `c` form a single
/// periodic component (fluid 2 is congruent).
bool fluid_connected(double c, double cell_size, int resolution = 48);
/// Largest offset at which the fluid phases stay connected, by bisection.
double pinch_off_offset(double cell_size, int resolution = 48);

/// Closed surface bounding {G1 >= 0} or {G2 >= 0} in the box of `spec`, capped
/// on the box faces.
TriMesh extract_isosurface(const GyroidSpec& spec, WallSurface which, int voxels_per_cell);
/// Closed surface of the solid wall in the box of `spec`; non-cap triangles are
/// labelled by the fluid they face.
TriMesh extract_wall(const GyroidSpec& spec, int voxels_per_cell);

}  // namespace tpms
