#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace tpms {

using Vec3 = std::array<double, 3>;

enum class Region : std::uint8_t { Core, Fluid1Plenum, Fluid2Plenum };

/// Domain boundary sides, ordered (axis, low/high).
enum class Side : std::uint8_t { XMin, XMax, YMin, YMax, ZMin, ZMax };

inline int side_axis(Side s) { return static_cast<int>(s) / 2; }
inline bool side_is_high(Side s) { return static_cast<int>(s) % 2 == 1; }
std::string to_string(Side s);
Side side_from_string(const std::string& s);

enum class PatchKind : std::uint8_t { Inlet, Outlet };

/// A set of boundary faces (one per listed cell, on `side`) through which
/// fluid `fluid` (0 or 1) enters or leaves the domain.
struct FacePatch {
  int fluid = 0;
  PatchKind kind = PatchKind::Inlet;
  Side side = Side::XMin;
  std::vector<int> cells;
};

/// Uniform Cartesian cell-centred grid with region and boundary tags.
class StructuredGrid {
 public:
  StructuredGrid() = default;
  StructuredGrid(int nx, int ny, int nz, double h, Region fill = Region::Core);

  int nx() const { return n_[0]; }
  int ny() const { return n_[1]; }
  int nz() const { return n_[2]; }
  int n(int axis) const { return n_[axis]; }
  const std::array<int, 3>& dims() const { return n_; }
  double h() const { return h_; }
  int cell_count() const { return n_[0] * n_[1] * n_[2]; }

  int index(int i, int j, int k) const { return i + n_[0] * (j + n_[1] * k); }
  int index(const std::array<int, 3>& ijk) const { return index(ijk[0], ijk[1], ijk[2]); }
  std::array<int, 3> ijk(int c) const {
    return {c % n_[0], (c / n_[0]) % n_[1], c / (n_[0] * n_[1])};
  }
  bool contains(const std::array<int, 3>& ijk) const {
    return ijk[0] >= 0 && ijk[1] >= 0 && ijk[2] >= 0 && ijk[0] < n_[0] && ijk[1] < n_[1] &&
           ijk[2] < n_[2];
  }
  Vec3 center(int c) const;

  Region region(int c) const { return regions_[c]; }
  void set_region(int c, Region r) { regions_[c] = r; }
  bool is_core(int c) const { return regions_[c] == Region::Core; }
  /// Cells carrying fluid `fluid`: the shared core plus that fluid's plenum.
  bool active(int fluid, int c) const {
    const Region r = regions_[c];
    return r == Region::Core || r == (fluid == 0 ? Region::Fluid1Plenum : Region::Fluid2Plenum);
  }
  std::vector<int> core_cells() const;
  int core_count() const;

  const std::vector<FacePatch>& patches() const { return patches_; }
  void add_patch(FacePatch p) { patches_.push_back(std::move(p)); }

  /// Checks every invariant; throws InputError describing the first violation.
  void validate() const;

  bool operator==(const StructuredGrid& o) const {
    return n_ == o.n_ && h_ == o.h_ && regions_ == o.regions_;
  }

 private:
  std::array<int, 3> n_{0, 0, 0};
  double h_ = 0.0;
  std::vector<Region> regions_;
  std::vector<FacePatch> patches_;
};

/// Cell data on a StructuredGrid.
struct ScalarField {
  std::string name;
  std::string unit;
  std::vector<double> values;

  ScalarField() = default;
  ScalarField(std::string n, std::string u, std::size_t size, double fill = 0.0)
      : name(std::move(n)), unit(std::move(u)), values(size, fill) {}

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  bool all_finite() const;
};

struct VectorField {
  std::string name;
  std::string unit;
  std::vector<Vec3> values;

  VectorField() = default;
  VectorField(std::string n, std::string u, std::size_t size)
      : name(std::move(n)), unit(std::move(u)), values(size, Vec3{0.0, 0.0, 0.0}) {}

  std::size_t size() const { return values.size(); }
  bool all_finite() const;
};

/// Parameters of the two-stream counterflow test bench: a rectangular core
/// with one plenum band below and one above. Each band is split in half
/// across x; fluid 1 enters the lower-left plenum through the x-min face and
/// leaves the upper-right plenum through the x-max face, fluid 2 enters the
/// upper-left plenum and leaves the lower-right one.
struct CounterflowLayout {
  int core_x = 8;
  int core_y = 8;
  int cells_z = 1;
  int plenum_rows = 2;
  double cell_size = 4.6e-3;
};

StructuredGrid make_counterflow_grid(const CounterflowLayout& layout);

/// One-dimensional core-only channel along x with fluid 0 entering at x-min
/// and leaving at x-max; fluid 1 runs the opposite way when `counterflow`.
StructuredGrid make_channel_grid(int n, double h, bool counterflow);

}  // namespace tpms
