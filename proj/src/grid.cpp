#include "tpms/grid.hpp"

#include <cmath>
#include <queue>

#include "tpms/error.hpp"

namespace tpms {

std::string to_string(Side s) {
  static const char* names[] = {"xmin", "xmax", "ymin", "ymax", "zmin", "zmax"};
  return names[static_cast<int>(s)];
}

Side side_from_string(const std::string& s) {
  for (int i = 0; i < 6; ++i) {
    if (to_string(static_cast<Side>(i)) == s) return static_cast<Side>(i);
  }
  throw InputError("unknown boundary side '" + s + "'");
}

StructuredGrid::StructuredGrid(int nx, int ny, int nz, double h, Region fill)
    : n_{nx, ny, nz}, h_(h) {
  if (nx < 1 || ny < 1 || nz < 1) throw InputError("grid cell counts must be >= 1");
  if (!(h > 0.0) || !std::isfinite(h)) throw InputError("grid cell size must be positive");
  regions_.assign(static_cast<std::size_t>(nx) * ny * nz, fill);
}

Vec3 StructuredGrid::center(int c) const {
  const auto p = ijk(c);
  return {(p[0] + 0.5) * h_, (p[1] + 0.5) * h_, (p[2] + 0.5) * h_};
}

std::vector<int> StructuredGrid::core_cells() const {
  std::vector<int> out;
  for (int c = 0; c < cell_count(); ++c) {
    if (is_core(c)) out.push_back(c);
  }
  return out;
}

int StructuredGrid::core_count() const {
  int count = 0;
  for (Region r : regions_) count += r == Region::Core ? 1 : 0;
  return count;
}

void StructuredGrid::validate() const {
  if (n_[0] < 1 || n_[1] < 1 || n_[2] < 1) throw InputError("grid cell counts must be >= 1");
  if (!(h_ > 0.0)) throw InputError("grid cell size must be positive");

  std::array<int, 2> inlets{0, 0};
  std::array<int, 2> outlets{0, 0};
  for (const auto& p : patches_) {
    if (p.fluid != 0 && p.fluid != 1) throw InputError("patch fluid index must be 0 or 1");
    const int axis = side_axis(p.side);
    const int boundary = side_is_high(p.side) ? n_[axis] - 1 : 0;
    for (int c : p.cells) {
      if (c < 0 || c >= cell_count()) throw InputError("patch cell index out of range");
      if (ijk(c)[axis] != boundary) {
        throw InputError("patch face on side " + to_string(p.side) +
                         " does not lie on the domain boundary");
      }
      if (!active(p.fluid, c)) throw InputError("patch cell is not open to its fluid");
    }
    if (!p.cells.empty()) {
      (p.kind == PatchKind::Inlet ? inlets : outlets)[p.fluid] += 1;
    }
  }
  for (int f = 0; f < 2; ++f) {
    if (inlets[f] == 0 || outlets[f] == 0) {
      throw InputError("fluid " + std::to_string(f + 1) + " needs at least one inlet and one outlet");
    }
  }

  const auto core = core_cells();
  if (core.empty()) throw InputError("grid has no core cells");
  std::vector<char> seen(cell_count(), 0);
  std::queue<int> todo;
  todo.push(core.front());
  seen[core.front()] = 1;
  std::size_t reached = 0;
  while (!todo.empty()) {
    const int c = todo.front();
    todo.pop();
    ++reached;
    const auto p = ijk(c);
    for (int axis = 0; axis < 3; ++axis) {
      for (int dir : {-1, 1}) {
        auto q = p;
        q[axis] += dir;
        if (!contains(q)) continue;
        const int nb = index(q);
        if (!seen[nb] && is_core(nb)) {
          seen[nb] = 1;
          todo.push(nb);
        }
      }
    }
  }
  if (reached != core.size()) throw InputError("core cells do not form a single connected block");
}

bool ScalarField::all_finite() const {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

bool VectorField::all_finite() const {
  for (const auto& v : values) {
    if (!std::isfinite(v[0]) || !std::isfinite(v[1]) || !std::isfinite(v[2])) return false;
  }
  return true;
}

StructuredGrid make_counterflow_grid(const CounterflowLayout& layout) {
  if (layout.core_x < 2 || layout.core_y < 1 || layout.plenum_rows < 1) {
    throw InputError("counterflow layout needs core_x >= 2, core_y >= 1 and plenum_rows >= 1");
  }
  const int nx = layout.core_x;
  const int ny = layout.core_y + 2 * layout.plenum_rows;
  const int nz = layout.cells_z;
  StructuredGrid grid(nx, ny, nz, layout.cell_size);
  const int half = nx / 2;
  FacePatch in1{0, PatchKind::Inlet, Side::XMin, {}};
  FacePatch out1{0, PatchKind::Outlet, Side::XMax, {}};
  FacePatch in2{1, PatchKind::Inlet, Side::XMin, {}};
  FacePatch out2{1, PatchKind::Outlet, Side::XMax, {}};
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      const bool bottom = j < layout.plenum_rows;
      const bool top = j >= layout.plenum_rows + layout.core_y;
      for (int i = 0; i < nx; ++i) {
        const int c = grid.index(i, j, k);
        const bool left = i < half;
        if (bottom) {
          grid.set_region(c, left ? Region::Fluid1Plenum : Region::Fluid2Plenum);
        } else if (top) {
          grid.set_region(c, left ? Region::Fluid2Plenum : Region::Fluid1Plenum);
        }
      }
      if (bottom) {
        in1.cells.push_back(grid.index(0, j, k));
        out2.cells.push_back(grid.index(nx - 1, j, k));
      } else if (top) {
        in2.cells.push_back(grid.index(0, j, k));
        out1.cells.push_back(grid.index(nx - 1, j, k));
      }
    }
  }
  grid.add_patch(std::move(in1));
  grid.add_patch(std::move(out1));
  grid.add_patch(std::move(in2));
  grid.add_patch(std::move(out2));
  grid.validate();
  return grid;
}

StructuredGrid make_channel_grid(int n, double h, bool counterflow) {
  StructuredGrid grid(n, 1, 1, h);
  grid.add_patch({0, PatchKind::Inlet, Side::XMin, {0}});
  grid.add_patch({0, PatchKind::Outlet, Side::XMax, {n - 1}});
  if (counterflow) {
    grid.add_patch({1, PatchKind::Inlet, Side::XMax, {n - 1}});
    grid.add_patch({1, PatchKind::Outlet, Side::XMin, {0}});
  } else {
    grid.add_patch({1, PatchKind::Inlet, Side::XMin, {0}});
    grid.add_patch({1, PatchKind::Outlet, Side::XMax, {n - 1}});
  }
  grid.validate();
  return grid;
}

}  // namespace tpms
