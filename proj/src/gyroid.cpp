#include "tpms/gyroid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tpms/error.hpp"

namespace tpms {

double gyroid(const Vec3& x, double cell_size) {
  const double k = 2.0 * std::numbers::pi / cell_size;
  const double X = k * x[0], Y = k * x[1], Z = k * x[2];
  return std::sin(X) * std::cos(Y) + std::sin(Z) * std::cos(X) + std::sin(Y) * std::cos(Z);
}

Vec3 gyroid_gradient(const Vec3& x, double cell_size) {
  const double k = 2.0 * std::numbers::pi / cell_size;
  const double X = k * x[0], Y = k * x[1], Z = k * x[2];
  const double sx = std::sin(X), cx = std::cos(X);
  const double sy = std::sin(Y), cy = std::cos(Y);
  const double sz = std::sin(Z), cz = std::cos(Z);
  return {k * (cx * cy - sz * sx), k * (-sx * sy + cy * cz), k * (cz * cx - sy * sz)};
}

double OffsetField::at(const Vec3& x) const {
  std::array<int, 3> i0{};
  std::array<double, 3> t{};
  for (int a = 0; a < 3; ++a) {
    double u = (x[a] - origin[a]) / spacing - 0.5;
    u = std::clamp(u, 0.0, static_cast<double>(cells[a] - 1));
    i0[a] = std::min(static_cast<int>(std::floor(u)), std::max(cells[a] - 2, 0));
    t[a] = cells[a] > 1 ? u - i0[a] : 0.0;
  }
  auto val = [&](int di, int dj, int dk) {
    const int i = std::min(i0[0] + di, cells[0] - 1);
    const int j = std::min(i0[1] + dj, cells[1] - 1);
    const int k = std::min(i0[2] + dk, cells[2] - 1);
    return values[i + cells[0] * (j + cells[1] * k)];
  };
  double v = 0.0;
  for (int dk = 0; dk < 2; ++dk) {
    for (int dj = 0; dj < 2; ++dj) {
      for (int di = 0; di < 2; ++di) {
        const double w = (di ? t[0] : 1.0 - t[0]) * (dj ? t[1] : 1.0 - t[1]) *
                         (dk ? t[2] : 1.0 - t[2]);
        if (w != 0.0) v += w * val(di, dj, dk);
      }
    }
  }
  return std::clamp(v, lo, hi);
}

GyroidSpec GyroidSpec::uniform(double cell_size, double c, const Box& box) {
  GyroidSpec s;
  s.cell_size = cell_size;
  s.constant_offset = c;
  s.box = box;
  s.validate();
  return s;
}

GyroidSpec GyroidSpec::unit_cell(double cell_size, double c) {
  return uniform(cell_size, c, Box{{0.0, 0.0, 0.0}, {cell_size, cell_size, cell_size}});
}

GyroidSpec GyroidSpec::with_field(double cell_size, OffsetField field) {
  GyroidSpec s;
  s.cell_size = cell_size;
  for (int a = 0; a < 3; ++a) {
    s.box.lo[a] = field.origin[a];
    s.box.hi[a] = field.origin[a] + field.cells[a] * field.spacing;
  }
  s.graded = std::move(field);
  s.validate();
  return s;
}

double GyroidSpec::solid(const Vec3& x) const {
  return offset_at(x) / cell_size - std::abs(gyroid(x, cell_size));
}

void GyroidSpec::validate() const {
  if (!(cell_size > 0.0)) throw InputError("gyroid cell size must be positive");
  for (int a = 0; a < 3; ++a) {
    if (!(box.hi[a] > box.lo[a])) throw InputError("gyroid box must have positive extent");
  }
  if (graded) {
    const auto& f = *graded;
    const std::size_t n = static_cast<std::size_t>(f.cells[0]) * f.cells[1] * f.cells[2];
    if (f.values.size() != n) throw ContractError("offset field size does not match its cells");
    if (!(f.lo >= 0.0 && f.lo <= f.hi)) throw InputError("offset clamp range is invalid");
  } else if (!(constant_offset >= 0.0)) {
    throw InputError("gyroid offset must be non-negative");
  }
}

Phase phase_at(const Vec3& x, const GyroidSpec& spec) {
  if (spec.g1(x) < 0.0) return Phase::Fluid1;
  if (spec.g2(x) < 0.0) return Phase::Fluid2;
  return Phase::Solid;
}

CellMeasure measure_cell(double c, double cell_size, long samples, int area_resolution) {
  if (samples < 10000) throw InputError("measure_cell needs at least 1e4 samples");
  const GyroidSpec spec = GyroidSpec::unit_cell(cell_size, c);
  const int n = std::max(1, static_cast<int>(std::lround(std::cbrt(static_cast<double>(samples)))));
  const double step = cell_size / n;
  long n1 = 0, n2 = 0;
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        const Vec3 x{(i + 0.5) * step, (j + 0.5) * step, (k + 0.5) * step};
        switch (phase_at(x, spec)) {
          case Phase::Fluid1: ++n1; break;
          case Phase::Fluid2: ++n2; break;
          case Phase::Solid: break;
        }
      }
    }
  }
  CellMeasure m;
  m.samples = static_cast<long>(n) * n * n;
  const double total = static_cast<double>(m.samples);
  m.eps1 = n1 / total;
  m.eps2 = n2 / total;
  m.solid_frac = static_cast<double>(m.samples - n1 - n2) / total;
  const double p = std::max(m.eps1, 1.0 / total);
  m.std_error = std::sqrt(p * (1.0 - p) / total);

  IsoOptions open;
  open.cap = false;
  const std::array<int, 3> res{area_resolution, area_resolution, area_resolution};
  m.area1 = extract_zero_set([&](const Vec3& x) { return spec.g1(x); }, spec.box, res, open).area();
  m.area2 = extract_zero_set([&](const Vec3& x) { return spec.g2(x); }, spec.box, res, open).area();
  return m;
}

bool fluid_connected(double c, double cell_size, int resolution) {
  const int n = resolution;
  const double step = cell_size / n;
  const double level = -c / cell_size;
  std::vector<char> fluid(static_cast<std::size_t>(n) * n * n, 0);
  auto id = [n](int i, int j, int k) { return i + n * (j + n * k); };
  long count = 0;
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        const Vec3 x{(i + 0.5) * step, (j + 0.5) * step, (k + 0.5) * step};
        if (gyroid(x, cell_size) < level) {
          fluid[id(i, j, k)] = 1;
          ++count;
        }
      }
    }
  }
  if (count == 0) return false;
  std::vector<int> stack;
  for (int s = 0; s < n * n * n; ++s) {
    if (!fluid[s]) continue;
    fluid[s] = 2;
    stack.push_back(s);
    break;
  }
  long reached = 0;
  while (!stack.empty()) {
    const int s = stack.back();
    stack.pop_back();
    ++reached;
    const int i = s % n, j = (s / n) % n, k = s / (n * n);
    const int nb[6] = {id((i + 1) % n, j, k), id((i + n - 1) % n, j, k), id(i, (j + 1) % n, k),
                       id(i, (j + n - 1) % n, k), id(i, j, (k + 1) % n), id(i, j, (k + n - 1) % n)};
    for (int q : nb) {
      if (fluid[q] == 1) {
        fluid[q] = 2;
        stack.push_back(q);
      }
    }
  }
  return reached == count;
}

double pinch_off_offset(double cell_size, int resolution) {
  double lo = 0.0;
  double hi = 1.5 * cell_size;
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (fluid_connected(mid, cell_size, resolution)) lo = mid; else hi = mid;
  }
  return lo;
}

TriMesh extract_isosurface(const GyroidSpec& spec, WallSurface which, int voxels_per_cell) {
  if (voxels_per_cell < 8) throw InputError("isosurface resolution must be at least 8 voxels per cell");
  std::array<int, 3> cells{};
  for (int a = 0; a < 3; ++a) {
    cells[a] = std::max(1, static_cast<int>(std::lround((spec.box.hi[a] - spec.box.lo[a]) /
                                                        spec.cell_size * voxels_per_cell)));
  }
  IsoOptions opt;
  opt.label = [which](const Vec3&) {
    return which == WallSurface::G1 ? SurfaceLabel::Fluid1Wall : SurfaceLabel::Fluid2Wall;
  };
  TriMesh mesh = which == WallSurface::G1
                     ? extract_zero_set([&](const Vec3& x) { return spec.g1(x); }, spec.box, cells, opt)
                     : extract_zero_set([&](const Vec3& x) { return spec.g2(x); }, spec.box, cells, opt);
  validate_closed(mesh);
  return mesh;
}

TriMesh extract_wall(const GyroidSpec& spec, int voxels_per_cell) {
  if (voxels_per_cell < 8) throw InputError("isosurface resolution must be at least 8 voxels per cell");
  std::array<int, 3> cells{};
  for (int a = 0; a < 3; ++a) {
    cells[a] = std::max(1, static_cast<int>(std::lround((spec.box.hi[a] - spec.box.lo[a]) /
                                                        spec.cell_size * voxels_per_cell)));
  }
  IsoOptions opt;
  opt.label = [&spec](const Vec3& x) {
    return gyroid(x, spec.cell_size) < 0.0 ? SurfaceLabel::Fluid1Wall : SurfaceLabel::Fluid2Wall;
  };
  TriMesh mesh = extract_zero_set([&](const Vec3& x) { return spec.solid(x); }, spec.box, cells, opt);
  validate_closed(mesh);
  return mesh;
}

}  // namespace tpms
