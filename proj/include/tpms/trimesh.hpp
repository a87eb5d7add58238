#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tpms/grid.hpp"

namespace tpms {

enum class SurfaceLabel : std::uint8_t { Fluid1Wall, Fluid2Wall, Cap, Partition };

/// Indexed triangle surface mesh.
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<SurfaceLabel> labels;  ///< one per triangle
  bool watertight = false;           ///< set by validate_closed()

  double area() const;
  double area(SurfaceLabel label) const;
  double min_triangle_area() const;
  /// Appends another mesh as an independent shell.
  void append(const TriMesh& other);
};

/// Edge-manifold check: every undirected edge is used by exactly two
/// triangles and each directed edge exactly once (consistent winding).
bool is_closed_manifold(const TriMesh& mesh);
/// Sets `watertight` or throws MeshError naming the first bad edge.
void validate_closed(TriMesh& mesh);
/// V - E + F on the vertex/edge/face graph.
long euler_characteristic(const TriMesh& mesh);

/// Axis-aligned box bounded by `lo`/`hi`.
struct Box {
  Vec3 lo{0.0, 0.0, 0.0};
  Vec3 hi{1.0, 1.0, 1.0};
};

struct IsoOptions {
  /// Close the region with caps on the box faces.
  bool cap = true;
  /// Label assigned to a non-cap triangle from its centroid.
  std::function<SurfaceLabel(const Vec3&)> label;
};

/// Triangulates the boundary of {x in box : f(x) >= 0} by marching
/// tetrahedra on `cells` voxels per axis (Freudenthal six-tetrahedron split of
/// every voxel, shared-edge vertex welding). Triangles are wound
/// counter-clockwise seen from outside the region.
TriMesh extract_zero_set(const std::function<double(const Vec3&)>& f, const Box& box,
                         const std::array<int, 3>& cells, const IsoOptions& options);

/// Closed box with outward winding.
TriMesh box_mesh(const Box& box, SurfaceLabel label);
/// Closed surface of the union of boxes, built on the lattice of their
/// corner coordinates so that touching or overlapping boxes share faces.
TriMesh box_union_mesh(const std::vector<Box>& boxes, SurfaceLabel label);

/// Binary STL: 80-byte header, uint32 count, 50 bytes per facet,
/// little-endian, facet normal recomputed from the winding.
void export_stl(const TriMesh& mesh, const std::string& path, bool require_watertight = false);

struct StlFacet {
  std::array<float, 3> normal;
  std::array<std::array<float, 3>, 3> v;
};
std::vector<StlFacet> read_stl(const std::string& path);

/// ASCII VTK POLYDATA with a per-triangle label array.
void export_vtk_polydata(const TriMesh& mesh, const std::string& path);

}  // namespace tpms
