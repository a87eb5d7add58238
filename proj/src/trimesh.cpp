#include "tpms/trimesh.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <unordered_map>

#include "tpms/error.hpp"
#include "tpms/field_io.hpp"

namespace tpms {
namespace {

Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

double triangle_area(const TriMesh& m, const std::array<int, 3>& t) {
  const auto& a = m.vertices[t[0]];
  return 0.5 * norm(cross(sub(m.vertices[t[1]], a), sub(m.vertices[t[2]], a)));
}

std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

// Interpolation parameters are kept away from the voxel corners so no
// triangle collapses onto a grid node.
constexpr double kEdgeClamp = 1e-2;
// Cap layer thickness as a fraction of the voxel size.
constexpr double kCapOffset = 2e-2;

}  // namespace

double TriMesh::area() const {
  double a = 0.0;
  for (const auto& t : triangles) a += triangle_area(*this, t);
  return a;
}

double TriMesh::area(SurfaceLabel label) const {
  double a = 0.0;
  for (std::size_t i = 0; i < triangles.size(); ++i) {
    if (labels[i] == label) a += triangle_area(*this, triangles[i]);
  }
  return a;
}

double TriMesh::min_triangle_area() const {
  double a = INFINITY;
  for (const auto& t : triangles) a = std::min(a, triangle_area(*this, t));
  return a;
}

void TriMesh::append(const TriMesh& other) {
  const int offset = static_cast<int>(vertices.size());
  vertices.insert(vertices.end(), other.vertices.begin(), other.vertices.end());
  for (const auto& t : other.triangles) {
    triangles.push_back({t[0] + offset, t[1] + offset, t[2] + offset});
  }
  labels.insert(labels.end(), other.labels.begin(), other.labels.end());
  watertight = watertight && other.watertight;
}

namespace {

// Returns an empty string when closed, otherwise a description of a bad edge.
std::string find_open_edge(const TriMesh& mesh) {
  std::unordered_map<std::uint64_t, int> undirected;
  std::unordered_map<std::uint64_t, int> directed;
  undirected.reserve(mesh.triangles.size() * 3);
  directed.reserve(mesh.triangles.size() * 3);
  for (const auto& t : mesh.triangles) {
    for (int e = 0; e < 3; ++e) {
      const int a = t[e];
      const int b = t[(e + 1) % 3];
      if (a == b) return "triangle with repeated vertex " + std::to_string(a);
      undirected[edge_key(a, b)] += 1;
      directed[(static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
               static_cast<std::uint32_t>(b)] += 1;
    }
  }
  for (const auto& [key, count] : undirected) {
    if (count != 2) {
      return "edge (" + std::to_string(key >> 32) + "," + std::to_string(key & 0xffffffffu) +
             ") is used by " + std::to_string(count) + " triangles";
    }
  }
  for (const auto& [key, count] : directed) {
    if (count != 1) return "inconsistent winding on edge " + std::to_string(key >> 32);
  }
  return {};
}

}  // namespace

bool is_closed_manifold(const TriMesh& mesh) {
  return !mesh.triangles.empty() && find_open_edge(mesh).empty();
}

void validate_closed(TriMesh& mesh) {
  if (mesh.triangles.empty()) throw MeshError("mesh is empty");
  const auto why = find_open_edge(mesh);
  if (!why.empty()) {
    mesh.watertight = false;
    throw MeshError("mesh is not watertight: " + why);
  }
  mesh.watertight = true;
}

long euler_characteristic(const TriMesh& mesh) {
  std::unordered_map<std::uint64_t, int> edges;
  std::vector<char> used(mesh.vertices.size(), 0);
  for (const auto& t : mesh.triangles) {
    for (int e = 0; e < 3; ++e) {
      edges[edge_key(t[e], t[(e + 1) % 3])] = 1;
      used[t[e]] = 1;
    }
  }
  const long v = std::count(used.begin(), used.end(), 1);
  return v - static_cast<long>(edges.size()) + static_cast<long>(mesh.triangles.size());
}

TriMesh extract_zero_set(const std::function<double(const Vec3&)>& f, const Box& box,
                         const std::array<int, 3>& cells, const IsoOptions& options) {
  for (int a = 0; a < 3; ++a) {
    if (cells[a] < 1) throw InputError("isosurface resolution must be >= 1 per axis");
  }
  // Node coordinates per axis, with an extra thin layer outside each face
  // when capping; those nodes carry a negative value.
  std::array<std::vector<double>, 3> coords;
  std::array<int, 3> pad_lo{0, 0, 0};
  for (int a = 0; a < 3; ++a) {
    const double h = (box.hi[a] - box.lo[a]) / cells[a];
    if (options.cap) coords[a].push_back(box.lo[a] - kCapOffset * h);
    for (int i = 0; i <= cells[a]; ++i) {
      coords[a].push_back(i == cells[a] ? box.hi[a] : box.lo[a] + i * h);
    }
    if (options.cap) coords[a].push_back(box.hi[a] + kCapOffset * h);
    pad_lo[a] = options.cap ? 1 : 0;
  }
  const std::array<int, 3> nn{static_cast<int>(coords[0].size()),
                              static_cast<int>(coords[1].size()),
                              static_cast<int>(coords[2].size())};
  auto node_id = [&](int i, int j, int k) { return i + nn[0] * (j + nn[1] * k); };
  auto node_pos = [&](int id) {
    const int i = id % nn[0];
    const int j = (id / nn[0]) % nn[1];
    const int k = id / (nn[0] * nn[1]);
    return Vec3{coords[0][i], coords[1][j], coords[2][k]};
  };
  auto is_pad = [&](int i, int j, int k) {
    if (!options.cap) return false;
    return i == 0 || j == 0 || k == 0 || i == nn[0] - 1 || j == nn[1] - 1 || k == nn[2] - 1;
  };

  std::vector<double> value(static_cast<std::size_t>(nn[0]) * nn[1] * nn[2]);
  for (int k = 0; k < nn[2]; ++k) {
    for (int j = 0; j < nn[1]; ++j) {
      for (int i = 0; i < nn[0]; ++i) {
        const int id = node_id(i, j, k);
        value[id] = is_pad(i, j, k) ? -1.0 : f(node_pos(id));
      }
    }
  }

  TriMesh mesh;
  std::unordered_map<std::uint64_t, int> edge_vertex;
  auto vertex_on = [&](int a, int b) {
    const auto key = edge_key(a, b);
    auto it = edge_vertex.find(key);
    if (it != edge_vertex.end()) return it->second;
    const int lo = std::min(a, b);
    const int hi = std::max(a, b);
    double t = value[lo] / (value[lo] - value[hi]);
    t = std::clamp(t, kEdgeClamp, 1.0 - kEdgeClamp);
    const Vec3 p = node_pos(lo);
    const Vec3 q = node_pos(hi);
    const int idx = static_cast<int>(mesh.vertices.size());
    mesh.vertices.push_back({p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]),
                             p[2] + t * (q[2] - p[2])});
    edge_vertex.emplace(key, idx);
    return idx;
  };

  static const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (int k = 0; k + 1 < nn[2]; ++k) {
    for (int j = 0; j + 1 < nn[1]; ++j) {
      for (int i = 0; i + 1 < nn[0]; ++i) {
        const bool pad_voxel = options.cap && (i == 0 || j == 0 || k == 0 || i == nn[0] - 2 ||
                                               j == nn[1] - 2 || k == nn[2] - 2);
        for (const auto& perm : perms) {
          std::array<int, 3> q{i, j, k};
          std::array<int, 4> tet{};
          tet[0] = node_id(q[0], q[1], q[2]);
          for (int s = 0; s < 3; ++s) {
            q[perm[s]] += 1;
            tet[s + 1] = node_id(q[0], q[1], q[2]);
          }
          std::array<int, 4> in{}, out{};
          int n_in = 0, n_out = 0;
          for (int v : tet) {
            if (value[v] >= 0.0) in[n_in++] = v; else out[n_out++] = v;
          }
          if (n_in == 0 || n_out == 0) continue;

          std::array<std::array<int, 3>, 2> tris{};
          int n_tris = 0;
          if (n_in == 1) {
            tris[n_tris++] = {vertex_on(in[0], out[0]), vertex_on(in[0], out[1]),
                              vertex_on(in[0], out[2])};
          } else if (n_in == 3) {
            tris[n_tris++] = {vertex_on(out[0], in[0]), vertex_on(out[0], in[1]),
                              vertex_on(out[0], in[2])};
          } else {
            const int ac = vertex_on(in[0], out[0]);
            const int ad = vertex_on(in[0], out[1]);
            const int bd = vertex_on(in[1], out[1]);
            const int bc = vertex_on(in[1], out[0]);
            tris[n_tris++] = {ac, ad, bd};
            tris[n_tris++] = {ac, bd, bc};
          }
          Vec3 cin{0, 0, 0}, cout{0, 0, 0};
          for (int s = 0; s < n_in; ++s) {
            const auto p = node_pos(in[s]);
            for (int a = 0; a < 3; ++a) cin[a] += p[a] / n_in;
          }
          for (int s = 0; s < n_out; ++s) {
            const auto p = node_pos(out[s]);
            for (int a = 0; a < 3; ++a) cout[a] += p[a] / n_out;
          }
          const Vec3 outward = sub(cout, cin);
          for (int t = 0; t < n_tris; ++t) {
            auto tri = tris[t];
            const auto& p0 = mesh.vertices[tri[0]];
            const Vec3 nrm = cross(sub(mesh.vertices[tri[1]], p0), sub(mesh.vertices[tri[2]], p0));
            if (dot(nrm, outward) < 0.0) std::swap(tri[1], tri[2]);
            mesh.triangles.push_back(tri);
            SurfaceLabel label = SurfaceLabel::Fluid1Wall;
            if (pad_voxel) {
              label = SurfaceLabel::Cap;
            } else if (options.label) {
              const auto& a = mesh.vertices[tri[0]];
              const auto& b = mesh.vertices[tri[1]];
              const auto& c = mesh.vertices[tri[2]];
              label = options.label(
                  {(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0, (a[2] + b[2] + c[2]) / 3.0});
            }
            mesh.labels.push_back(label);
          }
        }
      }
    }
  }
  (void)pad_lo;
  return mesh;
}

TriMesh box_mesh(const Box& box, SurfaceLabel label) {
  TriMesh m;
  for (int c = 0; c < 8; ++c) {
    m.vertices.push_back({(c & 1) ? box.hi[0] : box.lo[0], (c & 2) ? box.hi[1] : box.lo[1],
                          (c & 4) ? box.hi[2] : box.lo[2]});
  }
  // Quads listed counter-clockwise seen from outside.
  const int quads[6][4] = {{0, 4, 6, 2}, {1, 3, 7, 5}, {0, 1, 5, 4},
                           {2, 6, 7, 3}, {0, 2, 3, 1}, {4, 5, 7, 6}};
  for (const auto& q : quads) {
    m.triangles.push_back({q[0], q[1], q[2]});
    m.triangles.push_back({q[0], q[2], q[3]});
    m.labels.push_back(label);
    m.labels.push_back(label);
  }
  m.watertight = true;
  return m;
}

TriMesh box_union_mesh(const std::vector<Box>& boxes, SurfaceLabel label) {
  TriMesh m;
  if (boxes.empty()) return m;
  std::array<std::vector<double>, 3> axis;
  for (const auto& b : boxes) {
    for (int a = 0; a < 3; ++a) {
      axis[a].push_back(b.lo[a]);
      axis[a].push_back(b.hi[a]);
    }
  }
  for (auto& v : axis) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  const std::array<int, 3> n{static_cast<int>(axis[0].size()) - 1, static_cast<int>(axis[1].size()) - 1,
                             static_cast<int>(axis[2].size()) - 1};
  auto voxel = [&](int i, int j, int k) { return i + n[0] * (j + n[1] * k); };
  std::vector<char> full(static_cast<std::size_t>(n[0]) * n[1] * n[2], 0);
  for (const auto& b : boxes) {
    std::array<int, 3> lo{}, hi{};
    for (int a = 0; a < 3; ++a) {
      lo[a] = static_cast<int>(std::lower_bound(axis[a].begin(), axis[a].end(), b.lo[a]) - axis[a].begin());
      hi[a] = static_cast<int>(std::lower_bound(axis[a].begin(), axis[a].end(), b.hi[a]) - axis[a].begin());
    }
    for (int k = lo[2]; k < hi[2]; ++k)
      for (int j = lo[1]; j < hi[1]; ++j)
        for (int i = lo[0]; i < hi[0]; ++i) full[voxel(i, j, k)] = 1;
  }
  auto filled = [&](int i, int j, int k) {
    if (i < 0 || j < 0 || k < 0 || i >= n[0] || j >= n[1] || k >= n[2]) return false;
    return full[voxel(i, j, k)] != 0;
  };
  std::unordered_map<std::uint64_t, int> node;
  auto vid = [&](int i, int j, int k) {
    const std::uint64_t key = static_cast<std::uint64_t>(i) +
                              (n[0] + 1ull) * (static_cast<std::uint64_t>(j) + (n[1] + 1ull) * k);
    auto it = node.find(key);
    if (it != node.end()) return it->second;
    const int id = static_cast<int>(m.vertices.size());
    m.vertices.push_back({axis[0][i], axis[1][j], axis[2][k]});
    node.emplace(key, id);
    return id;
  };
  // Same corner numbering and face winding as box_mesh.
  const int quads[6][4] = {{0, 4, 6, 2}, {1, 3, 7, 5}, {0, 1, 5, 4},
                           {2, 6, 7, 3}, {0, 2, 3, 1}, {4, 5, 7, 6}};
  const int step[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}};
  for (int k = 0; k < n[2]; ++k) {
    for (int j = 0; j < n[1]; ++j) {
      for (int i = 0; i < n[0]; ++i) {
        if (!full[voxel(i, j, k)]) continue;
        for (int f = 0; f < 6; ++f) {
          if (filled(i + step[f][0], j + step[f][1], k + step[f][2])) continue;
          int v[4];
          for (int c = 0; c < 4; ++c) {
            const int corner = quads[f][c];
            v[c] = vid(i + (corner & 1), j + ((corner >> 1) & 1), k + ((corner >> 2) & 1));
          }
          m.triangles.push_back({v[0], v[1], v[2]});
          m.triangles.push_back({v[0], v[2], v[3]});
          m.labels.push_back(label);
          m.labels.push_back(label);
        }
      }
    }
  }
  return m;
}

void export_stl(const TriMesh& mesh, const std::string& path, bool require_watertight) {
  static_assert(std::endian::native == std::endian::little, "STL writer assumes little-endian");
  if (require_watertight) {
    TriMesh copy = mesh;
    validate_closed(copy);
  }
  std::string buf(80, '\0');
  const std::string header = "tpmsopt binary STL";
  std::memcpy(buf.data(), header.data(), header.size());
  const auto count = static_cast<std::uint32_t>(mesh.triangles.size());
  buf.append(reinterpret_cast<const char*>(&count), 4);
  for (const auto& t : mesh.triangles) {
    const auto& a = mesh.vertices[t[0]];
    Vec3 n = cross(sub(mesh.vertices[t[1]], a), sub(mesh.vertices[t[2]], a));
    const double len = norm(n);
    if (len > 0.0) {
      for (double& x : n) x /= len;
    }
    float rec[12];
    for (int i = 0; i < 3; ++i) rec[i] = static_cast<float>(n[i]);
    for (int v = 0; v < 3; ++v) {
      for (int i = 0; i < 3; ++i) rec[3 + 3 * v + i] = static_cast<float>(mesh.vertices[t[v]][i]);
    }
    buf.append(reinterpret_cast<const char*>(rec), sizeof(rec));
    const std::uint16_t attr = 0;
    buf.append(reinterpret_cast<const char*>(&attr), 2);
  }
  write_text_file(path, buf);
}

std::vector<StlFacet> read_stl(const std::string& path) {
  const std::string data = read_text_file(path);
  if (data.size() < 84) throw InputError("'" + path + "' is too short for binary STL");
  std::uint32_t count = 0;
  std::memcpy(&count, data.data() + 80, 4);
  if (data.size() != 84 + 50ull * count) throw InputError("'" + path + "' has an inconsistent facet count");
  std::vector<StlFacet> facets(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const char* p = data.data() + 84 + 50ull * i;
    float rec[12];
    std::memcpy(rec, p, sizeof(rec));
    for (int a = 0; a < 3; ++a) facets[i].normal[a] = rec[a];
    for (int v = 0; v < 3; ++v) {
      for (int a = 0; a < 3; ++a) facets[i].v[v][a] = rec[3 + 3 * v + a];
    }
  }
  return facets;
}

void export_vtk_polydata(const TriMesh& mesh, const std::string& path) {
  std::string s = "# vtk DataFile Version 3.0\nsurface\nASCII\nDATASET POLYDATA\n";
  s += "POINTS " + std::to_string(mesh.vertices.size()) + " double\n";
  for (const auto& v : mesh.vertices) {
    s += format_double(v[0]) + " " + format_double(v[1]) + " " + format_double(v[2]) + "\n";
  }
  s += "POLYGONS " + std::to_string(mesh.triangles.size()) + " " +
       std::to_string(4 * mesh.triangles.size()) + "\n";
  for (const auto& t : mesh.triangles) {
    s += "3 " + std::to_string(t[0]) + " " + std::to_string(t[1]) + " " + std::to_string(t[2]) + "\n";
  }
  s += "CELL_DATA " + std::to_string(mesh.triangles.size()) + "\nSCALARS label int 1\nLOOKUP_TABLE default\n";
  for (auto l : mesh.labels) s += std::to_string(static_cast<int>(l)) + "\n";
  write_text_file(path, s);
}

}  // namespace tpms
