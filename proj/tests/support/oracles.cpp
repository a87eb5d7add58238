#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>

namespace oracle {

Eigen::MatrixXd dense_filter(const tpms::StructuredGrid& grid, double radius) {
  const int n = grid.cell_count();
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(n, n);
  for (int e = 0; e < n; ++e) {
    if (!grid.is_core(e)) continue;
    const auto xe = grid.center(e);
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      if (!grid.is_core(j)) continue;
      const auto xj = grid.center(j);
      const double d = std::sqrt((xe[0] - xj[0]) * (xe[0] - xj[0]) + (xe[1] - xj[1]) * (xe[1] - xj[1]) +
                                 (xe[2] - xj[2]) * (xe[2] - xj[2]));
      F(e, j) = std::max(0.0, radius - d);
      sum += F(e, j);
    }
    F.row(e) /= sum;
  }
  return F;
}

double balanced_counterflow_effectiveness(double ntu) {
  // dTh/dx = -N (Th - Tc), dTc/dx = -N (Th - Tc) with the cold stream
  // flowing backwards: the difference is constant, so Th falls linearly
  // and Th(0) - Th(1) = N * dT while Th(0) - Tc(1) = (1 + N) dT.
  return ntu / (1.0 + ntu);
}

namespace {

struct Facet {
  float n[3];
  float v[3][3];
};

std::vector<Facet> read_facets(const std::string& path, long* count, bool* size_ok) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char header[80];
  in.read(header, 80);
  std::uint32_t n = 0;
  in.read(reinterpret_cast<char*>(&n), 4);
  *count = n;
  *size_ok = std::filesystem::file_size(path) == 84u + 50u * n;
  std::vector<Facet> out(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    char rec[50];
    in.read(rec, 50);
    std::memcpy(&out[i], rec, 48);
  }
  return out;
}

}  // namespace

StlCheck check_stl(const std::string& path) {
  StlCheck c;
  const auto facets = read_facets(path, &c.facets, &c.size_ok);
  std::map<std::array<float, 3>, long> ids;
  auto id = [&](const float* p) {
    const std::array<float, 3> k{p[0], p[1], p[2]};
    auto it = ids.find(k);
    if (it != ids.end()) return it->second;
    const long v = static_cast<long>(ids.size());
    ids.emplace(k, v);
    return v;
  };
  std::map<std::pair<long, long>, std::pair<int, int>> edges;  // (min,max) -> (forward, backward)
  for (const auto& f : facets) {
    const long a[3] = {id(f.v[0]), id(f.v[1]), id(f.v[2])};
    for (int e = 0; e < 3; ++e) {
      const long p = a[e], q = a[(e + 1) % 3];
      auto& slot = edges[{std::min(p, q), std::max(p, q)}];
      (p < q ? slot.first : slot.second) += 1;
    }
  }
  c.vertices = static_cast<long>(ids.size());
  c.edges = static_cast<long>(edges.size());
  for (const auto& [k, v] : edges) {
    if (v.first != 1 || v.second != 1) ++c.bad_edges;
  }
  return c;
}

ZRayCaster::ZRayCaster(const std::string& stl_path, int bins) : nb_(bins) {
  long n = 0;
  bool ok = false;
  const auto facets = read_facets(stl_path, &n, &ok);
  lo_[0] = lo_[1] = 1e300;
  hi_[0] = hi_[1] = -1e300;
  for (const auto& f : facets) {
    std::array<std::array<double, 3>, 3> t{};
    for (int i = 0; i < 3; ++i) {
      for (int a = 0; a < 3; ++a) t[i][a] = f.v[i][a];
      for (int a = 0; a < 2; ++a) {
        lo_[a] = std::min(lo_[a], t[i][a]);
        hi_[a] = std::max(hi_[a], t[i][a]);
      }
    }
    tris_.push_back(t);
  }
  bins_.assign(static_cast<std::size_t>(nb_) * nb_, {});
  for (std::size_t k = 0; k < tris_.size(); ++k) {
    double bl[2] = {1e300, 1e300}, bh[2] = {-1e300, -1e300};
    for (const auto& v : tris_[k]) {
      for (int a = 0; a < 2; ++a) {
        bl[a] = std::min(bl[a], v[a]);
        bh[a] = std::max(bh[a], v[a]);
      }
    }
    int i0[2], i1[2];
    for (int a = 0; a < 2; ++a) {
      const double w = (hi_[a] - lo_[a]) / nb_;
      i0[a] = std::clamp(static_cast<int>((bl[a] - lo_[a]) / w), 0, nb_ - 1);
      i1[a] = std::clamp(static_cast<int>((bh[a] - lo_[a]) / w), 0, nb_ - 1);
    }
    for (int j = i0[1]; j <= i1[1]; ++j) {
      for (int i = i0[0]; i <= i1[0]; ++i) bins_[i + nb_ * j].push_back(static_cast<int>(k));
    }
  }
}

std::vector<double> ZRayCaster::inside_intervals(double x, double y) const {
  const double wx = (hi_[0] - lo_[0]) / nb_, wy = (hi_[1] - lo_[1]) / nb_;
  const int i = std::clamp(static_cast<int>((x - lo_[0]) / wx), 0, nb_ - 1);
  const int j = std::clamp(static_cast<int>((y - lo_[1]) / wy), 0, nb_ - 1);
  std::vector<double> hits;
  // Moller-Trumbore with direction (0, 0, 1) from (x, y, 0).
  for (int k : bins_[i + nb_ * j]) {
    const auto& t = tris_[k];
    const double e1[3] = {t[1][0] - t[0][0], t[1][1] - t[0][1], t[1][2] - t[0][2]};
    const double e2[3] = {t[2][0] - t[0][0], t[2][1] - t[0][1], t[2][2] - t[0][2]};
    // p = d x e2 with d = z
    const double p[3] = {-e2[1], e2[0], 0.0};
    const double det = e1[0] * p[0] + e1[1] * p[1] + e1[2] * p[2];
    if (std::abs(det) < 1e-30) continue;
    const double inv = 1.0 / det;
    const double s[3] = {x - t[0][0], y - t[0][1], -t[0][2]};
    const double u = (s[0] * p[0] + s[1] * p[1] + s[2] * p[2]) * inv;
    if (u < 0.0 || u > 1.0) continue;
    const double q[3] = {s[1] * e1[2] - s[2] * e1[1], s[2] * e1[0] - s[0] * e1[2], s[0] * e1[1] - s[1] * e1[0]};
    const double v = q[2] * inv;
    if (v < 0.0 || u + v > 1.0) continue;
    hits.push_back((e2[0] * q[0] + e2[1] * q[1] + e2[2] * q[2]) * inv);
  }
  std::sort(hits.begin(), hits.end());
  std::vector<double> out;
  if (hits.size() % 2 != 0) return out;
  for (std::size_t h = 0; h + 1 < hits.size(); h += 2) out.push_back(hits[h + 1] - hits[h]);
  return out;
}

double mean_chord(const ZRayCaster& rc, double x0, double x1, double y0, double y1, int n) {
  double sum = 0.0;
  long count = 0;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      // Irrational jitter keeps rays off mesh edges.
      const double x = x0 + (x1 - x0) * (i + 0.5 + 0.1 * std::sqrt(2.0)) / (n + 0.5);
      const double y = y0 + (y1 - y0) * (j + 0.5 + 0.1 * std::sqrt(3.0)) / (n + 0.5);
      for (double len : rc.inside_intervals(x, y)) {
        sum += len;
        ++count;
      }
    }
  }
  return count ? sum / count : 0.0;
}

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<int> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

UniformityRef uniformity(const std::vector<double>& speed, const std::vector<double>& area,
                         const std::vector<double>& eta) {
  UniformityRef r;
  double A = 0.0;
  for (std::size_t i = 0; i < speed.size(); ++i) {
    A += area[i];
    r.mean += area[i] * speed[i];
  }
  r.mean /= A;
  double s2 = 0.0;
  for (std::size_t i = 0; i < speed.size(); ++i) s2 += area[i] * std::pow(speed[i] - r.mean, 2);
  r.cv = std::sqrt(s2 / A) / r.mean;
  for (double e : eta) {
    double low = 0.0;
    for (std::size_t i = 0; i < speed.size(); ++i) low += speed[i] <= e * r.mean ? area[i] : 0.0;
    r.f_low.push_back(low / A);
  }
  return r;
}

double central_difference(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace oracle
