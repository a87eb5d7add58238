#include "tpms/conduction.hpp"

#include <Eigen/SparseCore>
#include <cmath>

#include "tpms/error.hpp"

namespace tpms {

ConductionResult face_conductivity(const FaceConductivities& faces, double tolerance,
                                   int max_iterations) {
  const int n = faces.n;
  const std::size_t cells = static_cast<std::size_t>(n) * n * n;
  if (n < 1 || faces.x.size() != cells + static_cast<std::size_t>(n) * n ||
      faces.y.size() != cells || faces.z.size() != cells) {
    throw ContractError("face conductivity arrays do not match n");
  }
  for (const auto* arr : {&faces.x, &faces.y, &faces.z}) {
    for (double v : *arr) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw InputError("face conductivities must be finite and >= 0");
    }
  }
  const int total = static_cast<int>(cells);
  auto id = [n](int i, int j, int k) { return i + n * (j + n * k); };
  // Face between voxel s and neighbour slot d, as (neighbour, conductivity);
  // neighbour -1 marks an x boundary.
  auto link = [&](int s, int d) -> std::pair<int, double> {
    const int i = s % n, j = (s / n) % n, k = s / (n * n);
    switch (d) {
      case 0: return {i + 1 < n ? id(i + 1, j, k) : -1, faces.x[(i + 1) + (n + 1) * (j + n * k)]};
      case 1: return {i > 0 ? id(i - 1, j, k) : -1, faces.x[i + (n + 1) * (j + n * k)]};
      case 2: { const int q = id(i, (j + 1) % n, k); return {q, faces.y[q]}; }
      case 3: return {id(i, (j + n - 1) % n, k), faces.y[s]};
      case 4: { const int q = id(i, j, (k + 1) % n); return {q, faces.z[q]}; }
      default: return {id(i, j, (k + n - 1) % n), faces.z[s]};
    }
  };

  ConductionResult res;
  auto flood = [&](int face_i) {
    std::vector<char> seen(total, 0);
    std::vector<int> stack;
    for (int k = 0; k < n; ++k) {
      for (int j = 0; j < n; ++j) {
        const int s = id(face_i, j, k);
        const double g = faces.x[(face_i == 0 ? 0 : n) + (n + 1) * (j + n * k)];
        if (g > 0.0) { seen[s] = 1; stack.push_back(s); }
      }
    }
    while (!stack.empty()) {
      const int s = stack.back();
      stack.pop_back();
      for (int d = 0; d < 6; ++d) {
        const auto [q, g] = link(s, d);
        if (q >= 0 && g > 0.0 && !seen[q]) { seen[q] = 1; stack.push_back(q); }
      }
    }
    return seen;
  };
  const auto from_lo = flood(0);
  const auto from_hi = flood(n - 1);
  bool spans = false;
  for (int k = 0; k < n && !spans; ++k) {
    for (int j = 0; j < n; ++j) {
      if (from_lo[id(n - 1, j, k)] && faces.x[n + (n + 1) * (j + n * k)] > 0.0) {
        spans = true;
        break;
      }
    }
  }
  std::vector<int> unknown(total, -1);
  int m = 0;
  for (int s = 0; s < total; ++s) {
    if (from_lo[s] || from_hi[s]) unknown[s] = m++;
  }
  res.volume_fraction = static_cast<double>(m) / total;
  if (!spans) {
    res.disconnected = true;
    return res;
  }

  // Conductances per unit voxel size: interior faces g, boundary half cells 2g.
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
  for (int s = 0; s < total; ++s) {
    const int r = unknown[s];
    if (r < 0) continue;
    double diag = 0.0;
    for (int d = 0; d < 6; ++d) {
      const auto [q, g] = link(s, d);
      if (g <= 0.0) continue;
      if (q < 0) {
        diag += 2.0 * g;
        if (d == 1) b[r] += 2.0 * g;
        continue;
      }
      if (unknown[q] < 0 || q == s) continue;
      diag += g;
      trip.emplace_back(r, unknown[q], -g);
    }
    trip.emplace_back(r, r, diag);
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor> A(m, m);
  A.setFromTriplets(trip.begin(), trip.end());

  const Eigen::VectorXd inv_diag = A.diagonal().cwiseInverse();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd r = b;
  Eigen::VectorXd z = inv_diag.cwiseProduct(r);
  Eigen::VectorXd p = z;
  double rz = r.dot(z);
  const double bnorm = b.norm();
  int it = 0;
  for (;; ++it) {
    const double rel = r.norm() / bnorm;
    res.residual_history.push_back(rel);
    if (rel <= tolerance || it >= max_iterations) break;
    const Eigen::VectorXd Ap = A * p;
    const double step = rz / p.dot(Ap);
    x += step * p;
    r -= step * Ap;
    z = inv_diag.cwiseProduct(r);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  res.iterations = it;
  if (res.residual_history.back() > tolerance) {
    throw ConvergenceError("conduction solve did not reach tolerance", res.residual_history);
  }
  double flux = 0.0;
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) {
      const int s = id(0, j, k);
      if (unknown[s] >= 0) flux += 2.0 * faces.x[(n + 1) * (j + n * k)] * (1.0 - x[unknown[s]]);
    }
  }
  // Heat rate is flux * h; k* = rate / L^2 * L / dT with h = L / n.
  res.k_eff = flux / n;
  return res;
}

ConductionResult voxel_conductivity(const std::vector<double>& k, int n, double tolerance,
                                    int max_iterations) {
  if (n < 1 || k.size() != static_cast<std::size_t>(n) * n * n) {
    throw ContractError("voxel conductivity array does not match n^3");
  }
  for (double v : k) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InputError("voxel conductivities must be finite and >= 0");
  }
  auto id = [n](int i, int j, int kk) { return i + n * (j + n * kk); };
  auto harmonic = [](double a, double b) { return a > 0.0 && b > 0.0 ? 2.0 * a * b / (a + b) : 0.0; };
  FaceConductivities f;
  f.n = n;
  f.x.assign(static_cast<std::size_t>(n + 1) * n * n, 0.0);
  f.y.assign(k.size(), 0.0);
  f.z.assign(k.size(), 0.0);
  for (int kk = 0; kk < n; ++kk) {
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i <= n; ++i) {
        double g;
        if (i == 0) g = k[id(0, j, kk)];
        else if (i == n) g = k[id(n - 1, j, kk)];
        else g = harmonic(k[id(i - 1, j, kk)], k[id(i, j, kk)]);
        f.x[i + (n + 1) * (j + n * kk)] = g;
      }
      for (int i = 0; i < n; ++i) {
        const int s = id(i, j, kk);
        f.y[s] = harmonic(k[s], k[id(i, (j + n - 1) % n, kk)]);
        f.z[s] = harmonic(k[s], k[id(i, j, (kk + n - 1) % n)]);
      }
    }
  }
  auto res = face_conductivity(f, tolerance, max_iterations);
  long filled = 0;
  for (double v : k) filled += v > 0.0;
  res.volume_fraction = static_cast<double>(filled) / k.size();
  return res;
}

ConductionResult conduction_homogenize(const GyroidSpec& spec, ConductionPhase phase,
                                       int resolution, double k_phase, double tolerance, int sub) {
  if (resolution < 2) throw InputError("conduction resolution must be at least 2");
  if (sub < 1) throw InputError("face sampling must be at least 1");
  if (!(k_phase > 0.0)) throw InputError("phase conductivity must be positive");
  const int n = resolution;
  const double h = spec.cell_size / n;
  const Phase want = phase == ConductionPhase::Solid ? Phase::Solid : Phase::Fluid1;
  const Vec3& o = spec.box.lo;
  // Phase fraction of the face normal to `axis` at integer position (i, j, k)
  // in voxel units.
  auto fraction = [&](int axis, int i, int j, int k) {
    int hits = 0;
    for (int b = 0; b < sub; ++b) {
      for (int a = 0; a < sub; ++a) {
        Vec3 p{i * h, j * h, k * h};
        const int t1 = (axis + 1) % 3, t2 = (axis + 2) % 3;
        p[t1] += (a + 0.5) / sub * h;
        p[t2] += (b + 0.5) / sub * h;
        for (int c = 0; c < 3; ++c) p[c] += o[c];
        if (phase_at(p, spec) == want) ++hits;
      }
    }
    return k_phase * hits / (sub * sub);
  };
  FaceConductivities f;
  f.n = n;
  f.x.assign(static_cast<std::size_t>(n + 1) * n * n, 0.0);
  f.y.assign(static_cast<std::size_t>(n) * n * n, 0.0);
  f.z.assign(f.y.size(), 0.0);
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i <= n; ++i) f.x[i + (n + 1) * (j + n * k)] = fraction(0, i, j, k);
      for (int i = 0; i < n; ++i) {
        const int s = i + n * (j + n * k);
        f.y[s] = fraction(1, i, j, k);
        f.z[s] = fraction(2, i, j, k);
      }
    }
  }
  return face_conductivity(f, tolerance);
}

}  // namespace tpms
