#include "tpms/polynomial.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "tpms/error.hpp"

namespace tpms {

double Polynomial::derivative(double x) const {
  double y = 0.0;
  for (int i = degree(); i >= 1; --i) y = y * x + i * coeffs[i];
  return y;
}

Polynomial Polynomial::derivative() const {
  Polynomial d;
  for (int i = 1; i <= degree(); ++i) d.coeffs.push_back(i * coeffs[i]);
  if (d.coeffs.empty()) d.coeffs.push_back(0.0);
  return d;
}

namespace {

Eigen::VectorXd solve_full_rank(const Eigen::MatrixXd& A, const Eigen::VectorXd& y) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  qr.setThreshold(1e-12);
  if (qr.rank() < A.cols()) {
    throw FitError("least-squares system is rank deficient (rank " + std::to_string(qr.rank()) +
                   " of " + std::to_string(A.cols()) + ")");
  }
  return qr.solve(y);
}

}  // namespace

PolyFit fit_polynomial(const std::vector<double>& x, const std::vector<double>& y, int degree) {
  if (degree < 0) throw InputError("polynomial degree must be non-negative");
  if (x.size() != y.size()) throw ContractError("fit abscissae and values differ in length");
  if (x.size() < static_cast<std::size_t>(degree + 1)) {
    throw FitError("need at least " + std::to_string(degree + 1) + " points for degree " +
                   std::to_string(degree));
  }
  const int m = static_cast<int>(x.size());
  Eigen::MatrixXd A(m, degree + 1);
  Eigen::VectorXd b(m);
  for (int r = 0; r < m; ++r) {
    double p = 1.0;
    for (int c = 0; c <= degree; ++c) {
      A(r, c) = p;
      p *= x[r];
    }
    b[r] = y[r];
  }
  const Eigen::VectorXd sol = solve_full_rank(A, b);
  PolyFit fit;
  fit.poly.coeffs.assign(sol.data(), sol.data() + sol.size());
  fit.residual_norm = (A * sol - b).norm();
  for (int r = 0; r < m; ++r) {
    const double scale = std::max(std::abs(y[r]), std::numeric_limits<double>::min());
    fit.max_rel_deviation = std::max(fit.max_rel_deviation, std::abs(fit.poly(x[r]) - y[r]) / scale);
  }
  return fit;
}

double Polynomial2D::d_a(double a, double b) const {
  double y = 0.0;
  for (int i = deg_a; i >= 1; --i) {
    double row = 0.0;
    for (int j = deg_b; j >= 0; --j) row = row * b + coeffs[i * (deg_b + 1) + j];
    y = y * a + i * row;
  }
  return y;
}

double Polynomial2D::d_b(double a, double b) const {
  double y = 0.0;
  for (int i = deg_a; i >= 0; --i) {
    double row = 0.0;
    for (int j = deg_b; j >= 1; --j) row = row * b + j * coeffs[i * (deg_b + 1) + j];
    y = y * a + row;
  }
  return y;
}

std::vector<double> monomial_row_2d(double a, double b, int deg_a, int deg_b) {
  std::vector<double> row;
  row.reserve((deg_a + 1) * (deg_b + 1));
  double pa = 1.0;
  for (int i = 0; i <= deg_a; ++i) {
    double pb = 1.0;
    for (int j = 0; j <= deg_b; ++j) {
      row.push_back(pa * pb);
      pb *= b;
    }
    pa *= a;
  }
  return row;
}

Polynomial2D fit_polynomial_2d(const std::vector<double>& a, const std::vector<double>& b,
                               const std::vector<double>& z, int deg_a, int deg_b,
                               const std::vector<std::vector<double>>& extra_rows,
                               const std::vector<double>& extra_targets) {
  if (a.size() != b.size() || a.size() != z.size() || extra_rows.size() != extra_targets.size()) {
    throw ContractError("bivariate fit inputs differ in length");
  }
  const int nc = (deg_a + 1) * (deg_b + 1);
  const int m = static_cast<int>(a.size() + extra_rows.size());
  if (m < nc) throw FitError("too few samples for the bivariate polynomial degree");
  Eigen::MatrixXd A(m, nc);
  Eigen::VectorXd y(m);
  for (std::size_t r = 0; r < a.size(); ++r) {
    const auto row = monomial_row_2d(a[r], b[r], deg_a, deg_b);
    for (int c = 0; c < nc; ++c) A(r, c) = row[c];
    y[r] = z[r];
  }
  for (std::size_t e = 0; e < extra_rows.size(); ++e) {
    const int r = static_cast<int>(a.size() + e);
    for (int c = 0; c < nc; ++c) A(r, c) = extra_rows[e][c];
    y[r] = extra_targets[e];
  }
  const Eigen::VectorXd sol = solve_full_rank(A, y);
  Polynomial2D p;
  p.deg_a = deg_a;
  p.deg_b = deg_b;
  p.coeffs.assign(sol.data(), sol.data() + sol.size());
  return p;
}

Nnls2 nnls2(const std::vector<double>& col0, const std::vector<double>& col1,
            const std::vector<double>& y) {
  if (col0.size() != y.size() || col1.size() != y.size()) {
    throw ContractError("NNLS columns differ in length");
  }
  double s00 = 0, s01 = 0, s11 = 0, s0y = 0, s1y = 0, syy = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    s00 += col0[i] * col0[i];
    s01 += col0[i] * col1[i];
    s11 += col1[i] * col1[i];
    s0y += col0[i] * y[i];
    s1y += col1[i] * y[i];
    syy += y[i] * y[i];
  }
  auto residual = [&](double x0, double x1) {
    double r2 = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double r = x0 * col0[i] + x1 * col1[i] - y[i];
      r2 += r * r;
    }
    return std::sqrt(r2);
  };
  const double det = s00 * s11 - s01 * s01;
  if (!(det > 1e-12 * s00 * s11)) {
    throw FitError("Darcy-Forchheimer data is rank deficient (need distinct velocities)");
  }
  Nnls2 out;
  // Full QR solve for the unconstrained optimum (better conditioned than the
  // normal equations), then the single-variable faces of the orthant.
  Eigen::MatrixXd A(y.size(), 2);
  Eigen::VectorXd b(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    A(i, 0) = col0[i];
    A(i, 1) = col1[i];
    b[i] = y[i];
  }
  const Eigen::VectorXd x = A.colPivHouseholderQr().solve(b);
  if (x[0] >= 0.0 && x[1] >= 0.0) {
    out.x0 = x[0];
    out.x1 = x[1];
    out.residual_norm = (A * x - b).norm();
    return out;
  }
  out.clamped = true;
  const double a0 = std::max(0.0, s0y / s00);
  const double a1 = std::max(0.0, s1y / s11);
  const double r0 = residual(a0, 0.0);
  const double r1 = residual(0.0, a1);
  if (r0 <= r1) {
    out.x0 = a0;
    out.residual_norm = r0;
  } else {
    out.x1 = a1;
    out.residual_norm = r1;
  }
  (void)syy;
  return out;
}

}  // namespace tpms
