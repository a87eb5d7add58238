#pragma once

#include <string>
#include <vector>

namespace tpms {

/// Univariate polynomial with ascending coefficients.
struct Polynomial {
  std::vector<double> coeffs;

  int degree() const { return static_cast<int>(coeffs.size()) - 1; }

  template <class T>
  T operator()(const T& x) const {
    T y = T(0.0);
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) y = y * x + T(*it);
    return y;
  }
  double derivative(double x) const;
  Polynomial derivative() const;
};

struct PolyFit {
  Polynomial poly;
  double residual_norm = 0.0;
  /// max_i |p(x_i) - y_i| / max(|y_i|, tiny)
  double max_rel_deviation = 0.0;
};

/// Least-squares polynomial of the given degree; FitError when the
/// Vandermonde system is rank deficient (fewer distinct abscissae than
/// coefficients).
PolyFit fit_polynomial(const std::vector<double>& x, const std::vector<double>& y, int degree);

/// Bivariate polynomial sum_{i<=da, j<=db} c_ij a^i b^j; coefficient (i, j)
/// at index i * (db + 1) + j.
struct Polynomial2D {
  int deg_a = 0;
  int deg_b = 0;
  std::vector<double> coeffs;

  template <class T>
  T operator()(const T& a, const T& b) const {
    T y = T(0.0);
    for (int i = deg_a; i >= 0; --i) {
      T row = T(0.0);
      for (int j = deg_b; j >= 0; --j) row = row * b + T(coeffs[i * (deg_b + 1) + j]);
      y = y * a + row;
    }
    return y;
  }
  double d_a(double a, double b) const;
  double d_b(double a, double b) const;
};

/// Least squares over samples (a_k, b_k, z_k), optionally with a quadratic
/// penalty `penalty * sum_p min(0, P(a_p, b_p))`-style rows appended by the
/// caller through `extra_rows` (coefficient rows and targets).
Polynomial2D fit_polynomial_2d(const std::vector<double>& a, const std::vector<double>& b,
                               const std::vector<double>& z, int deg_a, int deg_b,
                               const std::vector<std::vector<double>>& extra_rows = {},
                               const std::vector<double>& extra_targets = {});
/// Monomial row [a^i b^j] in coefficient order.
std::vector<double> monomial_row_2d(double a, double b, int deg_a, int deg_b);

/// Non-negative least squares min ||A x - y|| with x >= 0 for two unknowns,
/// by enumerating the active sets. `clamped` reports whether the
/// unconstrained optimum was infeasible.
struct Nnls2 {
  double x0 = 0.0;
  double x1 = 0.0;
  double residual_norm = 0.0;
  bool clamped = false;
};
Nnls2 nnls2(const std::vector<double>& col0, const std::vector<double>& col1,
            const std::vector<double>& y);

}  // namespace tpms
