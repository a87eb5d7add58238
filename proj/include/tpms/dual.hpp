#pragma once

#include <boost/container/small_vector.hpp>
#include <cmath>
#include <utility>

namespace tpms {

/// Forward-mode scalar carrying a sparse gradient: value plus sorted
/// (variable index, partial derivative) pairs.
struct Dual {
  using Entry = std::pair<int, double>;
  using Grad = boost::container::small_vector<Entry, 8>;

  double v = 0.0;
  Grad d;

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT: implicit promotion from constants
  static Dual variable(double value, int index) {
    Dual x(value);
    x.d.emplace_back(index, 1.0);
    return x;
  }

  /// a*x.d + b*y.d
  static Grad combine(double a, const Grad& x, double b, const Grad& y) {
    Grad out;
    out.reserve(x.size() + y.size());
    auto i = x.begin();
    auto j = y.begin();
    while (i != x.end() || j != y.end()) {
      if (j == y.end() || (i != x.end() && i->first < j->first)) {
        out.emplace_back(i->first, a * i->second);
        ++i;
      } else if (i == x.end() || j->first < i->first) {
        out.emplace_back(j->first, b * j->second);
        ++j;
      } else {
        out.emplace_back(i->first, a * i->second + b * j->second);
        ++i;
        ++j;
      }
    }
    return out;
  }
  static Grad scaled(double a, const Grad& x) {
    Grad out(x);
    for (auto& e : out) e.second *= a;
    return out;
  }

  Dual& operator+=(const Dual& o) { v += o.v; d = combine(1.0, d, 1.0, o.d); return *this; }
  Dual& operator-=(const Dual& o) { v -= o.v; d = combine(1.0, d, -1.0, o.d); return *this; }
  Dual& operator*=(const Dual& o) {
    d = combine(o.v, d, v, o.d);
    v *= o.v;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    const double inv = 1.0 / o.v;
    d = combine(inv, d, -v * inv * inv, o.d);
    v *= inv;
    return *this;
  }
};

inline Dual operator-(const Dual& a) { Dual r; r.v = -a.v; r.d = Dual::scaled(-1.0, a.d); return r; }
inline Dual operator+(Dual a, const Dual& b) { return a += b; }
inline Dual operator-(Dual a, const Dual& b) { return a -= b; }
inline Dual operator*(Dual a, const Dual& b) { return a *= b; }
inline Dual operator/(Dual a, const Dual& b) { return a /= b; }
inline Dual operator+(Dual a, double b) { a.v += b; return a; }
inline Dual operator+(double b, Dual a) { a.v += b; return a; }
inline Dual operator-(Dual a, double b) { a.v -= b; return a; }
inline Dual operator-(double b, const Dual& a) { return -a + b; }
inline Dual operator*(const Dual& a, double b) { Dual r; r.v = a.v * b; r.d = Dual::scaled(b, a.d); return r; }
inline Dual operator*(double b, const Dual& a) { return a * b; }
inline Dual operator/(const Dual& a, double b) { return a * (1.0 / b); }
inline Dual operator/(double a, const Dual& b) {
  Dual r;
  r.v = a / b.v;
  r.d = Dual::scaled(-a / (b.v * b.v), b.d);
  return r;
}

inline double sqrt(double a) { return std::sqrt(a); }
inline Dual sqrt(const Dual& a) {
  Dual r;
  r.v = std::sqrt(a.v);
  r.d = Dual::scaled(0.5 / r.v, a.d);
  return r;
}

inline double value(double x) { return x; }
inline double value(const Dual& x) { return x.v; }

/// f(x) given f and f' at value(x).
inline double apply_unary(double f, double, double) { return f; }
inline Dual apply_unary(double f, double df, const Dual& x) {
  Dual r(f);
  r.d = Dual::scaled(df, x.d);
  return r;
}
/// f(x, y) given f and both partials.
inline double apply_binary(double f, double, double, double, double) { return f; }
inline Dual apply_binary(double f, double dfx, double dfy, const Dual& x, const Dual& y) {
  Dual r(f);
  r.d = Dual::combine(dfx, x.d, dfy, y.d);
  return r;
}

}  // namespace tpms
