#include "tpms/mma.hpp"

#include <algorithm>
#include <cmath>

#include "tpms/error.hpp"

namespace tpms {

void MmaSettings::validate() const {
  if (!(asymptote_init > 0.0 && asymptote_init <= 1.0)) throw InputError("MMA initial asymptote offset must lie in (0, 1]");
  if (!(asymptote_incr >= 1.0) || !(asymptote_decr > 0.0 && asymptote_decr <= 1.0)) {
    throw InputError("MMA asymptote factors need incr >= 1 and decr in (0, 1]");
  }
  if (!(move_limit > 0.0 && move_limit <= 1.0)) throw InputError("MMA move limit must lie in (0, 1]");
  if (!(raa0 > 0.0)) throw InputError("MMA raa0 must be positive");
  if (!(asymptote_min > 0.0 && asymptote_min <= asymptote_init && asymptote_init <= asymptote_max)) {
    throw InputError("MMA asymptote limits need 0 < min <= init <= max");
  }
}

double MmaSubproblem::kkt_violation() const {
  double worst = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) {
    const double a = p[j] / ((upp[j] - y[j]) * (upp[j] - y[j]));
    const double b = q[j] / ((y[j] - low[j]) * (y[j] - low[j]));
    const double d = a - b;
    const double scale = a + b > 0.0 ? a + b : 1.0;
    double v = 0.0;
    if (y[j] <= lower[j]) {
      v = std::max(0.0, -d);
    } else if (y[j] >= upper[j]) {
      v = std::max(0.0, d);
    } else {
      v = std::abs(d);
    }
    worst = std::max(worst, v / scale);
  }
  return worst;
}

std::vector<double> mma_update(const std::vector<double>& x, const std::vector<double>& grad, MmaState& st,
                               double x_min, double x_max, MmaSubproblem* sub) {
  const std::size_t n = x.size();
  if (grad.size() != n) throw ContractError("MMA gradient and design sizes differ");
  if (!(x_max > x_min)) throw ContractError("MMA box is empty");
  const auto& s = st.settings;
  const double range = x_max - x_min;
  double gmax = 0.0;
  for (double g : grad) {
    if (!std::isfinite(g)) throw ContractError("MMA gradient has non-finite entries");
    gmax = std::max(gmax, std::abs(g));
  }
  const double raa = s.raa0 * (gmax > 0.0 ? gmax : 1.0) / range;

  if (st.iteration < 2 || st.low.size() != n) {
    st.low.assign(n, 0.0);
    st.upp.assign(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      st.low[j] = x[j] - s.asymptote_init * range;
      st.upp[j] = x[j] + s.asymptote_init * range;
    }
  } else {
    for (std::size_t j = 0; j < n; ++j) {
      const double z = (x[j] - st.x_prev1[j]) * (st.x_prev1[j] - st.x_prev2[j]);
      const double factor = z < 0.0 ? s.asymptote_decr : (z > 0.0 ? s.asymptote_incr : 1.0);
      double lo = x[j] - factor * (st.x_prev1[j] - st.low[j]);
      double up = x[j] + factor * (st.upp[j] - st.x_prev1[j]);
      lo = std::clamp(lo, x[j] - s.asymptote_max * range, x[j] - s.asymptote_min * range);
      up = std::clamp(up, x[j] + s.asymptote_min * range, x[j] + s.asymptote_max * range);
      st.low[j] = lo;
      st.upp[j] = up;
    }
  }

  MmaSubproblem local;
  MmaSubproblem& sp = sub ? *sub : local;
  sp.p.assign(n, 0.0);
  sp.q.assign(n, 0.0);
  sp.lower.assign(n, 0.0);
  sp.upper.assign(n, 0.0);
  sp.y.assign(n, 0.0);
  sp.low = st.low;
  sp.upp = st.upp;
  for (std::size_t j = 0; j < n; ++j) {
    const double g = grad[j];
    const double ux = st.upp[j] - x[j];
    const double xl = x[j] - st.low[j];
    const double gp = std::max(g, 0.0), gm = std::max(-g, 0.0);
    sp.p[j] = (1.001 * gp + 0.001 * gm + raa) * ux * ux;
    sp.q[j] = (0.001 * gp + 1.001 * gm + raa) * xl * xl;
    sp.lower[j] = std::max({x_min, st.low[j] + 0.1 * xl, x[j] - s.move_limit * range});
    sp.upper[j] = std::min({x_max, st.upp[j] - 0.1 * ux, x[j] + s.move_limit * range});
    const double sp_ = std::sqrt(sp.p[j]), sq = std::sqrt(sp.q[j]);
    const double y = (sp_ * st.low[j] + sq * st.upp[j]) / (sp_ + sq);
    sp.y[j] = std::clamp(y, sp.lower[j], sp.upper[j]);
  }

  st.x_prev2 = st.x_prev1.size() == n ? st.x_prev1 : x;
  st.x_prev1 = x;
  ++st.iteration;
  return sp.y;
}

double projected_gradient_norm(const std::vector<double>& x, const std::vector<double>& grad, double x_min,
                               double x_max) {
  double worst = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double step = std::clamp(x[j] - grad[j], x_min, x_max) - x[j];
    worst = std::max(worst, std::abs(step));
  }
  return worst;
}

}  // namespace tpms
