#include "tpms/filter.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "tpms/error.hpp"

namespace tpms {

DensityFilter::DensityFilter(const StructuredGrid& grid, double radius, bool allow_degenerate)
    : radius_(radius) {
  if (!(radius > 0.0)) throw InputError("filter radius must be positive");
  const double h = grid.h();
  const bool degenerate = radius <= 0.5 * h;
  if (degenerate && !allow_degenerate) {
    throw InputError("filter radius " + std::to_string(radius) +
                     " m is below half a cell; pass the degenerate-filter override to accept an identity filter");
  }
  const int n = grid.cell_count();
  const int reach = static_cast<int>(std::ceil(radius / h));
  std::vector<Eigen::Triplet<double>> triplets;
  for (int e = 0; e < n; ++e) {
    if (!grid.is_core(e)) continue;
    if (degenerate) {
      triplets.emplace_back(e, e, 1.0);
      continue;
    }
    const auto pe = grid.ijk(e);
    std::vector<std::pair<int, double>> row;
    double total = 0.0;
    for (int dk = -reach; dk <= reach; ++dk) {
      for (int dj = -reach; dj <= reach; ++dj) {
        for (int di = -reach; di <= reach; ++di) {
          const std::array<int, 3> q{pe[0] + di, pe[1] + dj, pe[2] + dk};
          if (!grid.contains(q)) continue;
          const int j = grid.index(q);
          if (!grid.is_core(j)) continue;
          const double d = h * std::sqrt(double(di * di + dj * dj + dk * dk));
          const double w = radius - d;
          if (w <= 0.0) continue;
          row.emplace_back(j, w);
          total += w;
        }
      }
    }
    for (const auto& [j, w] : row) triplets.emplace_back(e, j, w / total);
  }
  weights_.resize(n, n);
  weights_.setFromTriplets(triplets.begin(), triplets.end());
  weights_.makeCompressed();
}

ScalarField DensityFilter::apply(const ScalarField& gamma) const {
  if (static_cast<int>(gamma.size()) != cell_count()) {
    throw ContractError("filter input size does not match the grid");
  }
  ScalarField out("gamma_hat", "1", gamma.size());
  Eigen::Map<const Eigen::VectorXd> x(gamma.values.data(), cell_count());
  Eigen::Map<Eigen::VectorXd> y(out.values.data(), cell_count());
  y = weights_ * x;
  return out;
}

ScalarField DensityFilter::apply_transpose(const ScalarField& dJ_dgamma_hat) const {
  if (static_cast<int>(dJ_dgamma_hat.size()) != cell_count()) {
    throw ContractError("filter chain-rule input does not match the forward grid");
  }
  ScalarField out("dJ_dgamma", "1", dJ_dgamma_hat.size());
  Eigen::Map<const Eigen::VectorXd> x(dJ_dgamma_hat.values.data(), cell_count());
  Eigen::Map<Eigen::VectorXd> y(out.values.data(), cell_count());
  y = weights_.transpose() * x;
  return out;
}

ScalarField apply_filter(const ScalarField& gamma, const StructuredGrid& grid, double radius,
                         bool allow_degenerate) {
  return DensityFilter(grid, radius, allow_degenerate).apply(gamma);
}

ScalarField filter_chain_rule(const ScalarField& dJ_dgamma_hat, const StructuredGrid& grid,
                              double radius, bool allow_degenerate) {
  return DensityFilter(grid, radius, allow_degenerate).apply_transpose(dJ_dgamma_hat);
}

ScalarField gamma_hat_to_c(const ScalarField& gamma_hat, double c_min, double c_max) {
  ScalarField c("c", "m", gamma_hat.size());
  for (std::size_t i = 0; i < gamma_hat.size(); ++i) {
    c[i] = c_min + gamma_hat[i] * (c_max - c_min);
  }
  return c;
}

DesignField DesignField::from_gamma(const StructuredGrid& grid, ScalarField gamma, double radius,
                                    double c_min, double c_max, bool allow_degenerate) {
  if (static_cast<int>(gamma.size()) != grid.cell_count()) {
    throw ContractError("design field size does not match the grid");
  }
  for (int c = 0; c < grid.cell_count(); ++c) {
    if (!grid.is_core(c)) gamma[c] = 0.0;
  }
  DesignField d;
  d.gamma = std::move(gamma);
  d.gamma.name = "gamma";
  d.gamma.unit = "1";
  d.gamma_hat = DensityFilter(grid, radius, allow_degenerate).apply(d.gamma);
  // Row sums are one only to round-off.
  for (double& v : d.gamma_hat.values) v = std::clamp(v, 0.0, 1.0);
  d.filter_radius = radius;
  d.c_min = c_min;
  d.c_max = c_max;
  return d;
}

DesignField DesignField::uniform(const StructuredGrid& grid, double value, double radius,
                                 double c_min, double c_max) {
  return from_gamma(grid, ScalarField("gamma", "1", grid.cell_count(), value), radius, c_min,
                    c_max, true);
}

void DesignField::validate(const StructuredGrid& grid) const {
  if (!(c_min < c_max)) throw InputError("design requires c_min < c_max");
  if (static_cast<int>(gamma.size()) != grid.cell_count() ||
      static_cast<int>(gamma_hat.size()) != grid.cell_count()) {
    throw ContractError("design field size does not match the grid");
  }
  for (int c = 0; c < grid.cell_count(); ++c) {
    if (!grid.is_core(c)) continue;
    if (!(gamma[c] >= 0.0 && gamma[c] <= 1.0) || !(gamma_hat[c] >= 0.0 && gamma_hat[c] <= 1.0)) {
      throw InputError("design variables must lie in [0, 1]");
    }
  }
}

}  // namespace tpms
