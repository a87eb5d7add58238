#pragma once

#include <Eigen/SparseCore>

#include "tpms/grid.hpp"

namespace tpms {

/// Linear cone-weight density filter restricted to core cells.
///
/// Row e of the operator holds w_ej = max(0, R - d(e,j)) over core cells j,
/// normalised to sum to one; distances are between cell centres. Entries for
/// non-core cells are zero in both directions. Applying the filter is a
/// fixed-order sparse matrix-vector product, so results are bit-reproducible.
class DensityFilter {
 public:
  /// Throws InputError when radius <= h/2 unless `allow_degenerate` is set,
  /// in which case the operator is the identity on core cells.
  DensityFilter(const StructuredGrid& grid, double radius, bool allow_degenerate = false);

  ScalarField apply(const ScalarField& gamma) const;
  /// Returns F^T * dJ/dgamma_hat (the exact transpose, not a re-application).
  ScalarField apply_transpose(const ScalarField& dJ_dgamma_hat) const;

  double radius() const { return radius_; }
  const Eigen::SparseMatrix<double, Eigen::RowMajor>& matrix() const { return weights_; }
  int cell_count() const { return static_cast<int>(weights_.rows()); }

 private:
  double radius_;
  Eigen::SparseMatrix<double, Eigen::RowMajor> weights_;
};

ScalarField apply_filter(const ScalarField& gamma, const StructuredGrid& grid, double radius,
                         bool allow_degenerate = false);
ScalarField filter_chain_rule(const ScalarField& dJ_dgamma_hat, const StructuredGrid& grid,
                              double radius, bool allow_degenerate = false);

/// c = c_min + gamma_hat * (c_max - c_min), cell by cell.
ScalarField gamma_hat_to_c(const ScalarField& gamma_hat, double c_min, double c_max);

/// Raw and filtered design variables on the core cells of a grid.
struct DesignField {
  ScalarField gamma;
  ScalarField gamma_hat;
  double filter_radius = 0.0;
  double c_min = 1.426e-3;
  double c_max = 3.75e-3;

  /// Builds gamma_hat = F(gamma); gamma entries outside the core are zeroed.
  static DesignField from_gamma(const StructuredGrid& grid, ScalarField gamma, double radius,
                                double c_min, double c_max, bool allow_degenerate = false);
  static DesignField uniform(const StructuredGrid& grid, double value, double radius,
                             double c_min, double c_max);
  void validate(const StructuredGrid& grid) const;
};

}  // namespace tpms
