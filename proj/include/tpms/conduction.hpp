#pragma once

#include <vector>

#include "tpms/gyroid.hpp"

namespace tpms {

enum class ConductionPhase { Fluid1, Solid };

struct ConductionResult {
  double k_eff = 0.0;          ///< [W/(m K)]
  bool disconnected = false;   ///< no conducting path between the x faces
  double volume_fraction = 0.0;
  int iterations = 0;
  std::vector<double> residual_history;  ///< relative residual per CG iteration
};

/// Face conductivities [W/(m K)] of an n^3 voxel block, x fastest.
/// `x` has (n+1) n^2 entries (face i sits at the low side of voxel i, face n
/// at the x = L boundary); `y` and `z` hold the low face of every voxel and
/// wrap periodically.
struct FaceConductivities {
  int n = 0;
  std::vector<double> x, y, z;
};

/// Effective conductivity along x with the x faces held at 1 and 0 and y, z
/// periodic. Voxels without a conducting path to an x face are dropped.
/// Jacobi-preconditioned conjugate gradients to `tolerance` relative residual.
ConductionResult face_conductivity(const FaceConductivities& faces, double tolerance = 1e-10,
                                   int max_iterations = 100000);

/// Voxel form: per-voxel conductivity `k` (zero marks void) with
/// harmonic-mean faces.
ConductionResult voxel_conductivity(const std::vector<double>& k, int n,
                                    double tolerance = 1e-10, int max_iterations = 100000);

/// Homogenizes one phase of a unit cell. Each face conducts `k_phase` times
/// the phase fraction of that face, sampled on sub x sub points, so thin
/// walls keep their cross-section at moderate resolution.
ConductionResult conduction_homogenize(const GyroidSpec& spec, ConductionPhase phase,
                                       int resolution, double k_phase, double tolerance = 1e-10,
                                       int sub = 6);

}  // namespace tpms
