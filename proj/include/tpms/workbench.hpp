#pragma once

#include <cstdint>
#include <exception>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tpms/filter.hpp"
#include "tpms/gyroid.hpp"
#include "tpms/metrics.hpp"
#include "tpms/optimizer.hpp"
#include "tpms/rve_table.hpp"
#include "tpms/trimesh.hpp"

namespace tpms {

inline constexpr const char* kToolVersion = "1.0.0";

/// Everything a solve, optimize, sweep or metrics run reads. JSON keys carry
/// their units; every key is optional and unknown keys are rejected.
struct RunConfig {
  /// Property-set file; empty fits the synthetic table of `synthetic_seed`.
  std::string properties_json;
  std::uint64_t synthetic_seed = 42;
  CounterflowLayout layout;
  BoundaryConditions bc;
  SolverConfig solver;
  /// Design for solve/metrics: a design JSON file, or a uniform gamma_hat.
  std::string design_json;
  double uniform_gamma_hat = 0.5;

  double w = 0.0;
  int max_iterations = 50;
  double change_tolerance = 1e-3;
  double filter_radius = 0.0;  ///< [m]; non-positive selects 1.5 h
  double initial_gamma = 0.5;
  MmaSettings mma;
  std::optional<ObjectiveScales> scales;

  std::vector<double> w_list{0.0, 0.25, 0.5, 1.0};
  int threads = 0;  ///< 0 reads TPMSOPT_THREADS

  std::vector<double> eta{0.05, 0.1, 0.15, 0.2, 0.25, 0.3};

  /// Relative paths resolve against `base_dir`.
  static RunConfig from_json(const std::string& text, const std::string& base_dir = ".");
  std::string to_json() const;
  void validate() const;

  StructuredGrid grid() const { return make_counterflow_grid(layout); }
  OptimizationProblem problem(const EffectivePropertySet& props) const;
};

/// Design file: grid regions, raw and filtered design and the offset range.
struct DesignFile {
  StructuredGrid grid;
  DesignField design;
  double cell_size = 4.6e-3;

  std::string to_json() const;
  static DesignFile from_json(const std::string& text);
  void save(const std::string& path) const;
  static DesignFile load(const std::string& path);
};

std::string sha256_hex(const std::string& data);
std::string sha256_file(const std::string& path);

struct RunManifest {
  std::string command;
  std::string config_json;  ///< resolved configuration snapshot
  std::map<std::string, std::string> inputs;   ///< absolute path -> digest
  std::map<std::string, std::string> outputs;  ///< run-relative path -> digest
  std::string tool_version = kToolVersion;
  std::string started_utc;
  std::string finished_utc;
  std::uint64_t seed = 0;

  std::string to_json() const;
  static RunManifest from_json(const std::string& text);
};

struct FitPropertiesArgs {
  std::string csv_path;                 ///< RVE table, or empty with a seed
  std::optional<std::uint64_t> synthetic_seed;
  std::string out_json = "properties.json";
  PropertyFitOptions options;
};

struct DehomogenizeArgs {
  std::string design_path;  ///< design JSON, or legacy VTK gamma_hat image
  int resolution = 16;      ///< voxels per gyroid cell
  std::string out_stl = "design.stl";
  /// Used for VTK input; design JSON carries its own.
  double cell_size = 4.6e-3;
  double c_min = 1.426e-3;
  double c_max = 3.75e-3;
  double partition_thickness = 0.5e-3;  ///< [m]
};

struct DehomogenizeResult {
  TriMesh mesh;
  GyroidSpec spec;
  double pinch_off = 0.0;  ///< largest connected offset [m]
  int partitions = 0;
};

/// Builds the graded wall mesh plus partition slabs without writing files.
/// Throws GeometryError listing cells whose offset reaches pinch-off and
/// MeshError when the result is not closed.
DehomogenizeResult dehomogenize(const DehomogenizeArgs& args);

/// Each command writes its outputs and a manifest, which it returns.
/// File-output commands (fit-properties, dehomogenize) place the manifest
/// next to the output as <file>.manifest.json, directory commands as
/// <dir>/manifest.json.
RunManifest cmd_fit_properties(const FitPropertiesArgs& args);
RunManifest cmd_solve(const RunConfig& config, const std::string& out_dir);
RunManifest cmd_optimize(const RunConfig& config, const std::string& out_dir);
RunManifest cmd_sweep(const RunConfig& config, const std::string& out_dir);
RunManifest cmd_metrics(const RunConfig& config, const std::string& out_dir);
RunManifest cmd_dehomogenize(const DehomogenizeArgs& args);

struct RerunReport {
  RunManifest manifest;
  std::vector<std::string> mismatched;  ///< outputs whose digest differs
  bool identical() const { return mismatched.empty(); }
};

/// Replays a manifest into `out_dir` after checking the input digests and
/// compares the output digests.
RerunReport cmd_rerun(const std::string& manifest_path, const std::string& out_dir);

/// 0 ok, 2 input, 3 non-convergence, 4 infeasible geometry, 5 invalid mesh,
/// 1 anything else.
int exit_code(const std::exception& e);

}  // namespace tpms
