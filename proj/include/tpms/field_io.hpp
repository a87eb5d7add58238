#pragma once

#include <array>
#include <string>
#include <vector>

#include "tpms/grid.hpp"

namespace tpms {

/// Shortest decimal representation that round-trips to the same double.
std::string format_double(double v);

/// Legacy-ASCII VTK STRUCTURED_POINTS image holding one cell-data array.
struct VtkImage {
  std::array<int, 3> cells{1, 1, 1};
  Vec3 origin{0.0, 0.0, 0.0};
  Vec3 spacing{1.0, 1.0, 1.0};
  std::string name = "field";
  int components = 1;          ///< 1 for SCALARS, 3 for VECTORS
  std::vector<double> values;  ///< cell-major, components interleaved
};

void write_vtk(const std::string& path, const VtkImage& image);
VtkImage read_vtk(const std::string& path);

void write_vtk_scalar(const std::string& path, const StructuredGrid& grid, const ScalarField& f);
void write_vtk_vector(const std::string& path, const StructuredGrid& grid, const VectorField& f);

/// Flat CSV with header `i,j,k,value`.
void write_field_csv(const std::string& path, const StructuredGrid& grid, const ScalarField& f);
ScalarField read_field_csv(const std::string& path, const StructuredGrid& grid);

/// Writes `contents` to `path`, creating parent directories as needed.
void write_text_file(const std::string& path, const std::string& contents);
std::string read_text_file(const std::string& path);

}  // namespace tpms
