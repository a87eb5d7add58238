#include "tpms/field_io.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tpms/error.hpp"

namespace tpms {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_text_file(const std::string& path, const std::string& contents) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << contents;
  if (!out) throw Error("failed writing '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_vtk(const std::string& path, const VtkImage& image) {
  const std::size_t cells =
      static_cast<std::size_t>(image.cells[0]) * image.cells[1] * image.cells[2];
  if (image.values.size() != cells * image.components) {
    throw ContractError("VTK image value count does not match its dimensions");
  }
  std::string s;
  s += "# vtk DataFile Version 3.0\n";
  s += image.name + "\nASCII\nDATASET STRUCTURED_POINTS\n";
  s += "DIMENSIONS " + std::to_string(image.cells[0] + 1) + " " +
       std::to_string(image.cells[1] + 1) + " " + std::to_string(image.cells[2] + 1) + "\n";
  s += "ORIGIN " + format_double(image.origin[0]) + " " + format_double(image.origin[1]) + " " +
       format_double(image.origin[2]) + "\n";
  s += "SPACING " + format_double(image.spacing[0]) + " " + format_double(image.spacing[1]) +
       " " + format_double(image.spacing[2]) + "\n";
  s += "CELL_DATA " + std::to_string(cells) + "\n";
  if (image.components == 1) {
    s += "SCALARS " + image.name + " double 1\nLOOKUP_TABLE default\n";
    for (double v : image.values) s += format_double(v) + "\n";
  } else if (image.components == 3) {
    s += "VECTORS " + image.name + " double\n";
    for (std::size_t c = 0; c < cells; ++c) {
      s += format_double(image.values[3 * c]) + " " + format_double(image.values[3 * c + 1]) +
           " " + format_double(image.values[3 * c + 2]) + "\n";
    }
  } else {
    throw ContractError("VTK image must have 1 or 3 components");
  }
  write_text_file(path, s);
}

VtkImage read_vtk(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  auto fail = [&](const std::string& why) {
    throw InputError("'" + path + "' is not a structured-points VTK file: " + why);
  };
  if (!std::getline(in, line) || line.rfind("# vtk DataFile", 0) != 0) fail("missing header");
  VtkImage img;
  std::getline(in, img.name);
  std::string token;
  in >> token;
  if (token != "ASCII") fail("only ASCII files are supported");
  in >> token >> token;
  if (token != "STRUCTURED_POINTS") fail("dataset type " + token);
  std::array<int, 3> dims{};
  std::size_t count = 0;
  while (in >> token) {
    if (token == "DIMENSIONS") {
      in >> dims[0] >> dims[1] >> dims[2];
      for (int a = 0; a < 3; ++a) img.cells[a] = std::max(dims[a] - 1, 1);
    } else if (token == "ORIGIN") {
      in >> img.origin[0] >> img.origin[1] >> img.origin[2];
    } else if (token == "SPACING" || token == "ASPECT_RATIO") {
      in >> img.spacing[0] >> img.spacing[1] >> img.spacing[2];
    } else if (token == "CELL_DATA") {
      in >> count;
    } else if (token == "SCALARS") {
      std::string type;
      in >> img.name >> type;
      std::getline(in, line);
      const auto comps = line.find_first_not_of(' ');
      img.components = comps == std::string::npos ? 1 : std::stoi(line.substr(comps));
      in >> token;
      if (token != "LOOKUP_TABLE") fail("expected LOOKUP_TABLE");
      in >> token;
      break;
    } else if (token == "VECTORS") {
      std::string type;
      in >> img.name >> type;
      img.components = 3;
      break;
    } else {
      fail("unexpected token " + token);
    }
  }
  const std::size_t cells = static_cast<std::size_t>(img.cells[0]) * img.cells[1] * img.cells[2];
  if (count != cells) fail("CELL_DATA count does not match dimensions");
  img.values.resize(cells * img.components);
  for (auto& v : img.values) {
    if (!(in >> token)) fail("truncated data");
    v = std::stod(token);
  }
  return img;
}

namespace {

VtkImage image_for(const StructuredGrid& grid, const std::string& name, int components) {
  VtkImage img;
  img.cells = grid.dims();
  img.spacing = {grid.h(), grid.h(), grid.h()};
  img.name = name.empty() ? "field" : name;
  img.components = components;
  return img;
}

}  // namespace

void write_vtk_scalar(const std::string& path, const StructuredGrid& grid, const ScalarField& f) {
  if (static_cast<int>(f.size()) != grid.cell_count()) {
    throw ContractError("field size does not match the grid");
  }
  VtkImage img = image_for(grid, f.name, 1);
  img.values = f.values;
  write_vtk(path, img);
}

void write_vtk_vector(const std::string& path, const StructuredGrid& grid, const VectorField& f) {
  if (static_cast<int>(f.size()) != grid.cell_count()) {
    throw ContractError("field size does not match the grid");
  }
  VtkImage img = image_for(grid, f.name, 3);
  img.values.reserve(3 * f.size());
  for (const auto& v : f.values) img.values.insert(img.values.end(), v.begin(), v.end());
  write_vtk(path, img);
}

void write_field_csv(const std::string& path, const StructuredGrid& grid, const ScalarField& f) {
  if (static_cast<int>(f.size()) != grid.cell_count()) {
    throw ContractError("field size does not match the grid");
  }
  std::string s = "i,j,k,value\n";
  for (int c = 0; c < grid.cell_count(); ++c) {
    const auto p = grid.ijk(c);
    s += std::to_string(p[0]) + "," + std::to_string(p[1]) + "," + std::to_string(p[2]) + "," +
         format_double(f[c]) + "\n";
  }
  write_text_file(path, s);
}

ScalarField read_field_csv(const std::string& path, const StructuredGrid& grid) {
  std::istringstream in(read_text_file(path));
  std::string line;
  std::getline(in, line);
  if (line.rfind("i,j,k,value", 0) != 0) throw InputError("'" + path + "' lacks the i,j,k,value header");
  ScalarField f("field", "", grid.cell_count());
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::array<int, 3> p{};
    double v = 0.0;
    char c1 = 0, c2 = 0, c3 = 0;
    std::istringstream ls(line);
    if (!(ls >> p[0] >> c1 >> p[1] >> c2 >> p[2] >> c3 >> v) || !grid.contains(p)) {
      throw InputError("'" + path + "' row " + std::to_string(row) + " is malformed");
    }
    f[grid.index(p)] = v;
  }
  return f;
}

}  // namespace tpms
