#include "tpms/workbench.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <set>
#include <sstream>

#include "tpms/error.hpp"
#include "tpms/field_io.hpp"
#include "tpms/gyroid.hpp"
#include "tpms/rve_table.hpp"

namespace tpms {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(what + ": " + e.what());
  }
}

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw InputError(where + " must be a JSON object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items()) {
    if (!ok.count(k)) throw InputError("unknown key '" + k + "' in " + where);
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw InputError("bad value for '" + std::string(key) + "' in " + where);
  }
}

template <class T>
void read_pair(const json& j, const char* key, std::array<T, 2>& out, const std::string& where) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  try {
    if (v.is_array()) {
      if (v.size() != 2) throw InputError("'" + std::string(key) + "' in " + where + " needs two entries");
      out = {v[0].get<T>(), v[1].get<T>()};
    } else {
      out = {v.get<T>(), v.get<T>()};
    }
  } catch (const json::exception&) {
    throw InputError("bad value for '" + std::string(key) + "' in " + where);
  }
}

std::string resolve(const std::string& path, const std::string& base) {
  if (path.empty()) return path;
  fs::path p(path);
  if (p.is_relative()) p = fs::path(base) / p;
  return fs::weakly_canonical(p).string();
}

/// Output bookkeeping for one run directory.
struct RunWriter {
  fs::path root;
  RunManifest manifest;

  RunWriter(const std::string& dir, std::string command) : root(dir) {
    fs::create_directories(root);
    manifest.command = std::move(command);
    manifest.started_utc = utc_now();
  }
  std::string path(const std::string& rel) const { return (root / rel).string(); }
  void record(const std::string& rel) { manifest.outputs[rel] = sha256_file(path(rel)); }
  void text(const std::string& rel, const std::string& contents) {
    write_text_file(path(rel), contents);
    record(rel);
  }
  void input(const std::string& p) {
    if (!p.empty()) manifest.inputs[p] = sha256_file(p);
  }
  RunManifest finish(const std::string& manifest_rel = "manifest.json") {
    manifest.finished_utc = utc_now();
    write_text_file(path(manifest_rel), manifest.to_json());
    return manifest;
  }
};

EffectivePropertySet load_properties(const RunConfig& cfg, RunWriter& w) {
  if (!cfg.properties_json.empty()) {
    if (!fs::exists(cfg.properties_json)) {
      throw InputError("property file '" + cfg.properties_json + "' does not exist");
    }
    w.input(cfg.properties_json);
    auto props = EffectivePropertySet::load(cfg.properties_json);
    props.validate(false);
    return props;
  }
  w.manifest.seed = cfg.synthetic_seed;
  const auto table = generate_synthetic_rve_table(cfg.synthetic_seed);
  auto props = fit_properties(table, {});
  props.validate(true);
  w.text("properties.json", props.to_json());
  return props;
}

void write_state(RunWriter& w, const PorousModel& model, const State& s, const ScalarField& gamma_hat) {
  const auto& grid = model.grid();
  for (int f = 0; f < 2; ++f) {
    const std::string tag = std::to_string(f + 1);
    write_vtk_vector(w.path("U" + tag + ".vtk"), grid, model.velocity(s, f));
    w.record("U" + tag + ".vtk");
    write_vtk_scalar(w.path("p" + tag + ".vtk"), grid, model.pressure(s, f));
    w.record("p" + tag + ".vtk");
  }
  static const char* names[] = {"T1.vtk", "T2.vtk", "Tw.vtk"};
  for (int t = 0; t < 3; ++t) {
    write_vtk_scalar(w.path(names[t]), grid, model.temperature(s, t));
    w.record(names[t]);
  }
  write_vtk_scalar(w.path("gamma_hat.vtk"), grid, gamma_hat);
  w.record("gamma_hat.vtk");
  std::ostringstream hist;
  hist << "iteration,fluid1,fluid2\n";
  const std::size_t n = std::max(s.flow_history[0].size(), s.flow_history[1].size());
  for (std::size_t i = 0; i < n; ++i) {
    hist << i << ',' << (i < s.flow_history[0].size() ? format_double(s.flow_history[0][i]) : "") << ','
         << (i < s.flow_history[1].size() ? format_double(s.flow_history[1][i]) : "") << '\n';
  }
  w.text("residuals.csv", hist.str());
}

/// gamma_hat for solve/metrics from the config.
ScalarField config_design(const RunConfig& cfg, const StructuredGrid& grid, RunWriter& w) {
  if (cfg.design_json.empty()) {
    return DesignField::uniform(grid, cfg.uniform_gamma_hat, cfg.filter_radius > 0 ? cfg.filter_radius : 1.5 * grid.h(),
                                0.0, 1.0)
        .gamma_hat;
  }
  w.input(cfg.design_json);
  const auto d = DesignFile::load(cfg.design_json);
  if (!(d.grid == grid)) throw InputError("design file grid does not match the configured grid");
  return d.design.gamma_hat;
}

MetricsReport metrics_with_baseline(const PorousModel& model, const State& s, const ScalarField& gamma_hat,
                                    const RunConfig& cfg) {
  const Baseline base = uniform_baseline(model);
  return dimensionless_suite(model, s, gamma_hat, base, cfg.eta);
}

std::string pinch_cells_message(const std::vector<int>& cells) {
  std::ostringstream out;
  out << "offset reaches fluid pinch-off in " << cells.size() << " cell(s):";
  for (std::size_t i = 0; i < cells.size() && i < 20; ++i) out << ' ' << cells[i];
  if (cells.size() > 20) out << " ...";
  return out.str();
}

}  // namespace

// ---------------------------------------------------------------- config

RunConfig RunConfig::from_json(const std::string& text, const std::string& base_dir) {
  const json j = parse_json(text, "config");
  RunConfig c;
  check_keys(j, "config",
             {"properties_json", "synthetic_seed", "geometry", "boundary", "solver", "materials", "design",
              "optimization", "sweep", "metrics"});
  read(j, "properties_json", c.properties_json, "config");
  c.properties_json = resolve(c.properties_json, base_dir);
  read(j, "synthetic_seed", c.synthetic_seed, "config");
  if (j.contains("geometry")) {
    const auto& g = j["geometry"];
    check_keys(g, "geometry", {"cell_size_m", "core_cells_x", "core_cells_y", "cells_z", "plenum_rows"});
    read(g, "cell_size_m", c.layout.cell_size, "geometry");
    read(g, "core_cells_x", c.layout.core_x, "geometry");
    read(g, "core_cells_y", c.layout.core_y, "geometry");
    read(g, "cells_z", c.layout.cells_z, "geometry");
    read(g, "plenum_rows", c.layout.plenum_rows, "geometry");
  }
  if (j.contains("boundary")) {
    const auto& b = j["boundary"];
    check_keys(b, "boundary", {"u_in_m_per_s", "T_in_K", "p_out_Pa"});
    read_pair(b, "u_in_m_per_s", c.bc.inlet_speed, "boundary");
    read_pair(b, "T_in_K", c.bc.inlet_temperature, "boundary");
    read_pair(b, "p_out_Pa", c.bc.outlet_pressure, "boundary");
  }
  if (j.contains("solver")) {
    const auto& s = j["solver"];
    check_keys(s, "solver",
               {"convection", "relax_momentum", "relax_pressure", "relax_energy", "picard_tolerance", "tolerance",
                "max_iterations", "no_slip_walls", "speed_smoothing_m_per_s"});
    read(s, "convection", c.solver.convection, "solver");
    read(s, "relax_momentum", c.solver.relax_momentum, "solver");
    read(s, "relax_pressure", c.solver.relax_pressure, "solver");
    read(s, "relax_energy", c.solver.relax_energy, "solver");
    read(s, "picard_tolerance", c.solver.picard_tolerance, "solver");
    read(s, "tolerance", c.solver.tolerance, "solver");
    read(s, "max_iterations", c.solver.max_iterations, "solver");
    read(s, "no_slip_walls", c.solver.no_slip_walls, "solver");
    read(s, "speed_smoothing_m_per_s", c.solver.speed_smoothing, "solver");
  }
  if (j.contains("materials")) {
    const auto& m = j["materials"];
    check_keys(m, "materials", {"rho_kg_per_m3", "mu_Pa_s", "cp_J_per_kgK", "k_f_W_per_mK", "k_s_W_per_mK"});
    auto& mat = c.solver.materials;
    read(m, "rho_kg_per_m3", mat.rho, "materials");
    read(m, "mu_Pa_s", mat.mu, "materials");
    read(m, "cp_J_per_kgK", mat.cp, "materials");
    read(m, "k_f_W_per_mK", mat.k_f, "materials");
    read(m, "k_s_W_per_mK", mat.k_s, "materials");
  }
  if (j.contains("design")) {
    const auto& d = j["design"];
    check_keys(d, "design", {"file", "gamma_hat"});
    read(d, "file", c.design_json, "design");
    c.design_json = resolve(c.design_json, base_dir);
    read(d, "gamma_hat", c.uniform_gamma_hat, "design");
  }
  if (j.contains("optimization")) {
    const auto& o = j["optimization"];
    check_keys(o, "optimization",
               {"w", "max_iterations", "change_tolerance", "filter_radius_m", "initial_gamma", "q_ref_W",
                "dp_ref_Pa", "mma"});
    read(o, "w", c.w, "optimization");
    read(o, "max_iterations", c.max_iterations, "optimization");
    read(o, "change_tolerance", c.change_tolerance, "optimization");
    read(o, "filter_radius_m", c.filter_radius, "optimization");
    read(o, "initial_gamma", c.initial_gamma, "optimization");
    if (o.contains("q_ref_W") != o.contains("dp_ref_Pa")) {
      throw InputError("optimization needs both q_ref_W and dp_ref_Pa or neither");
    }
    if (o.contains("q_ref_W")) {
      ObjectiveScales s;
      read(o, "q_ref_W", s.q_ref, "optimization");
      read(o, "dp_ref_Pa", s.dp_ref, "optimization");
      c.scales = s;
    }
    if (o.contains("mma")) {
      const auto& m = o["mma"];
      check_keys(m, "mma", {"asymptote_init", "asymptote_incr", "asymptote_decr", "asymptote_min",
                              "asymptote_max", "move_limit", "raa0"});
      read(m, "asymptote_init", c.mma.asymptote_init, "mma");
      read(m, "asymptote_incr", c.mma.asymptote_incr, "mma");
      read(m, "asymptote_decr", c.mma.asymptote_decr, "mma");
      read(m, "asymptote_min", c.mma.asymptote_min, "mma");
      read(m, "asymptote_max", c.mma.asymptote_max, "mma");
      read(m, "move_limit", c.mma.move_limit, "mma");
      read(m, "raa0", c.mma.raa0, "mma");
    }
  }
  if (j.contains("sweep")) {
    const auto& s = j["sweep"];
    check_keys(s, "sweep", {"w_list", "threads"});
    read(s, "w_list", c.w_list, "sweep");
    read(s, "threads", c.threads, "sweep");
  }
  if (j.contains("metrics")) {
    const auto& m = j["metrics"];
    check_keys(m, "metrics", {"eta"});
    read(m, "eta", c.eta, "metrics");
  }
  c.validate();
  return c;
}

std::string RunConfig::to_json() const {
  json j;
  j["properties_json"] = properties_json;
  j["synthetic_seed"] = synthetic_seed;
  j["geometry"] = {{"cell_size_m", layout.cell_size},
                   {"core_cells_x", layout.core_x},
                   {"core_cells_y", layout.core_y},
                   {"cells_z", layout.cells_z},
                   {"plenum_rows", layout.plenum_rows}};
  j["boundary"] = {{"u_in_m_per_s", bc.inlet_speed},
                   {"T_in_K", bc.inlet_temperature},
                   {"p_out_Pa", bc.outlet_pressure}};
  j["solver"] = {{"convection", solver.convection},
                 {"relax_momentum", solver.relax_momentum},
                 {"relax_pressure", solver.relax_pressure},
                 {"relax_energy", solver.relax_energy},
                 {"picard_tolerance", solver.picard_tolerance},
                 {"tolerance", solver.tolerance},
                 {"max_iterations", solver.max_iterations},
                 {"no_slip_walls", solver.no_slip_walls},
                 {"speed_smoothing_m_per_s", solver.speed_smoothing}};
  const auto& m = solver.materials;
  j["materials"] = {{"rho_kg_per_m3", m.rho},
                    {"mu_Pa_s", m.mu},
                    {"cp_J_per_kgK", m.cp},
                    {"k_f_W_per_mK", m.k_f},
                    {"k_s_W_per_mK", m.k_s}};
  j["design"] = {{"file", design_json}, {"gamma_hat", uniform_gamma_hat}};
  json o = {{"w", w},
            {"max_iterations", max_iterations},
            {"change_tolerance", change_tolerance},
            {"filter_radius_m", filter_radius},
            {"initial_gamma", initial_gamma},
            {"mma",
             {{"asymptote_init", mma.asymptote_init},
              {"asymptote_incr", mma.asymptote_incr},
              {"asymptote_decr", mma.asymptote_decr},
              {"asymptote_min", mma.asymptote_min},
              {"asymptote_max", mma.asymptote_max},
              {"move_limit", mma.move_limit},
              {"raa0", mma.raa0}}}};
  if (scales) {
    o["q_ref_W"] = scales->q_ref;
    o["dp_ref_Pa"] = scales->dp_ref;
  }
  j["optimization"] = o;
  j["sweep"] = {{"w_list", w_list}, {"threads", threads}};
  j["metrics"] = {{"eta", eta}};
  return j.dump(2) + "\n";
}

void RunConfig::validate() const {
  if (layout.core_x < 2 || layout.core_y < 1 || layout.cells_z < 1 || layout.plenum_rows < 1) {
    throw InputError("geometry needs core_cells_x >= 2, core_cells_y >= 1, cells_z >= 1, plenum_rows >= 1");
  }
  if (!(layout.cell_size > 0.0)) throw InputError("cell_size_m must be positive");
  solver.validate();
  mma.validate();
  if (!(uniform_gamma_hat >= 0.0 && uniform_gamma_hat <= 1.0)) throw InputError("design gamma_hat must lie in [0, 1]");
  if (!(w >= 0.0)) throw InputError("w must be non-negative");
  if (w_list.empty()) throw InputError("sweep w_list is empty");
  for (double x : w_list) {
    if (!(x >= 0.0)) throw InputError("sweep weighting factors must be non-negative");
  }
  if (max_iterations < 0) throw InputError("optimization max_iterations must be non-negative");
  if (!(initial_gamma >= 0.0 && initial_gamma <= 1.0)) throw InputError("initial_gamma must lie in [0, 1]");
  for (double e : eta) {
    if (!(e > 0.0 && e < 1.0)) throw InputError("metrics eta values must lie in (0, 1)");
  }
}

OptimizationProblem RunConfig::problem(const EffectivePropertySet& props) const {
  OptimizationProblem p;
  p.grid = grid();
  p.props = props;
  p.bc = bc;
  p.solver = solver;
  p.w = w;
  p.max_iterations = max_iterations;
  p.change_tolerance = change_tolerance;
  p.filter_radius = filter_radius;
  p.initial_gamma = initial_gamma;
  p.mma = mma;
  p.scales = scales;
  return p;
}

// ---------------------------------------------------------------- design file

std::string DesignFile::to_json() const {
  json j;
  j["format"] = "tpmsopt-design";
  j["version"] = 1;
  j["cells"] = grid.dims();
  j["h_m"] = grid.h();
  std::vector<int> regions(grid.cell_count());
  for (int c = 0; c < grid.cell_count(); ++c) regions[c] = static_cast<int>(grid.region(c));
  j["regions"] = regions;
  json patches = json::array();
  for (const auto& p : grid.patches()) {
    patches.push_back({{"fluid", p.fluid},
                       {"kind", p.kind == PatchKind::Inlet ? "inlet" : "outlet"},
                       {"side", to_string(p.side)},
                       {"cells", p.cells}});
  }
  j["patches"] = patches;
  j["cell_size_m"] = cell_size;
  j["c_min_m"] = design.c_min;
  j["c_max_m"] = design.c_max;
  j["filter_radius_m"] = design.filter_radius;
  j["gamma"] = design.gamma.values;
  j["gamma_hat"] = design.gamma_hat.values;
  return j.dump() + "\n";
}

DesignFile DesignFile::from_json(const std::string& text) {
  const json j = parse_json(text, "design file");
  if (!j.is_object() || j.value("format", "") != "tpmsopt-design") {
    throw InputError("not a design file (format tag missing)");
  }
  DesignFile d;
  try {
    const auto cells = j.at("cells").get<std::array<int, 3>>();
    d.grid = StructuredGrid(cells[0], cells[1], cells[2], j.at("h_m").get<double>());
    const auto regions = j.at("regions").get<std::vector<int>>();
    if (static_cast<int>(regions.size()) != d.grid.cell_count()) throw InputError("design file region count mismatch");
    for (int c = 0; c < d.grid.cell_count(); ++c) {
      if (regions[c] < 0 || regions[c] > 2) throw InputError("design file has an unknown region tag");
      d.grid.set_region(c, static_cast<Region>(regions[c]));
    }
    for (const auto& p : j.at("patches")) {
      FacePatch fp;
      fp.fluid = p.at("fluid").get<int>();
      const std::string kind = p.at("kind").get<std::string>();
      if (kind != "inlet" && kind != "outlet") throw InputError("design file patch kind must be inlet or outlet");
      fp.kind = kind == "inlet" ? PatchKind::Inlet : PatchKind::Outlet;
      fp.side = side_from_string(p.at("side").get<std::string>());
      fp.cells = p.at("cells").get<std::vector<int>>();
      d.grid.add_patch(std::move(fp));
    }
    d.cell_size = j.at("cell_size_m").get<double>();
    d.design.c_min = j.at("c_min_m").get<double>();
    d.design.c_max = j.at("c_max_m").get<double>();
    d.design.filter_radius = j.at("filter_radius_m").get<double>();
    d.design.gamma = ScalarField("gamma", "1", 0);
    d.design.gamma.values = j.at("gamma").get<std::vector<double>>();
    d.design.gamma_hat = ScalarField("gamma_hat", "1", 0);
    d.design.gamma_hat.values = j.at("gamma_hat").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw InputError(std::string("design file: ") + e.what());
  }
  d.grid.validate();
  d.design.validate(d.grid);
  return d;
}

void DesignFile::save(const std::string& path) const { write_text_file(path, to_json()); }

DesignFile DesignFile::load(const std::string& path) { return from_json(read_text_file(path)); }

// ---------------------------------------------------------------- digests & manifest

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return out.str();
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

std::string RunManifest::to_json() const {
  json j;
  j["format"] = "tpmsopt-manifest";
  j["command"] = command;
  j["config"] = json::parse(config_json);
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  j["tool_version"] = tool_version;
  j["started_utc"] = started_utc;
  j["finished_utc"] = finished_utc;
  j["seed"] = seed;
  return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(const std::string& text) {
  const json j = parse_json(text, "manifest");
  if (!j.is_object() || j.value("format", "") != "tpmsopt-manifest") throw InputError("not a run manifest");
  RunManifest m;
  try {
    m.command = j.at("command").get<std::string>();
    m.config_json = j.at("config").dump();
    m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
    m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
    m.tool_version = j.at("tool_version").get<std::string>();
    m.started_utc = j.value("started_utc", "");
    m.finished_utc = j.value("finished_utc", "");
    m.seed = j.value("seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw InputError(std::string("manifest: ") + e.what());
  }
  return m;
}

// ---------------------------------------------------------------- commands

namespace {

json fit_args_json(const FitPropertiesArgs& a) {
  json j;
  j["csv"] = a.csv_path;
  if (a.synthetic_seed) j["synthetic_seed"] = *a.synthetic_seed;
  j["out"] = fs::path(a.out_json).filename().string();
  j["scalar_degree"] = a.options.scalar_degree;
  j["resistance_degree"] = a.options.resistance_degree;
  j["conduction_resolution"] = a.options.conduction_resolution;
  j["h_deg_gamma"] = a.options.h_surface.deg_gamma;
  j["h_deg_speed"] = a.options.h_surface.deg_speed;
  j["h_folds"] = a.options.h_surface.folds;
  return j;
}

FitPropertiesArgs fit_args_from_json(const json& j) {
  FitPropertiesArgs a;
  a.csv_path = j.value("csv", "");
  if (j.contains("synthetic_seed")) a.synthetic_seed = j["synthetic_seed"].get<std::uint64_t>();
  a.out_json = j.value("out", "properties.json");
  a.options.scalar_degree = j.value("scalar_degree", 2);
  a.options.resistance_degree = j.value("resistance_degree", 3);
  a.options.conduction_resolution = j.value("conduction_resolution", 32);
  a.options.h_surface.deg_gamma = j.value("h_deg_gamma", -1);
  a.options.h_surface.deg_speed = j.value("h_deg_speed", -1);
  a.options.h_surface.folds = j.value("h_folds", 5);
  return a;
}

json dehom_args_json(const DehomogenizeArgs& a) {
  return {{"design", a.design_path},
          {"resolution", a.resolution},
          {"out", fs::path(a.out_stl).filename().string()},
          {"cell_size_m", a.cell_size},
          {"c_min_m", a.c_min},
          {"c_max_m", a.c_max},
          {"partition_thickness_m", a.partition_thickness}};
}

DehomogenizeArgs dehom_args_from_json(const json& j) {
  DehomogenizeArgs a;
  a.design_path = j.at("design").get<std::string>();
  a.resolution = j.at("resolution").get<int>();
  a.out_stl = j.value("out", "design.stl");
  a.cell_size = j.at("cell_size_m").get<double>();
  a.c_min = j.at("c_min_m").get<double>();
  a.c_max = j.at("c_max_m").get<double>();
  a.partition_thickness = j.at("partition_thickness_m").get<double>();
  return a;
}

std::string parent_dir(const std::string& file) {
  const fs::path p = fs::path(file).parent_path();
  return p.empty() ? std::string(".") : p.string();
}

}  // namespace

RunManifest cmd_fit_properties(const FitPropertiesArgs& args_in) {
  FitPropertiesArgs args = args_in;
  if (args.csv_path.empty() == !args.synthetic_seed.has_value()) {
    throw InputError("fit-properties needs exactly one of an RVE CSV or a synthetic seed");
  }
  if (!args.csv_path.empty()) args.csv_path = resolve(args.csv_path, ".");
  const std::string file = fs::path(args.out_json).filename().string();
  RunWriter w(parent_dir(args.out_json), "fit-properties");
  w.manifest.config_json = fit_args_json(args).dump();
  RveSampleTable table;
  if (args.synthetic_seed) {
    w.manifest.seed = *args.synthetic_seed;
    table = generate_synthetic_rve_table(*args.synthetic_seed);
    write_rve_csv(w.path(file + ".table.csv"), table);
    w.record(file + ".table.csv");
  } else {
    w.input(args.csv_path);
    table = read_rve_csv(args.csv_path);
  }
  PropertyFitReport report;
  const auto props = fit_properties(table, args.options, &report);
  w.text(file + ".report.json", report.to_json());
  if (!report.invariant_violations.empty()) {
    std::string msg = "fitted properties violate invariants:";
    for (const auto& v : report.invariant_violations) msg += "\n  " + v;
    w.finish(file + ".manifest.json");
    throw InputError(msg);
  }
  w.text(file, props.to_json());
  return w.finish(file + ".manifest.json");
}

RunManifest cmd_solve(const RunConfig& cfg, const std::string& out_dir) {
  RunWriter w(out_dir, "solve");
  w.manifest.config_json = cfg.to_json();
  const auto props = load_properties(cfg, w);
  const auto grid = cfg.grid();
  const PorousModel model(grid, props, cfg.bc, cfg.solver);
  const ScalarField gh = config_design(cfg, grid, w);
  State s;
  try {
    s = model.solve(gh);
  } catch (const ConvergenceError& e) {
    std::ostringstream hist;
    hist << "iteration,relative_residual\n";
    for (std::size_t i = 0; i < e.residual_history().size(); ++i) {
      hist << i << ',' << format_double(e.residual_history()[i]) << '\n';
    }
    w.text("residual_history.csv", hist.str());
    w.finish();
    throw ConvergenceError(std::string(e.what()) + " (history: " + w.path("residual_history.csv") + ")",
                           e.residual_history());
  }
  write_state(w, model, s, gh);
  const auto report = metrics_with_baseline(model, s, gh, cfg);
  w.text("metrics.json", report.to_json());
  const auto obj = model.objective(s, gh, cfg.w);
  json o = {{"Q_W", obj.q}, {"dp_Pa", obj.dp}, {"Q_ave_W", obj.q_ave}, {"dp_ave_Pa", obj.dp_ave},
            {"wall_regularized", s.wall_regularized}};
  w.text("objective.json", o.dump(2) + "\n");
  return w.finish();
}

namespace {

void write_trace(RunWriter& w, const std::string& prefix, const OptimizationTrace& t, const StructuredGrid& grid,
                 double cell_size) {
  w.text(prefix + "trace.csv", t.to_csv());
  DesignFile d{grid, t.final_design, cell_size};
  w.text(prefix + "design.json", d.to_json());
  write_vtk_scalar(w.path(prefix + "gamma.vtk"), grid, t.final_design.gamma);
  w.record(prefix + "gamma.vtk");
  write_vtk_scalar(w.path(prefix + "design_gamma_hat.vtk"), grid, t.final_design.gamma_hat);
  w.record(prefix + "design_gamma_hat.vtk");
}

}  // namespace

RunManifest cmd_optimize(const RunConfig& cfg, const std::string& out_dir) {
  RunWriter w(out_dir, "optimize");
  w.manifest.config_json = cfg.to_json();
  const auto props = load_properties(cfg, w);
  const auto problem = cfg.problem(props);
  const auto trace = optimize(problem);
  write_trace(w, "", trace, problem.grid, props.cell_size);
  if (trace.aborted) {
    w.finish();
    throw ConvergenceError("optimization aborted: " + trace.error, {});
  }
  const PorousModel model(problem.grid, props, cfg.bc, cfg.solver);
  // The filter output is re-evaluated so the fields match the stored design.
  const ScalarField& gh = trace.final_design.gamma_hat;
  const State s = model.solve(gh);
  write_state(w, model, s, gh);
  auto report = metrics_with_baseline(model, s, gh, cfg);
  const ScalarField uni = DesignField::uniform(problem.grid, problem.initial_gamma,
                                               problem.effective_filter_radius(), props.c_min, props.c_max)
                              .gamma_hat;
  const auto uni_u = velocity_uniformity(model, model.solve(uni), 0, cfg.eta);
  const std::size_t k = cfg.eta.size() - 1;
  if (uni_u.f_low[k] > 0.0) report.improvement_rate = improvement_rate(report.uniformity.f_low[k], uni_u.f_low[k]);
  w.text("metrics.json", report.to_json());
  return w.finish();
}

RunManifest cmd_sweep(const RunConfig& cfg, const std::string& out_dir) {
  RunWriter w(out_dir, "sweep");
  w.manifest.config_json = cfg.to_json();
  const auto props = load_properties(cfg, w);
  const auto problem = cfg.problem(props);
  const auto traces = sweep(problem, cfg.w_list, cfg.threads);
  for (std::size_t i = 0; i < traces.size(); ++i) {
    write_trace(w, "w" + std::to_string(i) + "_", traces[i], problem.grid, props.cell_size);
  }
  w.text("pareto.csv", pareto_csv(traces));
  std::string failed;
  for (const auto& t : traces) {
    if (t.aborted) failed += "\n  w=" + format_double(t.w) + ": " + t.error;
  }
  w.finish();
  if (!failed.empty()) throw ConvergenceError("sweep runs failed:" + failed, {});
  return w.manifest;
}

RunManifest cmd_metrics(const RunConfig& cfg, const std::string& out_dir) {
  RunWriter w(out_dir, "metrics");
  w.manifest.config_json = cfg.to_json();
  const auto props = load_properties(cfg, w);
  const auto grid = cfg.grid();
  const PorousModel model(grid, props, cfg.bc, cfg.solver);
  const ScalarField gh = config_design(cfg, grid, w);
  const State s = model.solve(gh);
  const auto report = metrics_with_baseline(model, s, gh, cfg);
  w.text("metrics.json", report.to_json());
  w.text("metrics.csv", MetricsReport::csv_header() + "\n" + report.csv_row() + "\n");
  std::ostringstream u;
  u << "eta,f_low\n";
  for (std::size_t i = 0; i < report.uniformity.eta.size(); ++i) {
    u << format_double(report.uniformity.eta[i]) << ',' << format_double(report.uniformity.f_low[i]) << '\n';
  }
  w.text("uniformity.csv", u.str());
  return w.finish();
}

DehomogenizeResult dehomogenize(const DehomogenizeArgs& args) {
  if (args.resolution < 8) throw InputError("dehomogenize resolution must be at least 8 voxels per cell");
  if (!(args.partition_thickness > 0.0)) throw InputError("partition thickness must be positive");
  StructuredGrid grid;
  ScalarField gh;
  double cell_size = args.cell_size, c_min = args.c_min, c_max = args.c_max;
  const std::string ext = fs::path(args.design_path).extension().string();
  Vec3 origin{0.0, 0.0, 0.0};
  if (ext == ".vtk") {
    const VtkImage img = read_vtk(args.design_path);
    if (img.components != 1) throw InputError("design image must hold a scalar field");
    if (img.spacing[0] != img.spacing[1] || img.spacing[0] != img.spacing[2]) {
      throw InputError("design image spacing must be isotropic");
    }
    grid = StructuredGrid(img.cells[0], img.cells[1], img.cells[2], img.spacing[0]);
    gh = ScalarField("gamma_hat", "1", grid.cell_count());
    gh.values = img.values;
    origin = img.origin;
  } else {
    const DesignFile d = DesignFile::load(args.design_path);
    grid = d.grid;
    gh = d.design.gamma_hat;
    cell_size = d.cell_size;
    c_min = d.design.c_min;
    c_max = d.design.c_max;
  }
  if (!(c_min >= 0.0 && c_min < c_max) || !(cell_size > 0.0)) throw InputError("invalid offset range or cell size");
  const auto core = grid.core_cells();
  if (core.empty()) throw InputError("design has no core cells");
  std::array<int, 3> lo{grid.nx(), grid.ny(), grid.nz()}, hi{-1, -1, -1};
  for (int c : core) {
    if (!(gh[c] >= 0.0 && gh[c] <= 1.0)) throw InputError("design gamma_hat must lie in [0, 1]");
    const auto p = grid.ijk(c);
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  }

  DehomogenizeResult r;
  r.pinch_off = pinch_off_offset(cell_size);
  std::vector<int> pinched;
  OffsetField field;
  field.spacing = grid.h();
  field.lo = c_min;
  field.hi = c_max;
  for (int a = 0; a < 3; ++a) {
    field.cells[a] = hi[a] - lo[a] + 1;
    field.origin[a] = origin[a] + lo[a] * grid.h();
  }
  field.values.assign(static_cast<std::size_t>(field.cells[0]) * field.cells[1] * field.cells[2], c_min);
  for (int c : core) {
    const auto p = grid.ijk(c);
    const double cv = c_min + gh[c] * (c_max - c_min);
    if (cv >= r.pinch_off) pinched.push_back(c);
    field.values[(p[0] - lo[0]) + field.cells[0] * ((p[1] - lo[1]) + field.cells[1] * (p[2] - lo[2]))] = cv;
  }
  if (!pinched.empty()) throw GeometryError(pinch_cells_message(pinched), pinched);

  r.spec = GyroidSpec::with_field(cell_size, field);
  r.mesh = extract_wall(r.spec, args.resolution);

  const double t = args.partition_thickness;
  std::vector<Box> slabs;
  for (int c = 0; c < grid.cell_count(); ++c) {
    const auto p = grid.ijk(c);
    for (int a = 0; a < 3; ++a) {
      auto q = p;
      q[a] += 1;
      if (!grid.contains(q)) continue;
      const Region ra = grid.region(c), rb = grid.region(grid.index(q));
      const bool split = (ra == Region::Fluid1Plenum && rb == Region::Fluid2Plenum) ||
                         (ra == Region::Fluid2Plenum && rb == Region::Fluid1Plenum);
      if (!split) continue;
      Box b;
      for (int e = 0; e < 3; ++e) {
        b.lo[e] = origin[e] + p[e] * grid.h();
        b.hi[e] = b.lo[e] + grid.h();
      }
      const double plane = origin[a] + q[a] * grid.h();
      b.lo[a] = plane - 0.5 * t;
      b.hi[a] = plane + 0.5 * t;
      slabs.push_back(b);
      ++r.partitions;
    }
  }
  r.mesh.append(box_union_mesh(slabs, SurfaceLabel::Partition));
  validate_closed(r.mesh);
  return r;
}

RunManifest cmd_dehomogenize(const DehomogenizeArgs& args_in) {
  DehomogenizeArgs args = args_in;
  args.design_path = resolve(args.design_path, ".");
  const std::string file = fs::path(args.out_stl).filename().string();
  RunWriter w(parent_dir(args.out_stl), "dehomogenize");
  w.manifest.config_json = dehom_args_json(args).dump();
  w.input(args.design_path);
  const auto r = dehomogenize(args);
  export_stl(r.mesh, w.path(file), true);
  w.record(file);
  return w.finish(file + ".manifest.json");
}

RerunReport cmd_rerun(const std::string& manifest_path, const std::string& out_dir) {
  const RunManifest old = RunManifest::from_json(read_text_file(manifest_path));
  for (const auto& [path, digest] : old.inputs) {
    if (!fs::exists(path)) throw InputError("manifest input '" + path + "' is missing");
    if (sha256_file(path) != digest) throw InputError("manifest input '" + path + "' has changed");
  }
  const json cfg = parse_json(old.config_json, "manifest config");
  RerunReport rep;
  if (old.command == "fit-properties") {
    auto a = fit_args_from_json(cfg);
    a.out_json = (fs::path(out_dir) / a.out_json).string();
    rep.manifest = cmd_fit_properties(a);
  } else if (old.command == "dehomogenize") {
    auto a = dehom_args_from_json(cfg);
    a.out_stl = (fs::path(out_dir) / a.out_stl).string();
    rep.manifest = cmd_dehomogenize(a);
  } else {
    const RunConfig rc = RunConfig::from_json(old.config_json);
    if (old.command == "solve") {
      rep.manifest = cmd_solve(rc, out_dir);
    } else if (old.command == "optimize") {
      rep.manifest = cmd_optimize(rc, out_dir);
    } else if (old.command == "sweep") {
      rep.manifest = cmd_sweep(rc, out_dir);
    } else if (old.command == "metrics") {
      rep.manifest = cmd_metrics(rc, out_dir);
    } else {
      throw InputError("manifest names an unknown command '" + old.command + "'");
    }
  }
  for (const auto& [rel, digest] : old.outputs) {
    const auto it = rep.manifest.outputs.find(rel);
    if (it == rep.manifest.outputs.end() || it->second != digest) rep.mismatched.push_back(rel);
  }
  for (const auto& [rel, digest] : rep.manifest.outputs) {
    if (!old.outputs.count(rel)) rep.mismatched.push_back(rel);
  }
  return rep;
}

int exit_code(const std::exception& e) {
  if (dynamic_cast<const InputError*>(&e)) return 2;
  if (dynamic_cast<const ConvergenceError*>(&e)) return 3;
  if (dynamic_cast<const GeometryError*>(&e)) return 4;
  if (dynamic_cast<const MeshError*>(&e)) return 5;
  return 1;
}

}  // namespace tpms
