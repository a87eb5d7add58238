#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "tpms/error.hpp"
#include "tpms/field_io.hpp"
#include "tpms/workbench.hpp"

namespace {

tpms::RunConfig load_config(const std::string& path) {
  if (path.empty()) return {};
  const std::string base = std::filesystem::path(path).parent_path().string();
  return tpms::RunConfig::from_json(tpms::read_text_file(path), base.empty() ? "." : base);
}

void print_outputs(const tpms::RunManifest& m) {
  for (const auto& [rel, digest] : m.outputs) std::cout << "  " << rel << "  " << digest.substr(0, 12) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graded gyroid heat-exchanger optimization workbench"};
  app.require_subcommand(1);
  app.set_version_flag("--version", tpms::kToolVersion);

  tpms::FitPropertiesArgs fit;
  std::uint64_t seed = 0;
  auto* fit_cmd = app.add_subcommand("fit-properties", "Fit effective-property functions to unit-cell data");
  auto* csv_opt = fit_cmd->add_option("--csv", fit.csv_path, "RVE sample table (CSV)");
  auto* seed_opt = fit_cmd->add_option("--synthetic", seed, "Use the synthetic generator with this seed");
  csv_opt->excludes(seed_opt);
  fit_cmd->add_option("-o,--out", fit.out_json, "Property-set JSON to write")->capture_default_str();
  fit_cmd->add_option("--conduction-resolution", fit.options.conduction_resolution, "Voxels per cell edge")
      ->capture_default_str();

  std::string config_path, out_dir = "run";
  auto add_run = [&](const char* name, const char* help) {
    auto* c = app.add_subcommand(name, help);
    c->add_option("config", config_path, "Run configuration JSON (defaults when omitted)");
    c->add_option("-o,--out", out_dir, "Output directory")->capture_default_str();
    return c;
  };
  auto* solve_cmd = add_run("solve", "Solve flow and energy for one design");
  auto* opt_cmd = add_run("optimize", "Optimize the wall-thickness distribution");
  auto* sweep_cmd = add_run("sweep", "Optimize for each weighting factor in the sweep list");
  auto* metrics_cmd = add_run("metrics", "Solve one design and report performance metrics");

  tpms::DehomogenizeArgs dehom;
  auto* dehom_cmd = app.add_subcommand("dehomogenize", "Build the graded gyroid STL of a design");
  dehom_cmd->add_option("design", dehom.design_path, "Design JSON or gamma_hat VTK image")->required();
  dehom_cmd->add_option("-r,--resolution", dehom.resolution, "Voxels per gyroid cell")->capture_default_str();
  dehom_cmd->add_option("-o,--out", dehom.out_stl, "STL file to write")->capture_default_str();
  dehom_cmd->add_option("--cell-size", dehom.cell_size, "Gyroid cell size [m] (VTK input)")->capture_default_str();
  dehom_cmd->add_option("--c-min", dehom.c_min, "Offset at gamma_hat = 0 [m] (VTK input)")->capture_default_str();
  dehom_cmd->add_option("--c-max", dehom.c_max, "Offset at gamma_hat = 1 [m] (VTK input)")->capture_default_str();

  std::string manifest_path;
  auto* rerun_cmd = app.add_subcommand("rerun", "Replay a run manifest and compare output digests");
  rerun_cmd->add_option("manifest", manifest_path, "manifest.json of an earlier run")->required();
  rerun_cmd->add_option("-o,--out", out_dir, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Usage errors are input errors; help and version exit cleanly.
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (fit_cmd->parsed()) {
      if (*seed_opt) fit.synthetic_seed = seed;
      const auto m = tpms::cmd_fit_properties(fit);
      std::cout << "wrote " << fit.out_json << '\n';
      print_outputs(m);
    } else if (dehom_cmd->parsed()) {
      const auto m = tpms::cmd_dehomogenize(dehom);
      std::cout << "wrote " << dehom.out_stl << '\n';
      print_outputs(m);
    } else if (rerun_cmd->parsed()) {
      const auto rep = tpms::cmd_rerun(manifest_path, out_dir);
      if (!rep.identical()) {
        std::cerr << "outputs differ from the manifest:\n";
        for (const auto& f : rep.mismatched) std::cerr << "  " << f << '\n';
        return 1;
      }
      std::cout << "all " << rep.manifest.outputs.size() << " outputs identical\n";
    } else {
      const auto cfg = load_config(config_path);
      tpms::RunManifest m;
      if (solve_cmd->parsed()) m = tpms::cmd_solve(cfg, out_dir);
      if (opt_cmd->parsed()) m = tpms::cmd_optimize(cfg, out_dir);
      if (sweep_cmd->parsed()) m = tpms::cmd_sweep(cfg, out_dir);
      if (metrics_cmd->parsed()) m = tpms::cmd_metrics(cfg, out_dir);
      std::cout << "wrote " << out_dir << '\n';
      print_outputs(m);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return tpms::exit_code(e);
  }
  return 0;
}
