#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>

#include "fmdd/config.hpp"
#include "fmdd/errors.hpp"
#include "fmdd/mesh.hpp"
#include "fmdd/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"fmdd: flux-mortar MPFA domain decomposition solver for Darcy flow"};
  app.require_subcommand(1);

  std::string config_path;
  CLI::App* run_cmd = app.add_subcommand("run", "execute a configuration file");
  run_cmd->add_option("-c,--config", config_path, "path to the key = value config file")
      ->required();

  std::string mesh_path;
  CLI::App* mesh_cmd = app.add_subcommand("mesh-info", "print mesh statistics");
  mesh_cmd->add_option("mesh", mesh_path, "ASCII mesh file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      fmdd::RunConfig cfg = fmdd::parse_config_file(config_path);
      fmdd::RunResult res = fmdd::run(cfg);
      std::printf("manifest: %s\n", res.manifest_path.c_str());
      return res.exit_code;
    }
    if (*mesh_cmd) {
      fmdd::Mesh2D mesh = fmdd::Mesh2D::read_ascii_file(mesh_path);
      mesh.validate();
      std::printf("vertices %d cells %d facets %d area %.17g h_min %.17g\n", mesh.num_vertices(),
                  mesh.num_cells(), mesh.num_facets(), mesh.total_area(), mesh.min_edge_length());
      return 0;
    }
  } catch (const fmdd::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
