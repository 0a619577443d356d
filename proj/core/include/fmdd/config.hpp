#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fmdd/ddsolver.hpp"
#include "fmdd/geometry.hpp"
#include "fmdd/mesh.hpp"
#include "fmdd/mortar.hpp"

namespace fmdd {

enum class RunMode { convergence, solve, oracle_compare, demo_raster };

/// Permeability specification: one of scalar, full tensor, or raster file.
struct PermSpec {
  enum class Kind { scalar, tensor, raster } kind = Kind::scalar;
  double scalar = 1.0;
  Tensor2 tensor = Tensor2::identity();
  std::string raster_path;
  int raster_nx = 0;
  int raster_ny = 0;
  double anisotropy = 1.0;   // K = diag(k, anisotropy*k)
  double rotation_deg = 0.0; // clockwise rotation of the tensor axes
};

struct SideBc {
  mpfa::BcKind kind = mpfa::BcKind::dirichlet;
  double value = 0.0;  // pressure (dirichlet) or outward flux density (neumann)
};

struct RunConfig {
  RunMode mode = RunMode::convergence;
  Box domain{{0.0, 0.0}, {2.0, 2.0}};
  int subdomains_x = 3;
  int subdomains_y = 3;
  // checkerboard-alternating base resolutions, optionally overridden per subdomain
  int resolution_a = 6;
  int resolution_b = 8;
  std::vector<SubdomainResolution> resolution_list;  // optional explicit override
  int refinements = 0;
  std::vector<int> refinement_list;  // optional per-subdomain refinement counts
  ElementKind kind = ElementKind::tri;
  int mortar_cells = 3;
  int mortar_degree = 1;
  mortar::Continuity mortar_continuity = mortar::Continuity::continuous;
  dd::Variant variant = dd::Variant::flat;
  int levels = 5;  // convergence mode
  PermSpec perm;
  SideBc bc_left, bc_right, bc_bottom, bc_top;
  std::optional<double> tol;  // default depends on mode
  int max_it = 500;
  dd::Krylov krylov = dd::Krylov::cg;
  int workers = 1;
  std::string output_dir = ".";
  bool export_vtk = false;

  double default_tol() const {
    switch (mode) {
      case RunMode::convergence: return 1e-10;
      case RunMode::oracle_compare: return 1e-12;
      case RunMode::demo_raster: return 1e-6;
      case RunMode::solve: return 1e-8;
    }
    return 1e-10;
  }
  double effective_tol() const { return tol.value_or(default_tol()); }
};

/// Parses the flat "key = value" format; '#' starts a comment. Unknown keys,
/// type mismatches and invariant violations raise ConfigError with the line.
RunConfig parse_config(std::istream& is, const std::string& origin = "<config>");
RunConfig parse_config_file(const std::string& path);

}  // namespace fmdd
