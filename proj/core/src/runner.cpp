#include "fmdd/runner.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <unordered_map>

#include "fmdd/errors.hpp"
#include "fmdd/io.hpp"
#include "fmdd/verify.hpp"

namespace fmdd {

namespace {

using nlohmann::json;
using linalg::Vector;

std::vector<SubdomainResolution> resolutions_of(const RunConfig& cfg) {
  std::vector<SubdomainResolution> res;
  if (!cfg.resolution_list.empty()) {
    res = cfg.resolution_list;
  } else {
    for (int sj = 0; sj < cfg.subdomains_y; ++sj)
      for (int si = 0; si < cfg.subdomains_x; ++si) {
        const int n = (si + sj) % 2 == 0 ? cfg.resolution_a : cfg.resolution_b;
        res.push_back({n, n, 0});
      }
  }
  for (size_t k = 0; k < res.size(); ++k)
    res[k].refinements =
        cfg.refinement_list.empty() ? cfg.refinements : cfg.refinement_list[k];
  return res;
}

std::vector<PermField> perm_fields(const RunConfig& cfg, const Decomposition& dec) {
  std::vector<PermField> K;
  K.reserve(dec.num_subdomains());
  if (cfg.perm.kind == PermSpec::Kind::raster) {
    const Raster raster = load_raster(cfg.perm.raster_path, cfg.perm.raster_nx, cfg.perm.raster_ny);
    for (int s = 0; s < dec.num_subdomains(); ++s)
      K.push_back(perm_from_raster(dec.meshes[s], cfg.domain, raster, cfg.perm.anisotropy,
                                   cfg.perm.rotation_deg));
  } else {
    const Tensor2 t = cfg.perm.kind == PermSpec::Kind::scalar
                          ? Tensor2::diagonal(cfg.perm.scalar, cfg.perm.scalar)
                          : cfg.perm.tensor;
    for (int s = 0; s < dec.num_subdomains(); ++s)
      K.push_back(PermField::constant(dec.meshes[s], t));
  }
  return K;
}

PermField perm_field(const RunConfig& cfg, const Mesh2D& mesh) {
  if (cfg.perm.kind == PermSpec::Kind::raster) {
    const Raster raster = load_raster(cfg.perm.raster_path, cfg.perm.raster_nx, cfg.perm.raster_ny);
    return perm_from_raster(mesh, cfg.domain, raster, cfg.perm.anisotropy, cfg.perm.rotation_deg);
  }
  const Tensor2 t = cfg.perm.kind == PermSpec::Kind::scalar
                        ? Tensor2::diagonal(cfg.perm.scalar, cfg.perm.scalar)
                        : cfg.perm.tensor;
  return PermField::constant(mesh, t);
}

dd::OuterBc outer_bc(const RunConfig& cfg) {
  dd::OuterBc bc;
  bc.side = {cfg.bc_left.kind, cfg.bc_right.kind, cfg.bc_bottom.kind, cfg.bc_top.kind};
  if (bc.side[0] == mpfa::BcKind::neumann && bc.side[1] == mpfa::BcKind::neumann &&
      bc.side[2] == mpfa::BcKind::neumann && bc.side[3] == mpfa::BcKind::neumann)
    throw ConfigError("pure Neumann outer boundary: the pressure level is undetermined");
  const Box d = cfg.domain;
  const double tol = 1e-9 * std::max(d.width(), d.height());
  auto side_value = [=](const Vec2& x, double l, double r, double b, double t) {
    if (std::abs(x.x - d.lo.x) <= tol) return l;
    if (std::abs(x.x - d.hi.x) <= tol) return r;
    if (std::abs(x.y - d.lo.y) <= tol) return b;
    return t;
  };
  bc.pressure = [=](const Vec2& x) {
    return side_value(x, cfg.bc_left.value, cfg.bc_right.value, cfg.bc_bottom.value,
                      cfg.bc_top.value);
  };
  bc.flux = bc.pressure;  // same side-constant lookup, interpreted per kind
  return bc;
}

dd::SolverSettings solver_settings(const RunConfig& cfg) {
  dd::SolverSettings s;
  s.tol = cfg.effective_tol();
  s.max_it = cfg.max_it;
  s.krylov = cfg.krylov;
  s.workers = cfg.workers;
  return s;
}

json config_json(const RunConfig& cfg) {
  json j;
  const char* modes[] = {"convergence", "solve", "oracle-compare", "demo-raster"};
  j["mode"] = modes[static_cast<int>(cfg.mode)];
  j["domain"] = {cfg.domain.lo.x, cfg.domain.lo.y, cfg.domain.hi.x, cfg.domain.hi.y};
  j["subdomains"] = {cfg.subdomains_x, cfg.subdomains_y};
  j["resolutions"] = {cfg.resolution_a, cfg.resolution_b};
  if (!cfg.resolution_list.empty()) {
    json l = json::array();
    for (const auto& r : cfg.resolution_list) l.push_back({r.nx, r.ny});
    j["resolutions_list"] = l;
  }
  j["refinements"] = cfg.refinement_list.empty() ? json(cfg.refinements) : json(cfg.refinement_list);
  j["mesh_kind"] = cfg.kind == ElementKind::quad ? "quad" : "tri";
  j["mortar"] = {{"cells", cfg.mortar_cells},
                 {"degree", cfg.mortar_degree},
                 {"continuity", cfg.mortar_continuity == mortar::Continuity::continuous
                                    ? "continuous"
                                    : "discontinuous"}};
  j["projection"] = cfg.variant == dd::Variant::flat ? "flat" : "sharp";
  j["levels"] = cfg.levels;
  switch (cfg.perm.kind) {
    case PermSpec::Kind::scalar: j["perm"] = {{"kind", "scalar"}, {"value", cfg.perm.scalar}}; break;
    case PermSpec::Kind::tensor:
      j["perm"] = {{"kind", "tensor"},
                   {"kxx", cfg.perm.tensor.xx},
                   {"kxy", cfg.perm.tensor.xy},
                   {"kyy", cfg.perm.tensor.yy}};
      break;
    case PermSpec::Kind::raster:
      j["perm"] = {{"kind", "raster"},       {"path", cfg.perm.raster_path},
                   {"nx", cfg.perm.raster_nx}, {"ny", cfg.perm.raster_ny},
                   {"anisotropy", cfg.perm.anisotropy}, {"rotation_deg", cfg.perm.rotation_deg}};
      break;
  }
  auto bc_json = [](const SideBc& b) {
    return json{{"kind", b.kind == mpfa::BcKind::dirichlet ? "dirichlet" : "neumann"},
                {"value", b.value}};
  };
  j["bc"] = {{"left", bc_json(cfg.bc_left)},
             {"right", bc_json(cfg.bc_right)},
             {"bottom", bc_json(cfg.bc_bottom)},
             {"top", bc_json(cfg.bc_top)}};
  j["solver"] = {{"tol", cfg.effective_tol()},
                 {"max_it", cfg.max_it},
                 {"krylov", cfg.krylov == dd::Krylov::cg ? "cg" : "gmres"},
                 {"workers", cfg.workers}};
  j["output_dir"] = cfg.output_dir;
  return j;
}

json report_json(const dd::SolveReport& rep) {
  json j;
  j["iterations"] = rep.iterations;
  j["converged"] = rep.converged;
  j["sigma_min"] = rep.sigma_min;
  j["r_f"] = rep.max_abs_rf;
  j["kernel_violation"] = rep.kernel_violation;
  j["conservation_residual"] = rep.conservation_residual;
  j["conservation_scale"] = rep.conservation_scale;
  j["global_balance"] = rep.global_balance;
  j["step_seconds"] = rep.step_seconds;
  j["residual_history"] = rep.residual_history;
  return j;
}

mortar::MortarSpace mortar_space_of(const RunConfig& cfg, const Decomposition& dec) {
  std::vector<InterfaceGrid> grids;
  grids.reserve(dec.interfaces.size());
  for (const Interface& itf : dec.interfaces)
    grids.push_back(build_interface_grid(itf, cfg.mortar_cells));
  return mortar::MortarSpace(std::move(grids), cfg.mortar_degree, cfg.mortar_continuity);
}

/// Mortar space equal to the trace space: piecewise constants on the
/// half-facet grid of either (matching) side.
mortar::MortarSpace trace_mortar_space(const Decomposition& dec) {
  std::vector<InterfaceGrid> grids;
  grids.reserve(dec.interfaces.size());
  for (size_t g = 0; g < dec.interfaces.size(); ++g) {
    const auto facets = dec.interface_facets(dec.interfaces[g].side_lo, static_cast<int>(g));
    grids.push_back(build_interface_grid(dec.interfaces[g], 2 * static_cast<int>(facets.size())));
  }
  return mortar::MortarSpace(std::move(grids), 0, mortar::Continuity::discontinuous);
}

long long quantize(double v, double h) { return std::llround(v / h); }

struct CellMap {
  std::unordered_map<long long, int> index;
  double hx, hy;
  long long key(const Vec2& p) const {
    return quantize(p.x, hx) * 2000003LL + quantize(p.y, hy);
  }
};

CellMap build_point_map(const Mesh2D& mesh, bool facets, double scale) {
  CellMap m;
  m.hx = m.hy = 1e-7 * scale;
  if (facets) {
    for (int f = 0; f < mesh.num_facets(); ++f) m.index[m.key(mesh.facet(f).midpoint)] = f;
  } else {
    for (int c = 0; c < mesh.num_cells(); ++c) m.index[m.key(mesh.cell(c).centroid)] = c;
  }
  return m;
}

struct OracleDiff {
  double max_p = 0.0;
  double max_flux = 0.0;
};

OracleDiff compare_with_monolithic(const RunConfig& cfg, const Decomposition& dec,
                                   const dd::DDSolution& sol, const Mesh2D& global,
                                   const dd::MonolithicSolution& mono) {
  const double scale = std::max(cfg.domain.width(), cfg.domain.height());
  const CellMap cells = build_point_map(global, false, scale);
  const CellMap facets = build_point_map(global, true, scale);
  OracleDiff diff;
  for (int s = 0; s < dec.num_subdomains(); ++s) {
    const Mesh2D& mesh = dec.meshes[s];
    for (int c = 0; c < mesh.num_cells(); ++c) {
      auto it = cells.index.find(cells.key(mesh.cell(c).centroid));
      if (it == cells.index.end())
        throw AcceptanceError("oracle-compare: no matching monolithic cell (grids not matching)");
      diff.max_p = std::max(diff.max_p, std::abs(sol.p[s](c) - mono.p(it->second)));
    }
    for (int f = 0; f < mesh.num_facets(); ++f) {
      auto it = facets.index.find(facets.key(mesh.facet(f).midpoint));
      if (it == facets.index.end())
        throw AcceptanceError("oracle-compare: no matching monolithic facet");
      const double orient = mesh.facet(f).normal.dot(global.facet(it->second).normal);
      diff.max_flux = std::max(diff.max_flux, std::abs(sol.facet_fluxes[s](f) -
                                                       orient * mono.facet_fluxes(it->second)));
    }
  }
  return diff;
}

Mesh2D global_matching_mesh(const RunConfig& cfg, const std::vector<SubdomainResolution>& res) {
  const int n_eff_x = res[0].nx << res[0].refinements;
  const int n_eff_y = res[0].ny << res[0].refinements;
  if (cfg.kind == ElementKind::tri && (n_eff_x % 2 != 0 || n_eff_y % 2 != 0))
    throw ConfigError(
        "oracle-compare on triangles requires an even per-subdomain resolution so the "
        "alternating-diagonal pattern continues across interfaces");
  return generate_structured(cfg.domain, cfg.subdomains_x * n_eff_x, cfg.subdomains_y * n_eff_y,
                             cfg.kind);
}

void export_fields(const Decomposition& dec, const dd::DDSolution& sol,
                   const std::string& path) {
  std::vector<const Mesh2D*> meshes;
  std::vector<const Vector*> pressures;
  std::vector<std::vector<Vec2>> velocities;
  for (int s = 0; s < dec.num_subdomains(); ++s) {
    meshes.push_back(&dec.meshes[s]);
    pressures.push_back(&sol.p[s]);
    velocities.push_back(io::cell_velocities(dec.meshes[s], sol.facet_fluxes[s]));
  }
  io::write_vtk(path, meshes, pressures, velocities);
}

RunResult finish(const RunConfig& cfg, json manifest) {
  std::filesystem::create_directories(cfg.output_dir);
  const std::string path = cfg.output_dir + "/manifest.json";
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << manifest.dump(2) << "\n";
  return {0, path};
}

RunResult run_convergence(const RunConfig& cfg) {
  if (cfg.perm.kind != PermSpec::Kind::scalar || cfg.perm.scalar != 1.0)
    throw ConfigError("convergence mode uses the built-in unit-permeability benchmark; "
                      "set 'perm = scalar 1' or drop the key");
  verify::StudyConfig sc;
  sc.kind = cfg.kind;
  sc.variant = cfg.variant;
  sc.levels = cfg.levels;
  sc.subdomains_x = cfg.subdomains_x;
  sc.subdomains_y = cfg.subdomains_y;
  sc.resolution_a = cfg.resolution_a;
  sc.resolution_b = cfg.resolution_b;
  sc.mortar_cells = cfg.mortar_cells;
  sc.mortar_degree = cfg.mortar_degree;
  sc.mortar_continuity = cfg.mortar_continuity;
  sc.solver = solver_settings(cfg);
  if (std::abs(cfg.domain.lo.x) > 0 || std::abs(cfg.domain.lo.y) > 0 ||
      std::abs(cfg.domain.hi.x - 2.0) > 0 || std::abs(cfg.domain.hi.y - 2.0) > 0)
    throw ConfigError("convergence mode runs on the fixed (0,2)x(0,2) benchmark domain");

  json manifest;
  manifest["config"] = config_json(cfg);
  json levels = json::array();
  sc.on_level = [&](int level, const dd::SolveReport& rep) {
    json j = report_json(rep);
    j["level"] = level;
    j.erase("residual_history");
    levels.push_back(j);
  };
  verify::RateTable table = verify::convergence_study(sc);
  std::filesystem::create_directories(cfg.output_dir);
  io::write_text_file(cfg.output_dir + "/rate_table.csv", table.to_csv(false));
  io::write_text_file(cfg.output_dir + "/rate_table_full.csv", table.to_csv(true));
  manifest["levels"] = levels;
  json rows = json::array();
  for (const auto& r : table.rows)
    rows.push_back({{"h_min", r.h_min},
                    {"e_u", r.e_u},
                    {"e_p", r.e_p},
                    {"e_lambda", r.e_lambda},
                    {"e_Qlambda", r.e_Qlambda},
                    {"iters", r.converged ? r.iters : -1}});
  manifest["rate_table"] = rows;
  return finish(cfg, manifest);
}

RunResult run_general(const RunConfig& cfg) {
  const auto res = resolutions_of(cfg);
  Decomposition dec =
      decompose(cfg.domain, cfg.subdomains_x, cfg.subdomains_y, res, cfg.kind);
  const bool oracle = cfg.mode == RunMode::oracle_compare;
  mortar::MortarSpace space = oracle ? trace_mortar_space(dec) : mortar_space_of(cfg, dec);
  dd::OuterBc bc = outer_bc(cfg);
  dd::DDSystem system(dec, perm_fields(cfg, dec), bc, std::move(space), cfg.variant,
                      solver_settings(cfg));
  dd::DDSolution sol = system.solve({});

  json manifest;
  manifest["config"] = config_json(cfg);
  manifest["report"] = report_json(sol.report);
  double max_p = 0.0;
  for (int s = 0; s < dec.num_subdomains(); ++s)
    max_p = std::max(max_p, sol.p[s].cwiseAbs().maxCoeff());
  manifest["max_abs_pressure"] = max_p;

  // monolithic comparison: mandatory for oracle-compare, best-effort for demos
  const bool matching = [&] {
    for (const auto& r : res)
      if (r.nx != res[0].nx || r.ny != res[0].ny || r.refinements != res[0].refinements)
        return false;
    return true;
  }();
  if (oracle || (cfg.mode == RunMode::demo_raster && matching)) {
    const Mesh2D global = global_matching_mesh(cfg, res);
    const dd::MonolithicSolution mono =
        dd::monolithic_solve(global, perm_field(cfg, global), cfg.domain, bc, {});
    if (oracle) {
      const OracleDiff diff = compare_with_monolithic(cfg, dec, sol, global, mono);
      manifest["oracle"] = {{"max_pressure_diff", diff.max_p},
                            {"max_flux_diff", diff.max_flux}};
      std::printf("oracle-compare: max |p_DD - p_mono| = %.3e, max flux diff = %.3e\n",
                  diff.max_p, diff.max_flux);
      if (diff.max_p > 1e-8 || diff.max_flux > 1e-8) {
        finish(cfg, manifest);
        throw AcceptanceError("oracle-compare: DD and monolithic solutions differ beyond 1e-8");
      }
    } else {
      // smoke comparison for heterogeneous demos: relative L2 distance
      const double scale = std::max(cfg.domain.width(), cfg.domain.height());
      const CellMap cells = build_point_map(global, false, scale);
      double num = 0.0, den = 0.0;
      for (int s = 0; s < dec.num_subdomains(); ++s)
        for (int c = 0; c < dec.meshes[s].num_cells(); ++c) {
          const int gc = cells.index.at(cells.key(dec.meshes[s].cell(c).centroid));
          const double w = dec.meshes[s].cell(c).area;
          num += w * std::pow(sol.p[s](c) - mono.p(gc), 2);
          den += w * std::pow(mono.p(gc), 2);
        }
      manifest["monolithic_rel_l2_diff"] = den > 0 ? std::sqrt(num / den) : 0.0;
    }
  }
  if (cfg.export_vtk || cfg.mode == RunMode::demo_raster) {
    std::filesystem::create_directories(cfg.output_dir);
    export_fields(dec, sol, cfg.output_dir + "/fields.vtk");
    manifest["vtk"] = "fields.vtk";
  }
  return finish(cfg, manifest);
}

}  // namespace

RunResult run(const RunConfig& config) {
  switch (config.mode) {
    case RunMode::convergence: return run_convergence(config);
    case RunMode::solve:
    case RunMode::oracle_compare:
    case RunMode::demo_raster: return run_general(config);
  }
  throw ConfigError("unknown run mode");
}

}  // namespace fmdd
