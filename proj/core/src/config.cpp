#include "fmdd/config.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "fmdd/errors.hpp"

namespace fmdd {

namespace {

struct Entry {
  std::string value;
  int line = 0;
  bool used = false;
};

[[noreturn]] void fail(const std::string& origin, int line, const std::string& msg) {
  throw ConfigError(origin + ":" + std::to_string(line) + ": " + msg);
}

std::vector<std::string> tokens(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  std::string t;
  while (is >> t) out.push_back(t);
  return out;
}

}  // namespace

RunConfig parse_config(std::istream& is, const std::string& origin) {
  std::map<std::string, Entry> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) fail(origin, lineno, "expected 'key = value'");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail(origin, lineno, "empty key");
    if (entries.count(key)) fail(origin, lineno, "duplicate key '" + key + "'");
    entries[key] = {value, lineno, false};
  }

  RunConfig cfg;
  auto take = [&](const std::string& key) -> Entry* {
    auto it = entries.find(key);
    if (it == entries.end()) return nullptr;
    it->second.used = true;
    return &it->second;
  };
  auto want_double = [&](const Entry* e, const std::string& key) {
    try {
      size_t pos = 0;
      const double v = std::stod(e->value, &pos);
      if (pos != e->value.size()) throw std::invalid_argument("");
      return v;
    } catch (...) {
      fail(origin, e->line, "key '" + key + "': expected a number, got '" + e->value + "'");
    }
  };
  auto want_int = [&](const Entry* e, const std::string& key) {
    try {
      size_t pos = 0;
      const int v = std::stoi(e->value, &pos);
      if (pos != e->value.size()) throw std::invalid_argument("");
      return v;
    } catch (...) {
      fail(origin, e->line, "key '" + key + "': expected an integer, got '" + e->value + "'");
    }
  };

  if (Entry* e = take("mode")) {
    if (e->value == "convergence") cfg.mode = RunMode::convergence;
    else if (e->value == "solve") cfg.mode = RunMode::solve;
    else if (e->value == "oracle-compare") cfg.mode = RunMode::oracle_compare;
    else if (e->value == "demo-raster") cfg.mode = RunMode::demo_raster;
    else fail(origin, e->line, "mode must be convergence|solve|oracle-compare|demo-raster");
  }
  if (Entry* e = take("domain")) {
    const auto t = tokens(e->value);
    if (t.size() != 4) fail(origin, e->line, "domain expects 'x0 y0 x1 y1'");
    cfg.domain = {{std::stod(t[0]), std::stod(t[1])}, {std::stod(t[2]), std::stod(t[3])}};
    if (!(cfg.domain.width() > 0.0) || !(cfg.domain.height() > 0.0))
      fail(origin, e->line, "domain extent must be positive");
  }
  if (Entry* e = take("subdomains")) {
    const auto t = tokens(e->value);
    if (t.size() != 2) fail(origin, e->line, "subdomains expects 'nx ny'");
    cfg.subdomains_x = std::stoi(t[0]);
    cfg.subdomains_y = std::stoi(t[1]);
    if (cfg.subdomains_x < 1 || cfg.subdomains_y < 1)
      fail(origin, e->line, "subdomain counts must be >= 1");
  }
  if (Entry* e = take("resolutions")) {
    const auto t = tokens(e->value);
    if (t.size() != 2) fail(origin, e->line, "resolutions expects 'a b' (checkerboard)");
    cfg.resolution_a = std::stoi(t[0]);
    cfg.resolution_b = std::stoi(t[1]);
    if (cfg.resolution_a < 1 || cfg.resolution_b < 1)
      fail(origin, e->line, "resolutions must be >= 1");
  }
  if (Entry* e = take("resolutions.list")) {
    const auto t = tokens(e->value);
    if (t.size() != static_cast<size_t>(2 * cfg.subdomains_x * cfg.subdomains_y))
      fail(origin, e->line, "resolutions.list expects nx ny per subdomain (row-major)");
    for (size_t k = 0; k + 1 < t.size(); k += 2)
      cfg.resolution_list.push_back({std::stoi(t[k]), std::stoi(t[k + 1]), 0});
  }
  if (Entry* e = take("refinements")) cfg.refinements = want_int(e, "refinements");
  if (Entry* e = take("refinements.list")) {
    const auto t = tokens(e->value);
    if (t.size() != static_cast<size_t>(cfg.subdomains_x * cfg.subdomains_y))
      fail(origin, e->line, "refinements.list expects one count per subdomain");
    for (const auto& s : t) cfg.refinement_list.push_back(std::stoi(s));
  }
  if (Entry* e = take("mesh.kind")) {
    if (e->value == "quad") cfg.kind = ElementKind::quad;
    else if (e->value == "tri") cfg.kind = ElementKind::tri;
    else fail(origin, e->line, "mesh.kind must be quad|tri");
  }
  if (Entry* e = take("mortar.cells")) {
    cfg.mortar_cells = want_int(e, "mortar.cells");
    if (cfg.mortar_cells < 1) fail(origin, e->line, "mortar.cells must be >= 1");
  }
  if (Entry* e = take("mortar.degree")) {
    cfg.mortar_degree = want_int(e, "mortar.degree");
    if (cfg.mortar_degree != 0 && cfg.mortar_degree != 1)
      fail(origin, e->line, "mortar.degree must be 0 or 1");
  }
  if (Entry* e = take("mortar.continuity")) {
    if (e->value == "continuous") cfg.mortar_continuity = mortar::Continuity::continuous;
    else if (e->value == "discontinuous")
      cfg.mortar_continuity = mortar::Continuity::discontinuous;
    else fail(origin, e->line, "mortar.continuity must be continuous|discontinuous");
  }
  if (cfg.mortar_degree == 0) cfg.mortar_continuity = mortar::Continuity::discontinuous;
  if (Entry* e = take("projection")) {
    if (e->value == "flat") cfg.variant = dd::Variant::flat;
    else if (e->value == "sharp") cfg.variant = dd::Variant::sharp;
    else fail(origin, e->line, "projection must be flat|sharp");
  }
  if (Entry* e = take("levels")) {
    cfg.levels = want_int(e, "levels");
    if (cfg.levels < 2) fail(origin, e->line, "levels must be >= 2");
  }
  if (Entry* e = take("perm")) {
    const auto t = tokens(e->value);
    if (t.empty()) fail(origin, e->line, "perm expects scalar|tensor|raster ...");
    if (t[0] == "scalar" && t.size() == 2) {
      cfg.perm.kind = PermSpec::Kind::scalar;
      cfg.perm.scalar = std::stod(t[1]);
      if (!(cfg.perm.scalar > 0)) fail(origin, e->line, "perm scalar must be positive");
    } else if (t[0] == "tensor" && t.size() == 4) {
      cfg.perm.kind = PermSpec::Kind::tensor;
      cfg.perm.tensor = Tensor2{std::stod(t[1]), std::stod(t[2]), std::stod(t[3])};
      if (!cfg.perm.tensor.positive_definite())
        fail(origin, e->line, "perm tensor must be symmetric positive definite");
    } else if (t[0] == "raster" && (t.size() == 4 || t.size() == 5 || t.size() == 6)) {
      cfg.perm.kind = PermSpec::Kind::raster;
      cfg.perm.raster_path = t[1];
      cfg.perm.raster_nx = std::stoi(t[2]);
      cfg.perm.raster_ny = std::stoi(t[3]);
      if (t.size() >= 5) cfg.perm.anisotropy = std::stod(t[4]);
      if (t.size() >= 6) cfg.perm.rotation_deg = std::stod(t[5]);
      if (cfg.perm.raster_nx < 1 || cfg.perm.raster_ny < 1)
        fail(origin, e->line, "raster dimensions must be >= 1");
    } else {
      fail(origin, e->line,
           "perm expects 'scalar k' | 'tensor kxx kxy kyy' | 'raster path nx ny [alpha] [theta]'");
    }
  }
  auto parse_bc = [&](const std::string& key, SideBc& out) {
    if (Entry* e = take(key)) {
      const auto t = tokens(e->value);
      if (t.size() != 2 || (t[0] != "dirichlet" && t[0] != "neumann"))
        fail(origin, e->line, key + " expects 'dirichlet <p>' or 'neumann <q>'");
      out.kind = t[0] == "dirichlet" ? mpfa::BcKind::dirichlet : mpfa::BcKind::neumann;
      out.value = std::stod(t[1]);
    }
  };
  parse_bc("bc.left", cfg.bc_left);
  parse_bc("bc.right", cfg.bc_right);
  parse_bc("bc.bottom", cfg.bc_bottom);
  parse_bc("bc.top", cfg.bc_top);
  if (Entry* e = take("solver.tol")) cfg.tol = want_double(e, "solver.tol");
  if (Entry* e = take("solver.max_it")) cfg.max_it = want_int(e, "solver.max_it");
  if (Entry* e = take("solver.krylov")) {
    if (e->value == "cg") cfg.krylov = dd::Krylov::cg;
    else if (e->value == "gmres") cfg.krylov = dd::Krylov::gmres;
    else fail(origin, e->line, "solver.krylov must be cg|gmres");
  }
  if (Entry* e = take("solver.workers")) {
    cfg.workers = want_int(e, "solver.workers");
    if (cfg.workers < 1) fail(origin, e->line, "solver.workers must be >= 1");
  }
  if (Entry* e = take("output.dir")) cfg.output_dir = e->value;
  if (Entry* e = take("output.vtk")) {
    if (e->value == "true") cfg.export_vtk = true;
    else if (e->value == "false") cfg.export_vtk = false;
    else fail(origin, e->line, "output.vtk must be true|false");
  }

  for (const auto& [key, entry] : entries)
    if (!entry.used) fail(origin, entry.line, "unknown key '" + key + "'");

  // cross-key invariants
  if (cfg.mode == RunMode::oracle_compare) {
    const bool uniform_list = [&] {
      if (cfg.resolution_list.empty()) return cfg.resolution_a == cfg.resolution_b;
      for (const auto& r : cfg.resolution_list)
        if (r.nx != cfg.resolution_list[0].nx || r.ny != cfg.resolution_list[0].ny) return false;
      return true;
    }();
    const bool uniform_ref = [&] {
      for (int r : cfg.refinement_list)
        if (r != (cfg.refinement_list.empty() ? 0 : cfg.refinement_list[0])) return false;
      return true;
    }();
    if (!uniform_list || !uniform_ref)
      throw ConfigError(origin +
                        ": oracle-compare requires matching grids; use equal resolutions "
                        "on every subdomain (e.g. 'resolutions = 8 8')");
  }
  if (cfg.mode == RunMode::demo_raster && cfg.perm.kind != PermSpec::Kind::raster)
    throw ConfigError(origin + ": demo-raster mode requires 'perm = raster ...'");
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config file " + path);
  return parse_config(is, path);
}

}  // namespace fmdd
