#include "fmdd/verify.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "fmdd/errors.hpp"

namespace fmdd::verify {

namespace {

// 3-point Gauss-Legendre weights/abscissae on [-1, 1]
constexpr double kG3X = 0.7745966692414834;
constexpr double kG3W0 = 0.8888888888888888;
constexpr double kG3W1 = 0.5555555555555556;

template <typename F>
double gauss3(double a, double b, F&& f) {
  const double m = 0.5 * (a + b), h = 0.5 * (b - a);
  return h * (kG3W0 * f(m) + kG3W1 * (f(m - h * kG3X) + f(m + h * kG3X)));
}

Vec2 interface_point(const Interface& itf, double t) {
  return itf.normal_axis == 0 ? Vec2{itf.coord, t} : Vec2{t, itf.coord};
}

}  // namespace

ManufacturedCase example1_case() {
  ManufacturedCase c;
  c.K = Tensor2::identity();
  c.domain = {{0.0, 0.0}, {2.0, 2.0}};
  c.p = [](const Vec2& x) {
    return x.y * x.y * (1.0 - x.y / 3.0) + x.x * (2.0 - x.x) * x.y * std::sin(2.0 * M_PI * x.x);
  };
  c.grad_p = [](const Vec2& x) {
    const double s = std::sin(2.0 * M_PI * x.x), co = std::cos(2.0 * M_PI * x.x);
    const double px = (2.0 - 2.0 * x.x) * x.y * s + 2.0 * M_PI * x.x * (2.0 - x.x) * x.y * co;
    const double py = 2.0 * x.y - x.y * x.y + x.x * (2.0 - x.x) * s;
    return Vec2{px, py};
  };
  c.u = [grad = c.grad_p](const Vec2& x) {
    const Vec2 g = grad(x);
    return Vec2{-g.x, -g.y};
  };
  c.f = [](const Vec2& x) {
    const double s = std::sin(2.0 * M_PI * x.x), co = std::cos(2.0 * M_PI * x.x);
    const double pxx = -2.0 * x.y * s + 8.0 * M_PI * (1.0 - x.x) * x.y * co -
                       4.0 * M_PI * M_PI * x.x * (2.0 - x.x) * x.y * s;
    const double pyy = 2.0 - 2.0 * x.y;
    return -pxx - pyy;
  };
  return c;
}

ManufacturedCase affine_case(double a, double bx, double cy, const Tensor2& K,
                             const Box& domain) {
  ManufacturedCase c;
  c.K = K;
  c.domain = domain;
  c.p = [=](const Vec2& x) { return a + bx * x.x + cy * x.y; };
  c.grad_p = [=](const Vec2&) { return Vec2{bx, cy}; };
  const Vec2 u = K.apply({-bx, -cy});
  c.u = [=](const Vec2&) { return u; };
  c.f = [](const Vec2&) { return 0.0; };
  return c;
}

double check_source_consistency(const ManufacturedCase& c, int samples, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> ux(c.domain.lo.x, c.domain.hi.x);
  std::uniform_real_distribution<double> uy(c.domain.lo.y, c.domain.hi.y);
  const double h = 1e-5 * std::max(c.domain.width(), c.domain.height());
  double worst = 0.0, scale = 1.0;
  for (int k = 0; k < samples; ++k) {
    Vec2 x{ux(rng), uy(rng)};
    x.x = std::clamp(x.x, c.domain.lo.x + 2 * h, c.domain.hi.x - 2 * h);
    x.y = std::clamp(x.y, c.domain.lo.y + 2 * h, c.domain.hi.y - 2 * h);
    const double div = (c.u({x.x + h, x.y}).x - c.u({x.x - h, x.y}).x) / (2 * h) +
                       (c.u({x.x, x.y + h}).y - c.u({x.x, x.y - h}).y) / (2 * h);
    worst = std::max(worst, std::abs(div - c.f(x)));
    scale = std::max(scale, std::abs(c.f(x)));
  }
  return worst / scale;
}

double error_pressure(const Mesh2D& mesh, const Vector& p_h, const ManufacturedCase& c) {
  // fan each cell into triangles about the centroid; edge-midpoint rule per
  // triangle (exact for quadratics) resolves the intra-cell variation of p
  double acc = 0.0;
  for (int cell = 0; cell < mesh.num_cells(); ++cell) {
    const Cell& cl = mesh.cell(cell);
    for (int k = 0; k < cl.n; ++k) {
      const Vec2 a = cl.centroid;
      const Vec2 b = mesh.vertex(cl.v[k]);
      const Vec2 d = mesh.vertex(cl.v[(k + 1) % cl.n]);
      const double area = 0.5 * std::abs((b - a).cross(d - a));
      for (const Vec2& m : {(a + b) * 0.5, (b + d) * 0.5, (d + a) * 0.5}) {
        const double e = p_h(cell) - c.p(m);
        acc += area / 3.0 * e * e;
      }
    }
  }
  return std::sqrt(acc);
}

double error_pressure_centers(const Mesh2D& mesh, const Vector& p_h, const ManufacturedCase& c) {
  double acc = 0.0;
  for (int cell = 0; cell < mesh.num_cells(); ++cell) {
    const double d = p_h(cell) - c.p(mesh.cell(cell).centroid);
    acc += mesh.cell(cell).area * d * d;
  }
  return std::sqrt(acc);
}

double error_flux(const Mesh2D& mesh, const Vector& facet_fluxes, const ManufacturedCase& c) {
  double acc = 0.0;
  for (int cell = 0; cell < mesh.num_cells(); ++cell) {
    double cell_acc = 0.0;
    for (int fi : mesh.facets_of_cell(cell)) {
      const Facet& f = mesh.facet(fi);
      const Vec2 a = mesh.vertex(f.a), b = mesh.vertex(f.b);
      const double un_h = facet_fluxes(fi) / f.length;
      const double integral = gauss3(0.0, 1.0, [&](double s) {
        const Vec2 x = a + s * (b - a);
        const double d = c.u(x).dot(f.normal) - un_h;
        return d * d;
      }) * f.length;
      cell_acc += integral / f.length;
    }
    acc += mesh.cell(cell).area * cell_acc;
  }
  return std::sqrt(acc);
}

double error_pressure(const Decomposition& dec, const std::vector<Vector>& p,
                      const ManufacturedCase& c) {
  double acc = 0.0;
  for (int s = 0; s < dec.num_subdomains(); ++s) {
    const double e = error_pressure(dec.meshes[s], p[s], c);
    acc += e * e;
  }
  return std::sqrt(acc);
}

double error_flux(const Decomposition& dec, const std::vector<Vector>& facet_fluxes,
                  const ManufacturedCase& c) {
  double acc = 0.0;
  for (int s = 0; s < dec.num_subdomains(); ++s) {
    const double e = error_flux(dec.meshes[s], facet_fluxes[s], c);
    acc += e * e;
  }
  return std::sqrt(acc);
}

double error_mortar(const Decomposition& dec, const mortar::MortarSpace& space,
                    const Vector& lambda, const ManufacturedCase& c) {
  double acc = 0.0;
  for (size_t g = 0; g < dec.interfaces.size(); ++g) {
    const Interface& itf = dec.interfaces[g];
    const InterfaceGrid& grid = space.grid(static_cast<int>(g));
    for (int k = 0; k < grid.n; ++k) {
      acc += gauss3(grid.breakpoint(k), grid.breakpoint(k + 1), [&](double t) {
        const double exact = c.u(interface_point(itf, t)).dot(itf.normal);
        const double d = exact - space.evaluate(static_cast<int>(g), lambda, t);
        return d * d;
      });
    }
  }
  return std::sqrt(acc);
}

double error_projected_mortar(const dd::DDSystem& system, const Vector& lambda,
                              const ManufacturedCase& c) {
  const Decomposition& dec = system.decomposition();
  double acc = 0.0;
  for (int g = 0; g < static_cast<int>(dec.interfaces.size()); ++g) {
    const Interface& itf = dec.interfaces[g];
    for (bool lower : {true, false}) {
      const mortar::TraceSide& side = system.trace_side(g, lower);
      const Vector q = system.project_to_side(g, lower, lambda);
      for (int r = 0; r < side.dim(); ++r) {
        acc += gauss3(side.dofs[r].t0, side.dofs[r].t1, [&](double t) {
          const double exact = side.sign * c.u(interface_point(itf, t)).dot(itf.normal);
          const double d = exact - q(r);
          return d * d;
        });
      }
    }
  }
  return std::sqrt(acc);
}

double rate(double e_coarse, double e_fine) {
  if (!(e_coarse > 0.0) || !(e_fine > 0.0)) return 0.0;
  return std::log2(e_coarse / e_fine);
}

std::string RateTable::to_csv(bool full_precision) const {
  std::ostringstream os;
  os << "h_min,e_u,r_u,e_p,r_p,e_lambda,r_lambda,e_Qlambda,r_Qlambda,iters\n";
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof buf, full_precision ? "%.17g" : "%.2e", v);
    return std::string(buf);
  };
  auto fmt_rate = [&](double v, bool has) {
    if (!has) return std::string();
    std::snprintf(buf, sizeof buf, full_precision ? "%.17g" : "%.2f", v);
    return std::string(buf);
  };
  for (const RateRow& r : rows) {
    os << fmt(r.h_min) << "," << fmt(r.e_u) << "," << fmt_rate(r.r_u, r.has_rates) << ","
       << fmt(r.e_p) << "," << fmt_rate(r.r_p, r.has_rates) << "," << fmt(r.e_lambda) << ","
       << fmt_rate(r.r_lambda, r.has_rates) << "," << fmt(r.e_Qlambda) << ","
       << fmt_rate(r.r_Qlambda, r.has_rates) << "," << (r.converged ? r.iters : -1) << "\n";
  }
  return os.str();
}

RateTable convergence_study(const StudyConfig& config) {
  if (config.levels < 2) throw ConfigError("convergence study: at least 2 levels required");
  RateTable table;
  for (int level = 0; level < config.levels; ++level) {
    std::vector<SubdomainResolution> res;
    for (int sj = 0; sj < config.subdomains_y; ++sj)
      for (int si = 0; si < config.subdomains_x; ++si) {
        const int base = (si + sj) % 2 == 0 ? config.resolution_a : config.resolution_b;
        res.push_back({base, base, level});
      }
    Decomposition dec = decompose(config.problem.domain, config.subdomains_x,
                                  config.subdomains_y, res, config.kind);
    std::vector<InterfaceGrid> grids;
    grids.reserve(dec.interfaces.size());
    const int cells = config.mortar_cells << level;
    for (const Interface& itf : dec.interfaces) grids.push_back(build_interface_grid(itf, cells));
    mortar::MortarSpace space(std::move(grids), config.mortar_degree, config.mortar_continuity);
    std::vector<PermField> K;
    K.reserve(dec.num_subdomains());
    for (int s = 0; s < dec.num_subdomains(); ++s)
      K.push_back(PermField::constant(dec.meshes[s], config.problem.K));
    dd::OuterBc bc = dd::OuterBc::dirichlet(config.problem.p);
    RateRow row;
    for (int s = 0; s < dec.num_subdomains(); ++s)
      row.h_min = s == 0 ? dec.meshes[s].min_edge_length()
                         : std::min(row.h_min, dec.meshes[s].min_edge_length());
    try {
      dd::DDSystem system(dec, std::move(K), bc, std::move(space), config.variant, config.solver);
      dd::DDSolution sol = system.solve(config.problem.f);
      if (config.on_level) config.on_level(level, sol.report);
      row.e_p = error_pressure(dec, sol.p, config.problem);
      row.e_u = error_flux(dec, sol.facet_fluxes, config.problem);
      row.e_lambda = error_mortar(dec, system.space(), sol.lambda, config.problem);
      row.e_Qlambda = error_projected_mortar(system, sol.lambda, config.problem);
      row.iters = sol.report.iterations;
      row.converged = sol.report.converged;
    } catch (const SolverError&) {
      row.converged = false;
      row.iters = -1;
    }
    if (!table.rows.empty() && row.converged && table.rows.back().converged) {
      const RateRow& prev = table.rows.back();
      row.r_p = rate(prev.e_p, row.e_p);
      row.r_u = rate(prev.e_u, row.e_u);
      row.r_lambda = rate(prev.e_lambda, row.e_lambda);
      row.r_Qlambda = rate(prev.e_Qlambda, row.e_Qlambda);
      row.has_rates = true;
    }
    table.rows.push_back(row);
  }
  return table;
}

}  // namespace fmdd::verify
