#include <benchmark/benchmark.h>

#include "fmdd/ddsolver.hpp"
#include "fmdd/mortar.hpp"
#include "fmdd/mpfa.hpp"
#include "fmdd/verify.hpp"

using namespace fmdd;
using linalg::Vector;

namespace {

mortar::MortarSpace make_space(const Decomposition& dec, int cells) {
  std::vector<InterfaceGrid> grids;
  for (const Interface& itf : dec.interfaces) grids.push_back(build_interface_grid(itf, cells));
  return mortar::MortarSpace(std::move(grids), 1, mortar::Continuity::continuous);
}

}  // namespace

static void BM_mpfa_assembly(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Mesh2D mesh = generate_structured({{0, 0}, {1, 1}}, n, n, ElementKind::tri);
  PermField K = PermField::constant(mesh, Tensor2{1.5, 0.3, 0.9});
  auto bc = mpfa::uniform_bc(mesh, mpfa::BcKind::dirichlet);
  for (auto _ : state) {
    auto op = mpfa::assemble_subdomain(mesh, K, bc);
    benchmark::DoNotOptimize(op.num_boundary_dofs());
  }
  state.SetItemsProcessed(state.iterations() * mesh.num_cells());
}
BENCHMARK(BM_mpfa_assembly)->Arg(16)->Arg(32)->Arg(64);

static void BM_subdomain_backsolve(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Mesh2D mesh = generate_structured({{0, 0}, {1, 1}}, n, n, ElementKind::quad);
  auto op = mpfa::assemble_subdomain(mesh, PermField::constant(mesh, Tensor2::identity()),
                                     mpfa::uniform_bc(mesh, mpfa::BcKind::dirichlet));
  Vector bd = op.boundary_values([](const Vec2& x) { return x.x * x.y; }, {});
  Vector src = op.source_integrals([](const Vec2& x) { return x.x; });
  for (auto _ : state) {
    auto sol = op.solve(bd, src);
    benchmark::DoNotOptimize(sol.p.sum());
  }
  state.SetItemsProcessed(state.iterations() * mesh.num_cells());
}
BENCHMARK(BM_subdomain_backsolve)->Arg(32)->Arg(64)->Arg(128);

static void BM_projection_assembly(benchmark::State& state) {
  std::vector<SubdomainResolution> res = {{24, 24, 0}, {32, 32, 0}};
  Decomposition dec = decompose({{0, 0}, {2, 1}}, 2, 1, res, ElementKind::quad);
  mortar::TraceSide lo = mortar::build_trace_side(dec, 0, 0, true);
  mortar::TraceSide hi = mortar::build_trace_side(dec, 1, 0, false);
  mortar::MortarSpace space = make_space(dec, 12);
  for (auto _ : state) {
    auto q = mortar::assemble_Qsharp(space, 0, lo, hi);
    benchmark::DoNotOptimize(q.first.sum());
  }
}
BENCHMARK(BM_projection_assembly);

static void BM_dd_solve(benchmark::State& state) {
  const int level = static_cast<int>(state.range(0));
  verify::ManufacturedCase mc = verify::example1_case();
  std::vector<SubdomainResolution> res;
  for (int k = 0; k < 9; ++k) {
    const int base = k % 2 == 0 ? 6 : 8;
    res.push_back({base, base, level});
  }
  Decomposition dec = decompose(mc.domain, 3, 3, res, ElementKind::quad);
  std::vector<PermField> K;
  for (int s = 0; s < 9; ++s) K.push_back(PermField::constant(dec.meshes[s], mc.K));
  dd::SolverSettings settings;
  settings.tol = 1e-10;
  for (auto _ : state) {
    dd::DDSystem sys(dec, K, dd::OuterBc::dirichlet(mc.p), make_space(dec, 3 << level),
                     dd::Variant::flat, settings);
    auto sol = sys.solve(mc.f);
    benchmark::DoNotOptimize(sol.report.iterations);
  }
}
BENCHMARK(BM_dd_solve)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
