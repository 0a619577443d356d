#include "fmdd/ddsolver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>

#include "fmdd/errors.hpp"

namespace fmdd::dd {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <typename F>
void parallel_over(int n, int workers, F&& body) {
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  auto run = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      body(i);
    }
  };
  std::vector<std::future<void>> futs;
  const int nw = std::min(workers, n);
  futs.reserve(nw - 1);
  for (int w = 0; w + 1 < nw; ++w) futs.push_back(std::async(std::launch::async, run));
  run();
  for (auto& f : futs) f.get();
}

mpfa::BcKind outer_kind(const OuterBc& bc, OuterSide side) {
  switch (side) {
    case OuterSide::left: return bc.side[0];
    case OuterSide::right: return bc.side[1];
    case OuterSide::bottom: return bc.side[2];
    case OuterSide::top: return bc.side[3];
    default: throw AssemblyError("dd: facet is not on the outer boundary");
  }
}

}  // namespace

DDSystem::DDSystem(const Decomposition& dec, std::vector<PermField> K, OuterBc bc,
                   mortar::MortarSpace space, Variant variant, SolverSettings settings)
    : dec_(&dec),
      K_(std::move(K)),
      bc_(std::move(bc)),
      space_(std::move(space)),
      variant_(variant),
      settings_(settings) {
  const int ns = dec.num_subdomains();
  const int ng = static_cast<int>(dec.interfaces.size());
  if (static_cast<int>(K_.size()) != ns)
    throw AssemblyError("dd: one permeability field per subdomain required");
  if (space_.num_interfaces() != ng)
    throw AssemblyError("dd: mortar space does not match the decomposition");

  // trace sides and interface facet tagging
  side_lo_.reserve(ng);
  side_hi_.reserve(ng);
  for (int g = 0; g < ng; ++g) {
    side_lo_.push_back(mortar::build_trace_side(dec, dec.interfaces[g].side_lo, g, true));
    side_hi_.push_back(mortar::build_trace_side(dec, dec.interfaces[g].side_hi, g, false));
  }

  // subdomain operators with interface facets tagged Neumann
  std::vector<std::vector<mpfa::BcKind>> facet_bc(ns);
  for (int s = 0; s < ns; ++s) {
    const Mesh2D& mesh = dec.meshes[s];
    facet_bc[s].assign(mesh.num_facets(), mpfa::BcKind::dirichlet);
    for (int f = 0; f < mesh.num_facets(); ++f) {
      if (!mesh.facet(f).boundary()) continue;
      const OuterSide os = dec.outer_side(s, f);
      facet_bc[s][f] = os == OuterSide::none ? mpfa::BcKind::neumann : outer_kind(bc_, os);
    }
  }
  for (int g = 0; g < ng; ++g) {
    for (const auto& d : side_lo_[g].dofs)
      facet_bc[side_lo_[g].subdomain][d.facet] = mpfa::BcKind::neumann;
    for (const auto& d : side_hi_[g].dofs)
      facet_bc[side_hi_[g].subdomain][d.facet] = mpfa::BcKind::neumann;
  }
  ops_.resize(ns);
  parallel_over(ns, settings_.workers, [&](int s) {
    ops_[s] = std::make_unique<mpfa::SubdomainOperator>(dec.meshes[s], K_[s], facet_bc[s]);
  });
  dirichlet_ops_.resize(ns);

  // projections
  Q_lo_.resize(ng);
  Q_hi_.resize(ng);
  sigma_min_.resize(ng);
  for (int g = 0; g < ng; ++g) {
    if (variant_ == Variant::flat) {
      Q_lo_[g] = mortar::assemble_Qflat(space_, g, side_lo_[g]);
      Q_hi_[g] = mortar::assemble_Qflat(space_, g, side_hi_[g]);
    } else {
      std::tie(Q_lo_[g], Q_hi_[g]) = mortar::assemble_Qsharp(space_, g, side_lo_[g], side_hi_[g]);
    }
    sigma_min_[g] =
        mortar::mortar_condition_sigma(space_, g, side_lo_[g], side_hi_[g], Q_lo_[g], Q_hi_[g]);
    if (sigma_min_[g] < settings_.sigma_min_reject)
      throw ConfigError("dd: mortar condition fails on interface " + std::to_string(g) +
                        " (sigma_min = " + std::to_string(sigma_min_[g]) +
                        "); choose a coarser mortar grid");
  }

  // trace dof -> operator boundary dof maps
  bdof_lo_.resize(ng);
  bdof_hi_.resize(ng);
  for (int g = 0; g < ng; ++g) {
    for (const auto& d : side_lo_[g].dofs)
      bdof_lo_[g].push_back(ops_[side_lo_[g].subdomain]->boundary_dof(d.facet, d.end));
    for (const auto& d : side_hi_[g].dofs)
      bdof_hi_[g].push_back(ops_[side_hi_[g].subdomain]->boundary_dof(d.facet, d.end));
  }

  // outer boundary data at Neumann tagging (interface dofs zeroed)
  outer_bd_.resize(ns);
  for (int s = 0; s < ns; ++s) outer_bd_[s] = outer_boundary_values(*ops_[s], s);

  // coarse operator over nullspace subdomains
  nullspace_row_.assign(ns, -1);
  for (int s = 0; s < ns; ++s)
    if (ops_[s]->nullspace()) {
      nullspace_row_[s] = static_cast<int>(nullspace_subdomains_.size());
      nullspace_subdomains_.push_back(s);
    }
  Eigen::MatrixXd B =
      Eigen::MatrixXd::Zero(static_cast<int>(nullspace_subdomains_.size()), space_.dim());
  for (int g = 0; g < ng; ++g) {
    auto add_rows = [&](const mortar::TraceSide& side, const Eigen::MatrixXd& Q) {
      const int row = nullspace_row_[side.subdomain];
      if (row < 0) return;
      for (int r = 0; r < side.dim(); ++r)
        B.row(row).segment(space_.offset(g), space_.local_dim(g)) +=
            side.dofs[r].weight * Q.row(r);
    };
    add_rows(side_lo_[g], Q_lo_[g]);
    add_rows(side_hi_[g], Q_hi_[g]);
  }
  coarse_ = std::make_unique<mortar::CoarseOperator>(std::move(B));

  mass_fact_ =
      std::make_unique<linalg::Factorization>(linalg::factorize(space_.mass()));
}

Vector DDSystem::outer_boundary_values(const mpfa::SubdomainOperator& op, int s) const {
  Vector bd = op.boundary_values(bc_.pressure, bc_.flux);
  for (const auto& [g, lower] : dec_->subdomain_interfaces[s]) {
    const auto& dofs = lower ? side_lo_[g].dofs : side_hi_[g].dofs;
    for (const auto& d : dofs) bd(op.boundary_dof(d.facet, d.end)) = 0.0;
  }
  return bd;
}

const mpfa::SubdomainOperator& DDSystem::dirichlet_op(int s) const {
  std::lock_guard<std::mutex> lock(dirichlet_mutex_);
  if (!dirichlet_ops_[s]) {
    const Mesh2D& mesh = dec_->meshes[s];
    std::vector<mpfa::BcKind> facet_bc(mesh.num_facets(), mpfa::BcKind::dirichlet);
    for (int f = 0; f < mesh.num_facets(); ++f) {
      if (!mesh.facet(f).boundary()) continue;
      const OuterSide os = dec_->outer_side(s, f);
      facet_bc[f] = os == OuterSide::none ? mpfa::BcKind::dirichlet : outer_kind(bc_, os);
    }
    dirichlet_ops_[s] = std::make_unique<mpfa::SubdomainOperator>(mesh, K_[s], facet_bc);
  }
  return *dirichlet_ops_[s];
}

Vector DDSystem::project_to_side(int g, bool lower, const Vector& lambda) const {
  const Eigen::MatrixXd& Q = lower ? Q_lo_[g] : Q_hi_[g];
  return Q * lambda.segment(space_.offset(g), space_.local_dim(g));
}

DDSystem::Extension DDSystem::apply_extension(const Vector& lambda) const {
  const int ns = dec_->num_subdomains();
  Extension ext;
  ext.p.resize(ns);
  ext.r.assign(ns, 0.0);
  ext.boundary_data.resize(ns);
  parallel_over(ns, settings_.workers, [&](int s) {
    const mpfa::SubdomainOperator& op = *ops_[s];
    Vector bd = Vector::Zero(op.num_boundary_dofs());
    for (const auto& [g, lower] : dec_->subdomain_interfaces[s]) {
      const Vector tr = project_to_side(g, lower, lambda);
      const auto& map = lower ? bdof_lo_[g] : bdof_hi_[g];
      for (size_t r = 0; r < map.size(); ++r) bd(map[r]) = tr(static_cast<int>(r));
    }
    auto sol = op.solve(bd, Vector::Zero(op.num_cells()));
    ext.p[s] = std::move(sol.p);
    ext.r[s] = sol.r;
    ext.boundary_data[s] = std::move(bd);
  });
  return ext;
}

Vector DDSystem::pressure_jump_functional(const std::vector<Vector>& p,
                                          const std::vector<Vector>& bd) const {
  const int ns = dec_->num_subdomains();
  std::vector<Vector> phat(ns);
  parallel_over(ns, settings_.workers, [&](int s) {
    phat[s] = ops_[s]->boundary_pressures(p[s], bd[s]);
  });
  Vector out = Vector::Zero(space_.dim());
  for (int g = 0; g < static_cast<int>(dec_->interfaces.size()); ++g) {
    auto accumulate = [&](const mortar::TraceSide& side, const Eigen::MatrixXd& Q,
                          const std::vector<int>& map) {
      Vector wp(side.dim());
      for (int r = 0; r < side.dim(); ++r)
        wp(r) = side.dofs[r].weight * phat[side.subdomain](map[r]);
      out.segment(space_.offset(g), space_.local_dim(g)) += Q.transpose() * wp;
    };
    accumulate(side_lo_[g], Q_lo_[g], bdof_lo_[g]);
    accumulate(side_hi_[g], Q_hi_[g], bdof_hi_[g]);
  }
  return out;
}

Vector DDSystem::apply_S(const Vector& lambda) const {
  // a_Gamma(lambda, mu) = -sum_i (W_i phat_i) . (Q_i mu): the boundary term of
  // the hybrid identity enters with a minus, which is what makes S positive
  // definite on ker B (the energy of the extension solves).
  Extension ext = apply_extension(lambda);
  return -pressure_jump_functional(ext.p, ext.boundary_data);
}

Vector DDSystem::mass_solve(const Vector& g) const { return mass_fact_->solve(g); }

Vector DDSystem::apply_M_inverse(const Vector& g) const {
  const Vector d = mass_solve(g);
  const int ns = dec_->num_subdomains();
  std::vector<Vector> flux(ns);
  parallel_over(ns, settings_.workers, [&](int s) {
    const mpfa::SubdomainOperator& op = dirichlet_op(s);
    Vector bd = Vector::Zero(op.num_boundary_dofs());
    for (const auto& [g_id, lower] : dec_->subdomain_interfaces[s]) {
      // unsigned (pressure-valued) data: strip the orientation sign
      const mortar::TraceSide& side = lower ? side_lo_[g_id] : side_hi_[g_id];
      const Vector tr = side.sign * project_to_side(g_id, lower, d);
      const auto& dofs = side.dofs;
      for (size_t r = 0; r < dofs.size(); ++r)
        bd(op.boundary_dof(dofs[r].facet, dofs[r].end)) = tr(static_cast<int>(r));
    }
    auto sol = op.solve(bd, Vector::Zero(op.num_cells()));
    flux[s] = op.boundary_fluxes(sol.p, bd);
  });
  // flux-jump functional: sum_i (u_i . nu_i, mu)_Gamma_i, unsigned pairing
  Vector out = Vector::Zero(space_.dim());
  for (int g_id = 0; g_id < static_cast<int>(dec_->interfaces.size()); ++g_id) {
    auto accumulate = [&](const mortar::TraceSide& side, const Eigen::MatrixXd& Q) {
      const mpfa::SubdomainOperator& op = dirichlet_op(side.subdomain);
      Vector tot(side.dim());
      for (int r = 0; r < side.dim(); ++r)
        tot(r) = flux[side.subdomain](op.boundary_dof(side.dofs[r].facet, side.dofs[r].end));
      // E^T * total fluxes with E = sign * Q
      out.segment(space_.offset(g_id), space_.local_dim(g_id)) -=
          side.sign * (Q.transpose() * tot);
    };
    accumulate(side_lo_[g_id], Q_lo_[g_id]);
    accumulate(side_hi_[g_id], Q_hi_[g_id]);
  }
  return out;
}

std::pair<Vector, SolveReport> DDSystem::pcg_interface(const Vector& rhs) const {
  SolveReport rep;
  rep.sigma_min = sigma_min_;
  const Vector b = coarse_->apply_P(rhs);
  auto apply_op = [this](const Vector& x) { return coarse_->apply_P(apply_S(x)); };
  auto apply_prec = [this](const Vector& r) {
    return coarse_->apply_P(mass_solve(apply_M_inverse(r)));
  };
  auto [lambda, cg_rep] =
      settings_.krylov == Krylov::cg
          ? linalg::cg(apply_op, apply_prec, b, settings_.tol, settings_.max_it)
          : linalg::gmres(apply_op, apply_prec, b, settings_.tol, settings_.max_it);
  rep.iterations = cg_rep.iterations;
  rep.converged = cg_rep.converged;
  rep.breakdown = cg_rep.breakdown;
  rep.residual_history = cg_rep.residual_history;
  if (cg_rep.breakdown)
    throw SolverError("interface solver: non-positive curvature, operator lost definiteness");
  if (!cg_rep.converged)
    throw SolverError("interface solver: no convergence in " +
                      std::to_string(settings_.max_it) + " iterations (residual " +
                      std::to_string(cg_rep.residual_history.back()) + ")");
  const double ln = lambda.norm();
  if (ln > 0.0 && coarse_->rows() > 0)
    rep.kernel_violation = coarse_->apply_B(lambda).norm() / ln;
  return {lambda, rep};
}

DDSolution DDSystem::solve(const mpfa::ScalarFn& f) const {
  const int ns = dec_->num_subdomains();
  DDSolution sol;
  sol.report.sigma_min = sigma_min_;
  auto t0 = Clock::now();

  // sources
  std::vector<Vector> src(ns);
  for (int s = 0; s < ns; ++s) src[s] = ops_[s]->source_integrals(f);

  // step 1: coarse source problem
  Vector fbar(static_cast<int>(nullspace_subdomains_.size()));
  for (size_t k = 0; k < nullspace_subdomains_.size(); ++k)
    fbar(static_cast<int>(k)) = src[nullspace_subdomains_[k]].sum();
  const Vector lambda_f = coarse_->solve_step1(fbar);
  sol.report.step_seconds[0] = seconds_since(t0);
  t0 = Clock::now();

  // step 2: local particular solves with flux data Q lambda_f and source f
  std::vector<Vector> p_f(ns), bd_f(ns);
  std::vector<double> r_f(ns, 0.0);
  parallel_over(ns, settings_.workers, [&](int s) {
    const mpfa::SubdomainOperator& op = *ops_[s];
    Vector bd = outer_bd_[s];
    for (const auto& [g, lower] : dec_->subdomain_interfaces[s]) {
      const Vector tr = project_to_side(g, lower, lambda_f);
      const auto& map = lower ? bdof_lo_[g] : bdof_hi_[g];
      for (size_t r = 0; r < map.size(); ++r) bd(map[r]) += tr(static_cast<int>(r));
    }
    auto s2 = op.solve(bd, src[s]);
    p_f[s] = std::move(s2.p);
    r_f[s] = s2.r;
    bd_f[s] = std::move(bd);
  });
  for (int s = 0; s < ns; ++s)
    sol.report.max_abs_rf = std::max(sol.report.max_abs_rf, std::abs(r_f[s]));
  {
    double scale = 0.0;
    for (int s = 0; s < ns; ++s) scale = std::max(scale, src[s].cwiseAbs().maxCoeff());
    scale = std::max(scale, 1.0);
    if (sol.report.max_abs_rf > 1e-9 * scale)
      throw SolverError("dd: step-2 compatibility violated, |r_f| = " +
                        std::to_string(sol.report.max_abs_rf));
  }
  const Vector rhs = pressure_jump_functional(p_f, bd_f);
  sol.report.step_seconds[1] = seconds_since(t0);
  t0 = Clock::now();

  // step 3: interface problem
  auto [lambda0, rep3] = pcg_interface(rhs);
  sol.report.iterations = rep3.iterations;
  sol.report.converged = rep3.converged;
  sol.report.residual_history = std::move(rep3.residual_history);
  sol.report.kernel_violation = rep3.kernel_violation;
  sol.report.step_seconds[2] = seconds_since(t0);
  t0 = Clock::now();

  // step 4: coarse pressure correction
  Extension ext = apply_extension(lambda0);
  std::vector<Vector> p_tot(ns), bd_tot(ns);
  for (int s = 0; s < ns; ++s) {
    p_tot[s] = p_f[s] + ext.p[s];
    bd_tot[s] = bd_f[s] + ext.boundary_data[s];
  }
  const Vector gbar = -pressure_jump_functional(p_tot, bd_tot);
  const Vector pbar = coarse_->solve_step4(gbar);
  for (size_t k = 0; k < nullspace_subdomains_.size(); ++k)
    p_tot[nullspace_subdomains_[k]].array() += pbar(static_cast<int>(k));
  sol.report.step_seconds[3] = seconds_since(t0);
  t0 = Clock::now();

  // step 5: assemble the global solution and check conservation
  sol.lambda = lambda0 + lambda_f;
  sol.p = std::move(p_tot);
  sol.boundary_data = std::move(bd_tot);
  sol.facet_fluxes.resize(ns);
  double cons = 0.0, cons_scale = 0.0, global = 0.0;
  for (int s = 0; s < ns; ++s) {
    sol.facet_fluxes[s] = ops_[s]->reconstruct_fluxes(sol.p[s], sol.boundary_data[s]);
    cons = std::max(cons, conservation_residual(dec_->meshes[s], sol.facet_fluxes[s], src[s]));
    for (int fct = 0; fct < dec_->meshes[s].num_facets(); ++fct)
      cons_scale = std::max(cons_scale, std::abs(sol.facet_fluxes[s](fct)));
    global -= src[s].sum();
    for (int fct = 0; fct < dec_->meshes[s].num_facets(); ++fct)
      if (dec_->meshes[s].facet(fct).boundary() && dec_->outer_side(s, fct) != OuterSide::none)
        global += sol.facet_fluxes[s](fct);
  }
  for (int s = 0; s < ns; ++s) cons_scale = std::max(cons_scale, src[s].cwiseAbs().maxCoeff());
  sol.report.conservation_residual = cons;
  sol.report.conservation_scale = std::max(cons_scale, 1e-300);
  sol.report.global_balance = std::abs(global);
  sol.report.step_seconds[4] = seconds_since(t0);
  return sol;
}

MonolithicSolution monolithic_solve(const Mesh2D& mesh, const PermField& K, const Box& domain,
                                    const OuterBc& bc, const mpfa::ScalarFn& f) {
  const double tol = 1e-9 * std::max(domain.width(), domain.height());
  std::vector<mpfa::BcKind> facet_bc(mesh.num_facets(), mpfa::BcKind::dirichlet);
  for (int fct = 0; fct < mesh.num_facets(); ++fct) {
    const Facet& ff = mesh.facet(fct);
    if (!ff.boundary()) continue;
    OuterSide side = OuterSide::none;
    if (std::abs(ff.midpoint.x - domain.lo.x) <= tol) side = OuterSide::left;
    else if (std::abs(ff.midpoint.x - domain.hi.x) <= tol) side = OuterSide::right;
    else if (std::abs(ff.midpoint.y - domain.lo.y) <= tol) side = OuterSide::bottom;
    else if (std::abs(ff.midpoint.y - domain.hi.y) <= tol) side = OuterSide::top;
    facet_bc[fct] = outer_kind(bc, side);
  }
  mpfa::SubdomainOperator op(mesh, K, facet_bc);
  const Vector bd = op.boundary_values(bc.pressure, bc.flux);
  auto s = op.solve(bd, op.source_integrals(f));
  MonolithicSolution out;
  out.p = std::move(s.p);
  out.facet_fluxes = op.reconstruct_fluxes(out.p, bd);
  out.boundary_data = bd;
  return out;
}

double conservation_residual(const Mesh2D& mesh, const Vector& facet_fluxes,
                             const Vector& source_integrals) {
  double worst = 0.0;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    double bal = -source_integrals(c);
    for (int f : mesh.facets_of_cell(c))
      bal += (mesh.facet(f).left == c ? 1.0 : -1.0) * facet_fluxes(f);
    worst = std::max(worst, std::abs(bal));
  }
  return worst;
}

}  // namespace fmdd::dd
