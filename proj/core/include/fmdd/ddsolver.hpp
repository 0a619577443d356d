#pragma once

#include <array>
#include <memory>
#include <mutex>
#include <vector>

#include "fmdd/mesh.hpp"
#include "fmdd/mortar.hpp"
#include "fmdd/mpfa.hpp"
#include "fmdd/perm.hpp"

namespace fmdd::dd {

using linalg::Vector;

enum class Variant { flat, sharp };
enum class Krylov { cg, gmres };

struct SolverSettings {
  double tol = 1e-10;
  int max_it = 500;
  Krylov krylov = Krylov::cg;
  int workers = 1;
  double sigma_min_reject = 1e-8;
};

/// Outer boundary conditions by domain side. Dirichlet sides impose the
/// pressure field, Neumann sides an outward flux density (no-flow if unset).
struct OuterBc {
  std::array<mpfa::BcKind, 4> side{mpfa::BcKind::dirichlet, mpfa::BcKind::dirichlet,
                                   mpfa::BcKind::dirichlet, mpfa::BcKind::dirichlet};
  mpfa::ScalarFn pressure;  // left, right, bottom, top order for `side`
  mpfa::ScalarFn flux;

  static OuterBc dirichlet(mpfa::ScalarFn p) {
    OuterBc bc;
    bc.pressure = std::move(p);
    return bc;
  }
};

struct SolveReport {
  int iterations = 0;
  bool converged = false;
  bool breakdown = false;
  std::vector<double> residual_history;  // preconditioned residual norms
  std::vector<double> sigma_min;         // per interface, for the active variant
  double max_abs_rf = 0.0;               // step-2 compatibility multipliers
  double kernel_violation = 0.0;         // ||B lambda|| / ||lambda|| of the final iterate
  double conservation_residual = 0.0;    // max per-cell |sum of fluxes - source|
  double conservation_scale = 1.0;
  double global_balance = 0.0;           // |total outer outflux - int f|
  std::array<double, 5> step_seconds{};
};

struct DDSolution {
  std::vector<Vector> p;             // per subdomain
  std::vector<Vector> facet_fluxes;  // per subdomain, oriented by facet normals
  std::vector<Vector> boundary_data; // per subdomain, the final boundary dof values
  Vector lambda;
  SolveReport report;
};

/// Composed interface system: subdomain operators, mortar projections,
/// coarse operator and preconditioner. Immutable during solves.
class DDSystem {
public:
  DDSystem(const Decomposition& dec, std::vector<PermField> K, OuterBc bc,
           mortar::MortarSpace space, Variant variant, SolverSettings settings);

  const Decomposition& decomposition() const { return *dec_; }
  const mortar::MortarSpace& space() const { return space_; }
  const mortar::CoarseOperator& coarse() const { return *coarse_; }
  Variant variant() const { return variant_; }
  const SolverSettings& settings() const { return settings_; }
  const std::vector<double>& sigma_min() const { return sigma_min_; }
  const std::vector<int>& nullspace_subdomains() const { return nullspace_subdomains_; }

  const mpfa::SubdomainOperator& neumann_op(int s) const { return *ops_[s]; }
  const mpfa::SubdomainOperator& dirichlet_op(int s) const;  // assembled lazily

  /// Oriented projection of a mortar vector onto one side's trace dofs.
  Vector project_to_side(int g, bool lower, const Vector& lambda) const;

  const mortar::TraceSide& trace_side(int g, bool lower) const {
    return lower ? side_lo_[g] : side_hi_[g];
  }
  /// Operator boundary-dof index for each trace dof of a side.
  const std::vector<int>& trace_bdofs(int g, bool lower) const {
    return lower ? bdof_lo_[g] : bdof_hi_[g];
  }

  struct Extension {
    std::vector<Vector> p;
    std::vector<double> r;
    std::vector<Vector> boundary_data;
  };
  /// Neumann subdomain solves with flux data Q_i lambda and zero source;
  /// zero-mean pressure on nullspace subdomains.
  Extension apply_extension(const Vector& lambda) const;

  /// Interface operator: pressure-jump functional of the extension solves,
  /// assembled as sum_i Q_i^T W_i p_hat_i.
  Vector apply_S(const Vector& lambda) const;

  /// Dirichlet-to-Neumann preconditioner: mortar mass Riesz lift of g,
  /// subdomain Dirichlet solves, flux-jump functional.
  Vector apply_M_inverse(const Vector& g) const;

  /// Projected preconditioned Krylov solve of S lambda = rhs over ker B.
  std::pair<Vector, SolveReport> pcg_interface(const Vector& rhs) const;

  /// Full 5-step algorithm.
  DDSolution solve(const mpfa::ScalarFn& f) const;

  Vector mass_solve(const Vector& g) const;  // mortar mass Riesz map

private:
  Vector outer_boundary_values(const mpfa::SubdomainOperator& op, int s) const;
  Vector pressure_jump_functional(const std::vector<Vector>& p,
                                  const std::vector<Vector>& bd) const;

  const Decomposition* dec_;
  std::vector<PermField> K_;
  OuterBc bc_;
  mortar::MortarSpace space_;
  Variant variant_;
  SolverSettings settings_;

  std::vector<std::unique_ptr<mpfa::SubdomainOperator>> ops_;
  mutable std::vector<std::unique_ptr<mpfa::SubdomainOperator>> dirichlet_ops_;
  mutable std::mutex dirichlet_mutex_;

  std::vector<mortar::TraceSide> side_lo_, side_hi_;  // per interface
  std::vector<Eigen::MatrixXd> Q_lo_, Q_hi_;          // variant projections
  // per (interface, side): operator boundary-dof index per trace dof
  std::vector<std::vector<int>> bdof_lo_, bdof_hi_;
  std::vector<double> sigma_min_;
  std::vector<int> nullspace_subdomains_;
  std::vector<int> nullspace_row_;  // subdomain -> row in B, or -1
  std::unique_ptr<mortar::CoarseOperator> coarse_;
  std::unique_ptr<linalg::Factorization> mass_fact_;
  std::vector<Vector> outer_bd_;  // per subdomain base boundary data (Neumann tagging)
};

struct MonolithicSolution {
  Vector p;
  Vector facet_fluxes;
  Vector boundary_data;
};

/// Single conforming MPFA assembly and direct solve; reference oracle.
MonolithicSolution monolithic_solve(const Mesh2D& mesh, const PermField& K, const Box& domain,
                                    const OuterBc& bc, const mpfa::ScalarFn& f);

/// Per-cell conservation residual from reconstructed facet fluxes.
double conservation_residual(const Mesh2D& mesh, const Vector& facet_fluxes,
                             const Vector& source_integrals);

}  // namespace fmdd::dd
