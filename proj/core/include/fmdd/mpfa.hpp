#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "fmdd/linalg.hpp"
#include "fmdd/mesh.hpp"
#include "fmdd/perm.hpp"

namespace fmdd::mpfa {

using linalg::SpMat;
using linalg::Vector;

enum class BcKind { dirichlet, neumann };

/// Scalar field of position, used for boundary data and sources.
using ScalarFn = std::function<double(const Vec2&)>;

/// Sub-facet identifier: the half of facet `facet` adjacent to the endpoint
/// selected by `end` (0 -> facet.a, 1 -> facet.b).
struct SubFacet {
  int facet = -1;
  int end = 0;
};

inline int subfacet_id(int facet, int end) { return 2 * facet + end; }

/// Vertex-centered interaction region: the cells and sub-facets meeting at
/// one mesh vertex, over which the gradient/continuity system is eliminated.
struct InteractionRegion {
  int vertex = -1;
  std::vector<int> cells;
  std::vector<int> facets;            // facets incident to the vertex
  std::vector<SubFacet> sub_facets;   // one per incident facet
};

std::vector<InteractionRegion> build_interaction_regions(const Mesh2D& mesh);

/// Eliminated local system at one vertex: sub-facet pressures and one-sided
/// fluxes as stencils over the cell pressures of the region and the boundary
/// data slots (one per boundary facet at the vertex).
struct VertexSystem {
  int vertex = -1;
  std::vector<int> cells;    // region cells, local column order
  std::vector<int> facets;   // region facets, local row order
  std::vector<int> boundary_facets;  // data slot order (subset of facets)
  // sub-facet pressures: p_f = P_cells * p + P_data * d
  Eigen::MatrixXd P_cells;
  Eigen::MatrixXd P_data;
  // sub-facet fluxes oriented by the global facet normal (left-cell side):
  Eigen::MatrixXd F_cells;
  Eigen::MatrixXd F_data;
};

/// Builds and eliminates the interaction-region system at `vertex`.
/// Dirichlet slots take the pressure at the sub-facet continuity point,
/// Neumann slots an outward flux density on the half-facet.
VertexSystem local_gradient_system(const Mesh2D& mesh, const PermField& K, int vertex,
                                   const std::vector<BcKind>& facet_bc);

/// Continuity-point parameter along a facet, measured from the vertex:
/// 1/3 on triangles, 1/2 (the facet midpoint) on quadrilaterals.
double continuity_parameter(int cell_arity);

/// One dof per boundary sub-facet. Dirichlet dofs carry pressures (imposed at
/// the continuity point), Neumann dofs outward flux densities on the half.
struct BoundaryDof {
  int facet = -1;
  int end = 0;
  int vertex = -1;
  double weight = 0.0;  // half-facet length
  Vec2 half_midpoint;
  Vec2 continuity_point;
  BcKind kind = BcKind::dirichlet;
};

struct SubdomainSolution {
  Vector p;       // cell pressures
  double r = 0.0; // nullspace multiplier (0 unless the operator is singular)
};

/// Assembled MPFA cell-pressure system for one subdomain with fixed
/// boundary tagging. Immutable after assembly; concurrent solves with
/// distinct right-hand sides are safe.
class SubdomainOperator {
public:
  SubdomainOperator(const Mesh2D& mesh, PermField K, std::vector<BcKind> boundary_facet_bc);

  const Mesh2D& mesh() const { return *mesh_; }
  const PermField& perm() const { return K_; }

  int num_cells() const { return mesh_->num_cells(); }
  int num_boundary_dofs() const { return static_cast<int>(bdofs_.size()); }
  const std::vector<BoundaryDof>& boundary_dofs() const { return bdofs_; }
  /// Boundary dof index of a boundary sub-facet, -1 if interior.
  int boundary_dof(int facet, int end) const { return bdof_index_[subfacet_id(facet, end)]; }

  bool nullspace() const { return nullspace_; }
  const SpMat& matrix() const { return A_; }
  const Vector& cell_volumes() const { return volumes_; }

  /// Per-cell source integrals by midpoint quadrature.
  Vector source_integrals(const ScalarFn& f) const;

  /// Fills boundary data from functions: Dirichlet dofs from the pressure
  /// field g, Neumann dofs from the outward flux density q.
  Vector boundary_values(const ScalarFn& g, const ScalarFn& q) const;

  /// Direct solve with cached factorization. Nullspace-flagged operators are
  /// solved in bordered form with the zero-mean constraint; r absorbs any
  /// data incompatibility, r = (int f - net outflux) / |Omega|.
  SubdomainSolution solve(const Vector& boundary_data, const Vector& source_integrals) const;

  /// Facet fluxes oriented by each facet's stored normal (total flux through
  /// the facet, sum of its two sub-facet stencils).
  Vector reconstruct_fluxes(const Vector& p, const Vector& boundary_data) const;

  /// Sub-facet resolved outward fluxes on the boundary (indexed by bdof).
  Vector boundary_fluxes(const Vector& p, const Vector& boundary_data) const;

  /// Sub-facet boundary pressures (indexed by bdof), and the per-facet
  /// average of the two sub-facet values for a given boundary facet.
  Vector boundary_pressures(const Vector& p, const Vector& boundary_data) const;
  double facet_boundary_pressure(const Vector& subfacet_pressures, int facet) const;

  /// Full-facet flux stencil over cell pressures and boundary data (sum of
  /// the two half stencils); diagnostic for transmissibility checks.
  std::pair<Eigen::RowVectorXd, Eigen::RowVectorXd> facet_flux_stencil(int facet) const;

private:
  const Mesh2D* mesh_;
  PermField K_;
  std::vector<BcKind> facet_bc_;
  std::vector<BoundaryDof> bdofs_;
  std::vector<int> bdof_index_;  // subfacet id -> bdof or -1
  bool nullspace_ = false;

  SpMat A_;         // cell balance matrix
  SpMat Rd_;        // cells x nbdof, data contribution to the right-hand side
  SpMat Gp_, Gd_;   // sub-facet fluxes (2F x cells / 2F x nbdof), facet-normal oriented
  SpMat Tp_, Td_;   // boundary sub-facet pressures (nbdof x cells / nbdof x nbdof)
  Vector volumes_;
  std::optional<linalg::Factorization> fact_;
};

/// Assembles the operator; boundary_spec tags every boundary facet.
SubdomainOperator assemble_subdomain(const Mesh2D& mesh, const PermField& K,
                                     const std::vector<BcKind>& boundary_facet_bc);

/// Uniform tagging helper (all boundary facets alike).
std::vector<BcKind> uniform_bc(const Mesh2D& mesh, BcKind kind);

}  // namespace fmdd::mpfa
