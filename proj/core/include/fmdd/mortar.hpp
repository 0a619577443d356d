#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "fmdd/linalg.hpp"
#include "fmdd/mesh.hpp"

namespace fmdd::mortar {

using linalg::SpMat;
using linalg::Vector;

enum class Continuity { continuous, discontinuous };

/// Piecewise-polynomial flux multiplier space over the interface grids,
/// a direct sum with no dof coupling across interfaces.
class MortarSpace {
public:
  MortarSpace(std::vector<InterfaceGrid> grids, int degree, Continuity continuity);

  int degree() const { return degree_; }
  Continuity continuity() const { return continuity_; }
  int num_interfaces() const { return static_cast<int>(grids_.size()); }
  const InterfaceGrid& grid(int g) const { return grids_[g]; }

  int dim() const { return dim_; }
  int local_dim(int g) const { return local_dim_[g]; }
  int offset(int g) const { return offset_[g]; }

  const SpMat& mass() const { return mass_; }

  /// Integral of every local basis function of interface g over [a, b].
  Eigen::RowVectorXd integrate_basis(int g, double a, double b) const;

  /// Point evaluation of a mortar function on interface g.
  double evaluate(int g, const Vector& global_coeffs, double t) const;

  /// Local basis values at t (for quadrature of products).
  Eigen::RowVectorXd basis_values(int g, double t) const;

private:
  std::vector<InterfaceGrid> grids_;
  int degree_;
  Continuity continuity_;
  int dim_ = 0;
  std::vector<int> local_dim_;
  std::vector<int> offset_;
  SpMat mass_;
};

/// One side of one interface: the subdomain's boundary sub-facets along it,
/// ordered by arclength. Trace dofs are piecewise constants per sub-facet,
/// realizing the velocity normal-trace space at MPFA granularity.
struct TraceSide {
  int subdomain = -1;
  int interface = -1;
  bool lower_side = true;       // true if subdomain is the i (lower-index) side
  double sign = 1.0;            // +1 lower, -1 upper: lambda_i = sign * lambda
  struct Dof {
    int facet = -1;
    int end = 0;
    double t0 = 0.0;
    double t1 = 0.0;
    double weight = 0.0;  // t1 - t0
  };
  std::vector<Dof> dofs;

  int dim() const { return static_cast<int>(dofs.size()); }
};

TraceSide build_trace_side(const Decomposition& dec, int subdomain, int interface_id,
                           bool lower_side);

/// L2-orthogonal projection of mortar functions onto one side's trace space,
/// including the orientation sign: rows are trace dofs, columns the local
/// mortar dofs of the interface.
Eigen::MatrixXd assemble_Qflat(const MortarSpace& space, int g, const TraceSide& side);

/// Projection onto weakly continuous traces: solves the per-interface saddle
/// problem and returns the pair (Q_i, Q_j), which satisfies the constraint
/// sum_sides (Q_s lambda, mu) = 0 for every mortar mu by construction.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> assemble_Qsharp(const MortarSpace& space, int g,
                                                            const TraceSide& side_lo,
                                                            const TraceSide& side_hi);

/// Smallest generalized singular value of mu -> (Q_i mu, Q_j mu) in the
/// respective L2 norms; bounded away from zero certifies the mortar
/// condition on this interface.
double mortar_condition_sigma(const MortarSpace& space, int g, const TraceSide& side_lo,
                              const TraceSide& side_hi, const Eigen::MatrixXd& Q_lo,
                              const Eigen::MatrixXd& Q_hi);

/// Net-flux coarse operator: one row per nullspace subdomain, acting on
/// global mortar vectors; holds the factorized B B^T and the kernel
/// projector P = I - B^T (B B^T)^{-1} B.
class CoarseOperator {
public:
  explicit CoarseOperator(Eigen::MatrixXd B);

  int rows() const { return static_cast<int>(B_.rows()); }
  int cols() const { return static_cast<int>(B_.cols()); }
  const Eigen::MatrixXd& B() const { return B_; }

  Vector apply_B(const Vector& mu) const;
  Vector apply_Bt(const Vector& s) const;
  Vector apply_P(const Vector& mu) const;
  /// lambda_f = B^T (B B^T)^{-1} fbar, the minimum-norm representative.
  Vector solve_step1(const Vector& fbar) const;
  /// pbar solving B B^T pbar = B g.
  Vector solve_step4(const Vector& g) const;

private:
  Eigen::MatrixXd B_;
  std::optional<Eigen::LLT<Eigen::MatrixXd>> llt_;
};

}  // namespace fmdd::mortar
