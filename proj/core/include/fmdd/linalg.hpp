#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <functional>
#include <memory>
#include <vector>

#include "fmdd/errors.hpp"

namespace fmdd::linalg {

using SpMat = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class FactorKind { general, augmented_symmetric };

/// Direct factorization handle. Factor once, solve many; solves with the
/// same handle are bitwise reproducible and safe to run concurrently.
class Factorization {
public:
  Factorization(const SpMat& A, FactorKind kind);
  ~Factorization();
  Factorization(Factorization&&) noexcept;
  Factorization& operator=(Factorization&&) noexcept;

  Vector solve(const Vector& b) const;
  Eigen::Index rows() const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Validates structure (sorted, duplicate-free, finite) and factorizes.
/// Structural singularity raises SolverError naming the pivot.
Factorization factorize(const SpMat& A, FactorKind kind = FactorKind::general);

struct SvdResult {
  Matrix U;
  Vector sigma;  // descending
  Matrix V;
};

SvdResult dense_svd(const Matrix& M);

struct CgReport {
  int iterations = 0;
  bool converged = false;
  bool breakdown = false;
  std::vector<double> residual_history;  // preconditioned residual norms
};

using LinOp = std::function<Vector(const Vector&)>;
using DotFn = std::function<double(const Vector&, const Vector&)>;

/// Preconditioned conjugate gradients with operator callbacks and a
/// pluggable inner product. apply_Minv may be empty (identity).
/// Stops when the preconditioned residual norm drops below tol times its
/// initial value. Breakdown (non-positive curvature) is reported, not thrown.
std::pair<Vector, CgReport> cg(const LinOp& apply_A, const LinOp& apply_Minv,
                               const Vector& b, double tol, int max_it,
                               const DotFn& dot = {});

/// Plain full-memory GMRES on the same callback interface; fallback solver
/// for experiments where symmetry of the composed operator is in doubt.
std::pair<Vector, CgReport> gmres(const LinOp& apply_A, const LinOp& apply_Minv,
                                  const Vector& b, double tol, int max_it);

}  // namespace fmdd::linalg
