#include "fmdd/linalg.hpp"

#include <Eigen/SparseLU>
#include <cmath>
#include <sstream>

namespace fmdd::linalg {

struct Factorization::Impl {
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
  Eigen::Index n = 0;
};

Factorization::Factorization(const SpMat& A, FactorKind) : impl_(std::make_unique<Impl>()) {
  SpMat Ac = A;
  Ac.makeCompressed();
  impl_->n = Ac.rows();
  impl_->lu.analyzePattern(Ac);
  impl_->lu.factorize(Ac);
  if (impl_->lu.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "sparse LU factorization failed (" << impl_->lu.lastErrorMessage() << ")";
    throw SolverError(msg.str());
  }
}

Factorization::~Factorization() = default;
Factorization::Factorization(Factorization&&) noexcept = default;
Factorization& Factorization::operator=(Factorization&&) noexcept = default;

Vector Factorization::solve(const Vector& b) const {
  Vector x = impl_->lu.solve(b);
  if (impl_->lu.info() != Eigen::Success) throw SolverError("sparse LU solve failed");
  return x;
}

Eigen::Index Factorization::rows() const { return impl_->n; }

Factorization factorize(const SpMat& A, FactorKind kind) {
  if (A.rows() != A.cols()) throw SolverError("factorize: matrix not square");
  for (int k = 0; k < A.outerSize(); ++k) {
    int prev = -1;
    for (SpMat::InnerIterator it(A, k); it; ++it) {
      if (!std::isfinite(it.value())) throw SolverError("factorize: non-finite entry");
      if (it.index() == prev) throw SolverError("factorize: duplicate index");
      prev = it.index();
    }
  }
  return Factorization(A, kind);
}

SvdResult dense_svd(const Matrix& M) {
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

std::pair<Vector, CgReport> cg(const LinOp& apply_A, const LinOp& apply_Minv,
                               const Vector& b, double tol, int max_it,
                               const DotFn& dot_in) {
  DotFn dot = dot_in;
  if (!dot) dot = [](const Vector& a, const Vector& c) { return a.dot(c); };
  auto precond = [&](const Vector& r) { return apply_Minv ? apply_Minv(r) : r; };

  CgReport rep;
  Vector x = Vector::Zero(b.size());
  Vector r = b;
  Vector z = precond(r);
  double rz = dot(r, z);
  const double rz0 = rz;
  rep.residual_history.push_back(std::sqrt(std::max(0.0, rz0)));
  if (!(rz0 > 0.0)) {  // zero (or null) right-hand side
    rep.converged = true;
    return {x, rep};
  }
  Vector d = z;
  for (int it = 0; it < max_it; ++it) {
    Vector q = apply_A(d);
    const double dq = dot(d, q);
    if (!(dq > 0.0)) {
      rep.breakdown = true;
      rep.iterations = it;
      return {x, rep};
    }
    const double alpha = rz / dq;
    x += alpha * d;
    r -= alpha * q;
    z = precond(r);
    const double rz_new = dot(r, z);
    rep.iterations = it + 1;
    rep.residual_history.push_back(std::sqrt(std::max(0.0, rz_new)));
    if (std::sqrt(std::max(0.0, rz_new)) <= tol * std::sqrt(rz0)) {
      rep.converged = true;
      return {x, rep};
    }
    const double beta = rz_new / rz;
    d = z + beta * d;
    rz = rz_new;
  }
  return {x, rep};
}

std::pair<Vector, CgReport> gmres(const LinOp& apply_A, const LinOp& apply_Minv,
                                  const Vector& b, double tol, int max_it) {
  auto precond = [&](const Vector& r) { return apply_Minv ? apply_Minv(r) : r; };
  CgReport rep;
  const Eigen::Index n = b.size();
  Vector x = Vector::Zero(n);
  Vector r0 = precond(b);
  const double beta0 = r0.norm();
  rep.residual_history.push_back(beta0);
  if (beta0 == 0.0) {
    rep.converged = true;
    return {x, rep};
  }
  const int m = std::min<int>(max_it, static_cast<int>(n));
  std::vector<Vector> V;
  V.reserve(m + 1);
  V.push_back(r0 / beta0);
  Matrix H = Matrix::Zero(m + 1, m);
  std::vector<double> cs(m), sn(m);
  Vector g = Vector::Zero(m + 1);
  g(0) = beta0;
  int k = 0;
  for (; k < m; ++k) {
    Vector w = precond(apply_A(V[k]));
    for (int i = 0; i <= k; ++i) {
      H(i, k) = w.dot(V[i]);
      w -= H(i, k) * V[i];
    }
    H(k + 1, k) = w.norm();
    if (H(k + 1, k) > 0) V.push_back(w / H(k + 1, k));
    // Givens updates
    for (int i = 0; i < k; ++i) {
      const double t = cs[i] * H(i, k) + sn[i] * H(i + 1, k);
      H(i + 1, k) = -sn[i] * H(i, k) + cs[i] * H(i + 1, k);
      H(i, k) = t;
    }
    const double denom = std::hypot(H(k, k), H(k + 1, k));
    cs[k] = H(k, k) / denom;
    sn[k] = H(k + 1, k) / denom;
    H(k, k) = denom;
    H(k + 1, k) = 0.0;
    g(k + 1) = -sn[k] * g(k);
    g(k) = cs[k] * g(k);
    rep.iterations = k + 1;
    rep.residual_history.push_back(std::abs(g(k + 1)));
    if (std::abs(g(k + 1)) <= tol * beta0) {
      ++k;
      rep.converged = true;
      break;
    }
    if (H(k, k) == 0.0) break;
  }
  // back substitution
  Vector y = Vector::Zero(k);
  for (int i = k - 1; i >= 0; --i) {
    double s = g(i);
    for (int j = i + 1; j < k; ++j) s -= H(i, j) * y(j);
    y(i) = s / H(i, i);
  }
  for (int i = 0; i < k; ++i) x += y(i) * V[i];
  return {x, rep};
}

}  // namespace fmdd::linalg
