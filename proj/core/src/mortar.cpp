#include "fmdd/mortar.hpp"

#include <algorithm>
#include <cmath>

#include "fmdd/errors.hpp"

namespace fmdd::mortar {

namespace {

// 2-point Gauss on [a, b]: exact for cubics, enough for products of linears.
constexpr double kGaussX = 0.5773502691896257;

template <typename F>
double gauss2(double a, double b, F&& f) {
  const double m = 0.5 * (a + b), h = 0.5 * (b - a);
  return h * (f(m - h * kGaussX) + f(m + h * kGaussX));
}

}  // namespace

MortarSpace::MortarSpace(std::vector<InterfaceGrid> grids, int degree, Continuity continuity)
    : grids_(std::move(grids)), degree_(degree), continuity_(continuity) {
  if (degree_ != 0 && degree_ != 1)
    throw ConfigError("mortar: polynomial degree must be 0 or 1");
  if (degree_ == 0 && continuity_ == Continuity::continuous)
    throw ConfigError("mortar: piecewise constants cannot be continuous");
  local_dim_.resize(grids_.size());
  offset_.resize(grids_.size());
  for (size_t g = 0; g < grids_.size(); ++g) {
    const int n = grids_[g].n;
    local_dim_[g] = degree_ == 0 ? n : (continuity_ == Continuity::continuous ? n + 1 : 2 * n);
    offset_[g] = dim_;
    dim_ += local_dim_[g];
  }
  std::vector<Eigen::Triplet<double>> trip;
  for (int g = 0; g < num_interfaces(); ++g) {
    const InterfaceGrid& gr = grids_[g];
    for (int k = 0; k < gr.n; ++k) {
      const double a = gr.breakpoint(k), b = gr.breakpoint(k + 1);
      std::vector<int> dofs;
      if (degree_ == 0)
        dofs = {k};
      else if (continuity_ == Continuity::continuous)
        dofs = {k, k + 1};
      else
        dofs = {2 * k, 2 * k + 1};
      for (int i : dofs)
        for (int j : dofs) {
          const double v = gauss2(a, b, [&](double t) {
            return basis_values(g, t)(i) * basis_values(g, t)(j);
          });
          trip.emplace_back(offset_[g] + i, offset_[g] + j, v);
        }
    }
  }
  mass_ = SpMat(dim_, dim_);
  mass_.setFromTriplets(trip.begin(), trip.end());
}

Eigen::RowVectorXd MortarSpace::basis_values(int g, double t) const {
  const InterfaceGrid& gr = grids_[g];
  Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(local_dim_[g]);
  int k = static_cast<int>(std::floor((t - gr.t0) / gr.cell_size()));
  k = std::clamp(k, 0, gr.n - 1);
  const double a = gr.breakpoint(k), b = gr.breakpoint(k + 1);
  const double xi = (t - a) / (b - a);
  if (degree_ == 0) {
    out(k) = 1.0;
  } else if (continuity_ == Continuity::continuous) {
    out(k) = 1.0 - xi;
    out(k + 1) = xi;
  } else {
    out(2 * k) = 1.0 - xi;
    out(2 * k + 1) = xi;
  }
  return out;
}

Eigen::RowVectorXd MortarSpace::integrate_basis(int g, double a, double b) const {
  const InterfaceGrid& gr = grids_[g];
  Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(local_dim_[g]);
  for (int k = 0; k < gr.n; ++k) {
    const double ca = std::max(a, gr.breakpoint(k));
    const double cb = std::min(b, gr.breakpoint(k + 1));
    if (cb - ca <= 1e-14 * gr.cell_size()) continue;
    std::vector<int> dofs;
    if (degree_ == 0)
      dofs = {k};
    else if (continuity_ == Continuity::continuous)
      dofs = {k, k + 1};
    else
      dofs = {2 * k, 2 * k + 1};
    for (int i : dofs)
      out(i) += gauss2(ca, cb, [&](double t) { return basis_values(g, t)(i); });
  }
  return out;
}

double MortarSpace::evaluate(int g, const Vector& global_coeffs, double t) const {
  const Eigen::RowVectorXd phi = basis_values(g, t);
  double v = 0.0;
  for (int i = 0; i < local_dim_[g]; ++i) v += phi(i) * global_coeffs(offset_[g] + i);
  return v;
}

TraceSide build_trace_side(const Decomposition& dec, int subdomain, int interface_id,
                           bool lower_side) {
  const Interface& itf = dec.interfaces[interface_id];
  const Mesh2D& mesh = dec.meshes[subdomain];
  TraceSide side;
  side.subdomain = subdomain;
  side.interface = interface_id;
  side.lower_side = lower_side;
  side.sign = lower_side ? 1.0 : -1.0;
  for (int f : dec.interface_facets(subdomain, interface_id)) {
    const Facet& ff = mesh.facet(f);
    const double ta = itf.normal_axis == 0 ? mesh.vertex(ff.a).y : mesh.vertex(ff.a).x;
    const double tb = itf.normal_axis == 0 ? mesh.vertex(ff.b).y : mesh.vertex(ff.b).x;
    const double tm = 0.5 * (ta + tb);
    TraceSide::Dof d0{f, 0, std::min(ta, tm), std::max(ta, tm), 0.0};
    TraceSide::Dof d1{f, 1, std::min(tm, tb), std::max(tm, tb), 0.0};
    d0.weight = d0.t1 - d0.t0;
    d1.weight = d1.t1 - d1.t0;
    side.dofs.push_back(d0);
    side.dofs.push_back(d1);
  }
  std::sort(side.dofs.begin(), side.dofs.end(),
            [](const TraceSide::Dof& a, const TraceSide::Dof& b) { return a.t0 < b.t0; });
  return side;
}

Eigen::MatrixXd assemble_Qflat(const MortarSpace& space, int g, const TraceSide& side) {
  Eigen::MatrixXd Q(side.dim(), space.local_dim(g));
  for (int r = 0; r < side.dim(); ++r) {
    const TraceSide::Dof& d = side.dofs[r];
    Q.row(r) = side.sign / d.weight * space.integrate_basis(g, d.t0, d.t1);
  }
  return Q;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> assemble_Qsharp(const MortarSpace& space, int g,
                                                            const TraceSide& side_lo,
                                                            const TraceSide& side_hi) {
  const Eigen::MatrixXd E_lo = assemble_Qflat(space, g, side_lo);   // sign +1 already
  const Eigen::MatrixXd E_hi = -assemble_Qflat(space, g, side_hi);  // strip the -1 sign
  Eigen::VectorXd w_lo(side_lo.dim()), w_hi(side_hi.dim());
  for (int r = 0; r < side_lo.dim(); ++r) w_lo(r) = side_lo.dofs[r].weight;
  for (int r = 0; r < side_hi.dim(); ++r) w_hi(r) = side_hi.dofs[r].weight;
  const Eigen::MatrixXd G_lo = E_lo.transpose() * w_lo.asDiagonal() * E_lo;
  const Eigen::MatrixXd G_hi = E_hi.transpose() * w_hi.asDiagonal() * E_hi;
  const Eigen::MatrixXd H = G_lo + G_hi;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
  const Eigen::MatrixXd chi = ldlt.solve(G_lo - G_hi);
  if ((H * chi - (G_lo - G_hi)).cwiseAbs().maxCoeff() >
      1e-8 * std::max(1.0, H.cwiseAbs().maxCoeff()))
    throw AssemblyError("mortar: singular auxiliary problem on interface " + std::to_string(g) +
                        " (mortar condition violated; choose a coarser mortar grid)");
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(space.local_dim(g), space.local_dim(g));
  return {E_lo * (I - chi), -E_hi * (I + chi)};
}

double mortar_condition_sigma(const MortarSpace& space, int g, const TraceSide& side_lo,
                              const TraceSide& side_hi, const Eigen::MatrixXd& Q_lo,
                              const Eigen::MatrixXd& Q_hi) {
  Eigen::VectorXd w_lo(side_lo.dim()), w_hi(side_hi.dim());
  for (int r = 0; r < side_lo.dim(); ++r) w_lo(r) = side_lo.dofs[r].weight;
  for (int r = 0; r < side_hi.dim(); ++r) w_hi(r) = side_hi.dofs[r].weight;
  const Eigen::MatrixXd G = Q_lo.transpose() * w_lo.asDiagonal() * Q_lo +
                            Q_hi.transpose() * w_hi.asDiagonal() * Q_hi;
  const int n = space.local_dim(g), off = space.offset(g);
  Eigen::MatrixXd M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = space.mass().coeff(off + i, off + j);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(G, M);
  const double lmin = es.eigenvalues().minCoeff();
  return std::sqrt(std::max(0.0, lmin));
}

CoarseOperator::CoarseOperator(Eigen::MatrixXd B) : B_(std::move(B)) {
  if (B_.rows() > 0) {
    const Eigen::MatrixXd BBt = B_ * B_.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(BBt);
    const double scale = std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1e-300);
    if (es.eigenvalues().minCoeff() <= 1e-12 * scale)
      throw ConfigError(
          "coarse operator: B B^T is rank deficient; the mortar space cannot express net "
          "subdomain fluxes (refine the mortar grid)");
    llt_.emplace(BBt);
  }
}

Vector CoarseOperator::apply_B(const Vector& mu) const {
  if (rows() == 0) return Vector::Zero(0);
  return B_ * mu;
}

Vector CoarseOperator::apply_Bt(const Vector& s) const {
  if (rows() == 0) return Vector::Zero(cols());
  return B_.transpose() * s;
}

Vector CoarseOperator::apply_P(const Vector& mu) const {
  if (rows() == 0) return mu;
  return mu - B_.transpose() * llt_->solve(B_ * mu);
}

Vector CoarseOperator::solve_step1(const Vector& fbar) const {
  if (rows() == 0) return Vector::Zero(cols());
  return B_.transpose() * llt_->solve(fbar);
}

Vector CoarseOperator::solve_step4(const Vector& g) const {
  if (rows() == 0) return Vector::Zero(0);
  return llt_->solve(B_ * g);
}

}  // namespace fmdd::mortar
