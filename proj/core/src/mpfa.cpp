#include "fmdd/mpfa.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "fmdd/errors.hpp"

namespace fmdd::mpfa {

double continuity_parameter(int cell_arity) { return cell_arity == 3 ? 1.0 / 3.0 : 0.5; }

std::vector<InteractionRegion> build_interaction_regions(const Mesh2D& mesh) {
  std::vector<InteractionRegion> regions;
  regions.reserve(mesh.num_vertices());
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    InteractionRegion r;
    r.vertex = v;
    r.cells = mesh.cells_at_vertex(v);
    r.facets = mesh.facets_at_vertex(v);
    for (int c : r.cells) (void)mesh.cell_facets_at_vertex(c, v);  // n=2 check
    for (int f : r.facets) r.sub_facets.push_back({f, mesh.facet(f).a == v ? 0 : 1});
    regions.push_back(std::move(r));
  }
  return regions;
}

namespace {

Vec2 continuity_point(const Mesh2D& mesh, int facet, int vertex, double theta) {
  const Vec2 pv = mesh.vertex(vertex);
  const Vec2 po = mesh.vertex(mesh.facet_other_vertex(facet, vertex));
  return pv + theta * (po - pv);
}

/// Continuity-point parameter for a facet: from the adjacent cell arity.
/// Mixed arities across one facet are not supported.
double facet_theta(const Mesh2D& mesh, int facet) {
  const Facet& f = mesh.facet(facet);
  const int nl = mesh.cell(f.left).n;
  if (!f.boundary()) {
    const int nr = mesh.cell(f.right).n;
    if (nl != nr)
      throw AssemblyError("mpfa: facet " + std::to_string(facet) +
                          " shared by elements of different arity");
  }
  return continuity_parameter(nl);
}

}  // namespace

VertexSystem local_gradient_system(const Mesh2D& mesh, const PermField& K, int vertex,
                                   const std::vector<BcKind>& facet_bc) {
  VertexSystem sys;
  sys.vertex = vertex;
  sys.cells = mesh.cells_at_vertex(vertex);
  sys.facets = mesh.facets_at_vertex(vertex);
  const int m = static_cast<int>(sys.facets.size());
  const int nc = static_cast<int>(sys.cells.size());

  std::vector<int> facet_local(mesh.num_facets(), -1);
  for (int lf = 0; lf < m; ++lf) facet_local[sys.facets[lf]] = lf;
  std::vector<int> cell_local(mesh.num_cells(), -1);
  for (int lc = 0; lc < nc; ++lc) cell_local[sys.cells[lc]] = lc;

  for (int f : sys.facets)
    if (mesh.facet(f).boundary()) sys.boundary_facets.push_back(f);
  const int nd = static_cast<int>(sys.boundary_facets.size());
  std::vector<int> data_local(mesh.num_facets(), -1);
  for (int ld = 0; ld < nd; ++ld) data_local[sys.boundary_facets[ld]] = ld;

  // one-sided flux stencils: flux[f from cell c] = w * nu_f^T K_c Ginv_c * (x - p_c)
  // coefficients per (cell, local facet slot 0/1)
  struct CellFlux {
    std::array<int, 2> lf{{-1, -1}};       // local facet indices
    std::array<Vec2, 2> alpha_rows;        // per facet: nu^T K Ginv (row) -> both coefs
  };
  // For cell c and its facets (f1, f2): alpha(f) = nu_f^T K_c Ginv (1x2),
  // flux(f, c) = w_f [ alpha(f)_1 (x_{f1} - p_c) + alpha(f)_2 (x_{f2} - p_c) ].
  std::vector<std::array<double, 4>> coef(nc);  // [f_row][slot]: 2x2 per cell
  std::vector<std::array<int, 2>> cell_lf(nc);

  const double geom_scale = std::max(mesh.min_edge_length(), 1e-300);
  for (int lc = 0; lc < nc; ++lc) {
    const int c = sys.cells[lc];
    const auto cf = mesh.cell_facets_at_vertex(c, vertex);
    const double theta = continuity_parameter(mesh.cell(c).n);
    Eigen::Matrix2d G;
    for (int k = 0; k < 2; ++k) {
      const Vec2 y = continuity_point(mesh, cf[k], vertex, theta);
      const Vec2 d = y - mesh.cell(c).centroid;
      G(k, 0) = d.x;
      G(k, 1) = d.y;
    }
    if (std::abs(G.determinant()) < 1e-14 * geom_scale * geom_scale)
      throw AssemblyError("mpfa: singular interaction-region geometry at vertex " +
                          std::to_string(vertex));
    const Eigen::Matrix2d Ginv = G.inverse();
    const Tensor2& Kc = K.at(c);
    for (int k = 0; k < 2; ++k) {
      const Vec2 nu = mesh.facet(cf[k]).normal;
      const Vec2 Knu = Kc.apply(nu);  // K symmetric: nu^T K = (K nu)^T
      // row = (K nu)^T Ginv
      coef[lc][2 * k + 0] = Knu.x * Ginv(0, 0) + Knu.y * Ginv(1, 0);
      coef[lc][2 * k + 1] = Knu.x * Ginv(0, 1) + Knu.y * Ginv(1, 1);
      cell_lf[lc][k] = facet_local[cf[k]];
    }
  }

  auto one_sided_flux = [&](int lc, int which, Eigen::RowVectorXd& on_x, double& on_pc) {
    // flux through the cell's facet slot `which`, oriented by the global normal
    const int f = sys.facets[cell_lf[lc][which]];
    const double w = -0.5 * mesh.facet(f).length;
    on_x.setZero(m);
    const double a1 = coef[lc][2 * which + 0];
    const double a2 = coef[lc][2 * which + 1];
    on_x(cell_lf[lc][0]) += w * a1;
    on_x(cell_lf[lc][1]) += w * a2;
    on_pc = -w * (a1 + a2);
  };

  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m, m);
  Eigen::MatrixXd Bc = Eigen::MatrixXd::Zero(m, nc);
  Eigen::MatrixXd Bd = Eigen::MatrixXd::Zero(m, nd);

  Eigen::RowVectorXd row_x(m);
  for (int lf = 0; lf < m; ++lf) {
    const int f = sys.facets[lf];
    const Facet& ff = mesh.facet(f);
    if (!ff.boundary()) {
      // flux continuity: flux(left side) - flux(right side) = 0
      for (const int side : {0, 1}) {
        const int c = side == 0 ? ff.left : ff.right;
        const int lc = cell_local[c];
        const int which = cell_lf[lc][0] == lf ? 0 : 1;
        double on_pc;
        one_sided_flux(lc, which, row_x, on_pc);
        const double s = side == 0 ? 1.0 : -1.0;
        M.row(lf) += s * row_x;
        Bc(lf, lc) -= s * on_pc;
      }
    } else if (facet_bc[f] == BcKind::dirichlet) {
      M(lf, lf) = 1.0;
      Bd(lf, data_local[f]) = 1.0;
    } else {
      // prescribed outward flux density: flux(left) = density * |f|/2
      const int lc = cell_local[ff.left];
      const int which = cell_lf[lc][0] == lf ? 0 : 1;
      double on_pc;
      one_sided_flux(lc, which, row_x, on_pc);
      M.row(lf) += row_x;
      Bc(lf, lc) -= on_pc;
      Bd(lf, data_local[f]) = 0.5 * ff.length;
    }
  }

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);
  // PartialPivLU has no rank query; detect singularity via solution residual
  sys.P_cells = lu.solve(Bc);
  sys.P_data = lu.solve(Bd);
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  if (((M * sys.P_cells - Bc).cwiseAbs().maxCoeff() > 1e-8 * scale) ||
      (nd > 0 && (M * sys.P_data - Bd).cwiseAbs().maxCoeff() > 1e-8 * scale))
    throw AssemblyError("mpfa: singular local system at vertex " + std::to_string(vertex));

  // one-sided fluxes with sub-facet pressures eliminated; canonical side is
  // the facet's left cell (interior fluxes are single-valued by construction)
  sys.F_cells = Eigen::MatrixXd::Zero(m, nc);
  sys.F_data = Eigen::MatrixXd::Zero(m, nd);
  for (int lf = 0; lf < m; ++lf) {
    const int f = sys.facets[lf];
    const Facet& ff = mesh.facet(f);
    if (ff.boundary() && facet_bc[f] == BcKind::neumann) {
      sys.F_data(lf, data_local[f]) = 0.5 * ff.length;  // flux = density * |half|
      continue;
    }
    const int lc = cell_local[ff.left];
    const int which = cell_lf[lc][0] == lf ? 0 : 1;
    double on_pc;
    one_sided_flux(lc, which, row_x, on_pc);
    sys.F_cells.row(lf) = row_x * sys.P_cells;
    sys.F_cells(lf, lc) += on_pc;
    sys.F_data.row(lf) = row_x * sys.P_data;
  }
  return sys;
}

std::vector<BcKind> uniform_bc(const Mesh2D& mesh, BcKind kind) {
  std::vector<BcKind> bc(mesh.num_facets(), kind);
  return bc;
}

SubdomainOperator::SubdomainOperator(const Mesh2D& mesh, PermField K,
                                     std::vector<BcKind> boundary_facet_bc)
    : mesh_(&mesh), K_(std::move(K)), facet_bc_(std::move(boundary_facet_bc)) {
  if (K_.size() != mesh.num_cells())
    throw AssemblyError("mpfa: permeability field size does not match mesh");
  if (static_cast<int>(facet_bc_.size()) != mesh.num_facets())
    throw AssemblyError("mpfa: boundary spec size does not match facet count");

  // enumerate boundary dofs (one per boundary sub-facet)
  bdof_index_.assign(2 * mesh.num_facets(), -1);
  nullspace_ = true;
  for (int f = 0; f < mesh.num_facets(); ++f) {
    const Facet& ff = mesh_->facet(f);
    if (!ff.boundary()) continue;
    if (facet_bc_[f] == BcKind::dirichlet) nullspace_ = false;
    const double theta = facet_theta(*mesh_, f);
    for (int end = 0; end < 2; ++end) {
      const int v = end == 0 ? ff.a : ff.b;
      BoundaryDof d;
      d.facet = f;
      d.end = end;
      d.vertex = v;
      d.weight = 0.5 * ff.length;
      d.half_midpoint = (mesh_->vertex(v) * 3.0 + mesh_->vertex(mesh_->facet_other_vertex(f, v))) / 4.0;
      d.continuity_point = continuity_point(*mesh_, f, v, theta);
      d.kind = facet_bc_[f];
      bdof_index_[subfacet_id(f, end)] = static_cast<int>(bdofs_.size());
      bdofs_.push_back(d);
    }
  }

  const int nc = mesh.num_cells();
  const int nb = num_boundary_dofs();
  volumes_.resize(nc);
  for (int c = 0; c < nc; ++c) volumes_(c) = mesh.cell(c).area;

  std::vector<Eigen::Triplet<double>> tGp, tGd, tTp, tTd;
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    VertexSystem sys = local_gradient_system(mesh, K_, v, facet_bc_);
    const int m = static_cast<int>(sys.facets.size());
    const int ncl = static_cast<int>(sys.cells.size());
    const int ndl = static_cast<int>(sys.boundary_facets.size());
    for (int lf = 0; lf < m; ++lf) {
      const int f = sys.facets[lf];
      const int end = mesh.facet(f).a == v ? 0 : 1;
      const int row = subfacet_id(f, end);
      for (int lc = 0; lc < ncl; ++lc)
        if (sys.F_cells(lf, lc) != 0.0) tGp.emplace_back(row, sys.cells[lc], sys.F_cells(lf, lc));
      for (int ld = 0; ld < ndl; ++ld) {
        const int bf = sys.boundary_facets[ld];
        const int bend = mesh.facet(bf).a == v ? 0 : 1;
        const int col = bdof_index_[subfacet_id(bf, bend)];
        if (sys.F_data(lf, ld) != 0.0) tGd.emplace_back(row, col, sys.F_data(lf, ld));
      }
      if (mesh.facet(f).boundary()) {
        const int bd = bdof_index_[row];
        for (int lc = 0; lc < ncl; ++lc)
          if (sys.P_cells(lf, lc) != 0.0) tTp.emplace_back(bd, sys.cells[lc], sys.P_cells(lf, lc));
        for (int ld = 0; ld < ndl; ++ld) {
          const int bf = sys.boundary_facets[ld];
          const int bend = mesh.facet(bf).a == v ? 0 : 1;
          const int col = bdof_index_[subfacet_id(bf, bend)];
          if (sys.P_data(lf, ld) != 0.0) tTd.emplace_back(bd, col, sys.P_data(lf, ld));
        }
      }
    }
  }
  Gp_ = SpMat(2 * mesh.num_facets(), nc);
  Gd_ = SpMat(2 * mesh.num_facets(), nb);
  Tp_ = SpMat(nb, nc);
  Td_ = SpMat(nb, nb);
  Gp_.setFromTriplets(tGp.begin(), tGp.end());
  Gd_.setFromTriplets(tGd.begin(), tGd.end());
  Tp_.setFromTriplets(tTp.begin(), tTp.end());
  Td_.setFromTriplets(tTd.begin(), tTd.end());

  // cell balances: sum of outward sub-facet fluxes = source integral
  std::vector<Eigen::Triplet<double>> tA, tRd;
  Eigen::SparseMatrix<double, Eigen::RowMajor> GpR = Gp_, GdR = Gd_;
  for (int c = 0; c < nc; ++c) {
    for (int f : mesh.facets_of_cell(c)) {
      const double sign = mesh.facet(f).left == c ? 1.0 : -1.0;
      for (int end = 0; end < 2; ++end) {
        const int row = subfacet_id(f, end);
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(GpR, row); it; ++it)
          tA.emplace_back(c, it.col(), sign * it.value());
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(GdR, row); it; ++it)
          tRd.emplace_back(c, it.col(), -sign * it.value());
      }
    }
  }
  A_ = SpMat(nc, nc);
  Rd_ = SpMat(nc, nb);
  A_.setFromTriplets(tA.begin(), tA.end());
  Rd_.setFromTriplets(tRd.begin(), tRd.end());
  A_.prune([](int, int, double v) { return v != 0.0; });

  if (nullspace_) {
    // bordered system [[A, vol], [vol^T, 0]] imposing the zero-mean constraint
    SpMat Ab(nc + 1, nc + 1);
    std::vector<Eigen::Triplet<double>> tAb;
    for (int k = 0; k < A_.outerSize(); ++k)
      for (SpMat::InnerIterator it(A_, k); it; ++it)
        tAb.emplace_back(it.row(), it.col(), it.value());
    for (int c = 0; c < nc; ++c) {
      tAb.emplace_back(c, nc, volumes_(c));
      tAb.emplace_back(nc, c, volumes_(c));
    }
    Ab.setFromTriplets(tAb.begin(), tAb.end());
    fact_.emplace(linalg::factorize(Ab, linalg::FactorKind::augmented_symmetric));
  } else {
    fact_.emplace(linalg::factorize(A_, linalg::FactorKind::general));
  }
}

Vector SubdomainOperator::source_integrals(const ScalarFn& f) const {
  Vector b(num_cells());
  for (int c = 0; c < num_cells(); ++c)
    b(c) = mesh_->cell(c).area * (f ? f(mesh_->cell(c).centroid) : 0.0);
  return b;
}

Vector SubdomainOperator::boundary_values(const ScalarFn& g, const ScalarFn& q) const {
  Vector bd = Vector::Zero(num_boundary_dofs());
  for (int i = 0; i < num_boundary_dofs(); ++i) {
    const BoundaryDof& d = bdofs_[i];
    if (d.kind == BcKind::dirichlet)
      bd(i) = g ? g(d.continuity_point) : 0.0;
    else
      bd(i) = q ? q(d.half_midpoint) : 0.0;
  }
  return bd;
}

SubdomainSolution SubdomainOperator::solve(const Vector& boundary_data,
                                           const Vector& source) const {
  if (boundary_data.size() != num_boundary_dofs() || source.size() != num_cells())
    throw SolverError("mpfa: data size mismatch in subdomain solve");
  Vector b = source + Rd_ * boundary_data;
  if (!nullspace_) {
    SubdomainSolution s;
    s.p = fact_->solve(b);
    s.r = 0.0;
    return s;
  }
  Vector bb(num_cells() + 1);
  bb.head(num_cells()) = b;
  bb(num_cells()) = 0.0;
  Vector x = fact_->solve(bb);
  SubdomainSolution s;
  s.p = x.head(num_cells());
  s.r = x(num_cells());
  return s;
}

Vector SubdomainOperator::reconstruct_fluxes(const Vector& p, const Vector& bd) const {
  const Vector sub = Gp_ * p + Gd_ * bd;
  Vector out(mesh_->num_facets());
  for (int f = 0; f < mesh_->num_facets(); ++f)
    out(f) = sub(subfacet_id(f, 0)) + sub(subfacet_id(f, 1));
  return out;
}

Vector SubdomainOperator::boundary_fluxes(const Vector& p, const Vector& bd) const {
  const Vector sub = Gp_ * p + Gd_ * bd;
  Vector out(num_boundary_dofs());
  for (int i = 0; i < num_boundary_dofs(); ++i)
    out(i) = sub(subfacet_id(bdofs_[i].facet, bdofs_[i].end));
  return out;
}

Vector SubdomainOperator::boundary_pressures(const Vector& p, const Vector& bd) const {
  return Tp_ * p + Td_ * bd;
}

double SubdomainOperator::facet_boundary_pressure(const Vector& sub, int facet) const {
  const int d0 = bdof_index_[subfacet_id(facet, 0)];
  const int d1 = bdof_index_[subfacet_id(facet, 1)];
  if (d0 < 0 || d1 < 0) throw SolverError("mpfa: facet is not a boundary facet");
  return 0.5 * (sub(d0) + sub(d1));
}

std::pair<Eigen::RowVectorXd, Eigen::RowVectorXd> SubdomainOperator::facet_flux_stencil(
    int facet) const {
  Eigen::RowVectorXd on_p = Eigen::RowVectorXd::Zero(num_cells());
  Eigen::RowVectorXd on_d = Eigen::RowVectorXd::Zero(num_boundary_dofs());
  Eigen::SparseMatrix<double, Eigen::RowMajor> GpR = Gp_, GdR = Gd_;
  for (int end = 0; end < 2; ++end) {
    const int row = subfacet_id(facet, end);
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(GpR, row); it; ++it)
      on_p(it.col()) += it.value();
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(GdR, row); it; ++it)
      on_d(it.col()) += it.value();
  }
  return {on_p, on_d};
}

SubdomainOperator assemble_subdomain(const Mesh2D& mesh, const PermField& K,
                                     const std::vector<BcKind>& boundary_facet_bc) {
  return SubdomainOperator(mesh, K, boundary_facet_bc);
}

}  // namespace fmdd::mpfa
