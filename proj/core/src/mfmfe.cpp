#include "fmdd/mfmfe.hpp"

#include <cmath>

#include "fmdd/errors.hpp"

namespace fmdd::mfmfe {

namespace {

constexpr std::array<std::array<int, 2>, 3> kEdgeVerts{{{0, 1}, {1, 2}, {2, 0}}};

Vec2 outward_normal(const Vec2& a, const Vec2& b, const Vec2& opposite) {
  Vec2 n = (b - a).perp();
  n = n / n.norm();
  if (n.dot(a - opposite) < 0.0) n = n * (-1.0);
  return n;
}

}  // namespace

ReferenceBDM1::ReferenceBDM1() {
  const std::array<Vec2, 3> r{{{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}}};
  // 6 dof functionals: nu_e . v at edge endpoints
  Eigen::Matrix<double, 6, 6> D;
  auto basis_eval = [&](int coeff, const Vec2& x) {
    // coefficient layout: (component, {1, x, y})
    Eigen::Matrix<double, 2, 3> C = Eigen::Matrix<double, 2, 3>::Zero();
    C(coeff % 2, coeff / 2) = 1.0;
    return Vec2{C(0, 0) + C(0, 1) * x.x + C(0, 2) * x.y,
                C(1, 0) + C(1, 1) * x.x + C(1, 2) * x.y};
  };
  for (int dof = 0; dof < 6; ++dof) {
    const int e = dof / 2, j = dof % 2;
    const Vec2 a = r[kEdgeVerts[e][0]], b = r[kEdgeVerts[e][1]];
    const Vec2 nu = outward_normal(a, b, r[3 - kEdgeVerts[e][0] - kEdgeVerts[e][1]]);
    const Vec2 x = j == 0 ? a : b;
    for (int c = 0; c < 6; ++c) D(dof, c) = nu.dot(basis_eval(c, x));
  }
  const Eigen::Matrix<double, 6, 6> C = D.inverse();
  for (int i = 0; i < 6; ++i) {
    Eigen::Matrix<double, 2, 3> Ci = Eigen::Matrix<double, 2, 3>::Zero();
    for (int c = 0; c < 6; ++c) Ci(c % 2, c / 2) += C(c, i);
    coefficients[i] = Ci;
  }
}

Vec2 ReferenceBDM1::evaluate(int i, const Vec2& x) const {
  const auto& C = coefficients[i];
  return {C(0, 0) + C(0, 1) * x.x + C(0, 2) * x.y, C(1, 0) + C(1, 1) * x.x + C(1, 2) * x.y};
}

double ReferenceBDM1::divergence(int i) const {
  return coefficients[i](0, 1) + coefficients[i](1, 2);
}

PiolaMap piola_map(const Vec2& p0, const Vec2& p1, const Vec2& p2) {
  PiolaMap m;
  m.DF << p1.x - p0.x, p2.x - p0.x, p1.y - p0.y, p2.y - p0.y;
  m.J = std::abs(m.DF.determinant());
  if (!(m.J > 0.0)) throw AssemblyError("mfmfe: degenerate triangle in Piola map");
  m.translation = p0;
  return m;
}

QuadratureMassMatrix assemble_vertex_quadrature_mass(const Vec2& p0, const Vec2& p1,
                                                     const Vec2& p2, const Tensor2& K) {
  QuadratureMassMatrix out;
  out.vertices = {p0, p1, p2};
  const std::array<Vec2, 3> r{{p0, p1, p2}};
  const double area = 0.5 * std::abs((p1 - p0).cross(p2 - p0));

  // Physical basis values at vertices: a basis function with dofs at vertex v
  // equals N_v^{-1} e_k there and vanishes at the other vertices, where N_v
  // stacks the outward normals of the two edges meeting at v. The quadrature
  // only sees vertex values, so the matrix assembles vertex by vertex.
  const Tensor2 Kinv = K.inverse();
  out.M.setZero();
  for (int v = 0; v < 3; ++v) {
    // edges at vertex v: edge v (starts at v) and edge (v+2)%3 (ends at v)
    const std::array<std::pair<int, int>, 2> dofs{{{v, 0}, {(v + 2) % 3, 1}}};
    Eigen::Matrix2d N;
    std::array<int, 2> dof_ids{};
    for (int k = 0; k < 2; ++k) {
      const int e = dofs[k].first;
      const Vec2 a = r[kEdgeVerts[e][0]], b = r[kEdgeVerts[e][1]];
      const Vec2 nu = outward_normal(a, b, r[3 - kEdgeVerts[e][0] - kEdgeVerts[e][1]]);
      N(k, 0) = nu.x;
      N(k, 1) = nu.y;
      dof_ids[k] = 2 * e + dofs[k].second;
    }
    const Eigen::Matrix2d Ninv = N.inverse();
    Eigen::Matrix2d Kinv_m;
    Kinv_m << Kinv.xx, Kinv.xy, Kinv.xy, Kinv.yy;
    const Eigen::Matrix2d block = (area / 3.0) * Ninv.transpose() * Kinv_m * Ninv;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) out.M(dof_ids[a], dof_ids[b]) = block(a, b);
  }
  return out;
}

VertexFluxStencils eliminate_velocity(const Mesh2D& mesh, const PermField& K, int vertex) {
  VertexFluxStencils out;
  out.vertex = vertex;
  out.facets = mesh.facets_at_vertex(vertex);
  out.cells = mesh.cells_at_vertex(vertex);
  for (int f : out.facets)
    if (mesh.facet(f).boundary())
      throw AssemblyError("mfmfe: eliminate_velocity expects an interior vertex");

  const int m = static_cast<int>(out.facets.size());
  const int nc = static_cast<int>(out.cells.size());
  std::vector<int> facet_local(mesh.num_facets(), -1);
  for (int lf = 0; lf < m; ++lf) facet_local[out.facets[lf]] = lf;

  // vertex-block mass matrix over the facet dofs at this vertex, and the
  // divergence coupling to cell pressures
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m, m);
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(m, nc);
  for (int lc = 0; lc < nc; ++lc) {
    const int c = out.cells[lc];
    const Cell& cell = mesh.cell(c);
    if (cell.n != 3) throw AssemblyError("mfmfe: oracle is restricted to triangles");
    const auto cf = mesh.cell_facets_at_vertex(c, vertex);
    // N stacks the *global* facet normals; dof values are single-valued
    Eigen::Matrix2d N;
    std::array<int, 2> lf{};
    std::array<double, 2> s{};  // orientation of global normal vs outward
    for (int k = 0; k < 2; ++k) {
      const Facet& ff = mesh.facet(cf[k]);
      N(k, 0) = ff.normal.x;
      N(k, 1) = ff.normal.y;
      lf[k] = facet_local[cf[k]];
      s[k] = ff.left == c ? 1.0 : -1.0;
    }
    const Eigen::Matrix2d Ninv = N.inverse();
    const Tensor2 Kinv = K.at(c).inverse();
    Eigen::Matrix2d Kinv_m;
    Kinv_m << Kinv.xx, Kinv.xy, Kinv.xy, Kinv.yy;
    const Eigen::Matrix2d block = (cell.area / 3.0) * Ninv.transpose() * Kinv_m * Ninv;
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) M(lf[a], lf[b]) += block(a, b);
      // b(v_(e,r), w) = s * |e|/2 * w_c
      R(lf[a], lc) += s[a] * 0.5 * mesh.facet(cf[a]).length;
    }
  }

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);
  const Eigen::MatrixXd U = lu.solve(R);  // dofs per unit cell pressure
  if ((M * U - R).cwiseAbs().maxCoeff() > 1e-8 * std::max(1.0, M.cwiseAbs().maxCoeff()))
    throw AssemblyError("mfmfe: singular vertex block at vertex " + std::to_string(vertex));
  out.stencil.resize(m, nc);
  for (int lf = 0; lf < m; ++lf)
    out.stencil.row(lf) = 0.5 * mesh.facet(out.facets[lf]).length * U.row(lf);
  return out;
}

}  // namespace fmdd::mfmfe
