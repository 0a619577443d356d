#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "fmdd/geometry.hpp"
#include "fmdd/mesh.hpp"
#include "fmdd/perm.hpp"

namespace fmdd::mfmfe {

/// BDM1 velocity basis on the reference triangle (P1^2, six functions).
/// Dofs are the values of nu_edge . v at the two endpoints of each edge,
/// ordered edge-major: (e0,r0),(e0,r1),(e1,r1),(e1,r2),(e2,r2),(e2,r0)
/// with edges e0=(r0,r1), e1=(r1,r2), e2=(r2,r0).
struct ReferenceBDM1 {
  ReferenceBDM1();

  /// coefficients[i] is a 2x3 matrix C with v_i(x) = C.col(0) + x*C.col(1) + y*C.col(2).
  std::array<Eigen::Matrix<double, 2, 3>, 6> coefficients;

  Vec2 evaluate(int i, const Vec2& x) const;
  double divergence(int i) const;  // constant per basis function
};

struct PiolaMap {
  Eigen::Matrix2d DF;
  double J = 0.0;  // |det DF|
  Vec2 translation;
};

/// Affine map from the reference triangle (0,0),(1,0),(0,1) to the element.
PiolaMap piola_map(const Vec2& p0, const Vec2& p1, const Vec2& p2);

/// Dof layout on a physical triangle: (edge k, endpoint j) where edge k runs
/// from vertex k to vertex (k+1)%3; dof index = 2k + j.
struct QuadratureMassMatrix {
  Eigen::Matrix<double, 6, 6> M;
  std::array<Vec2, 3> vertices;
};

/// Velocity mass matrix (K^-1 ., .) under the element-wise vertex quadrature
/// rule. Exactly block-diagonal by vertex: dofs whose edges do not meet at a
/// common vertex never couple.
QuadratureMassMatrix assemble_vertex_quadrature_mass(const Vec2& p0, const Vec2& p1,
                                                     const Vec2& p2, const Tensor2& K);

/// Mixed-method elimination around one interior mesh vertex: expresses the
/// velocity dofs located at the vertex in terms of the pressures of the
/// incident cells, and returns the resulting half-facet flux stencils.
struct VertexFluxStencils {
  int vertex = -1;
  std::vector<int> facets;  // interior facets at the vertex
  std::vector<int> cells;
  /// stencil(row f, col c): flux through the half of facets[f] adjacent to
  /// the vertex, oriented by the facet's global normal, per unit pressure.
  Eigen::MatrixXd stencil;
};

VertexFluxStencils eliminate_velocity(const Mesh2D& mesh, const PermField& K, int vertex);

}  // namespace fmdd::mfmfe
