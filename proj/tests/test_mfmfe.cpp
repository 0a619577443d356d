#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "fmdd/errors.hpp"
#include "fmdd/mfmfe.hpp"
#include "fmdd/mpfa.hpp"

using namespace fmdd;

namespace {

Tensor2 random_spd(std::mt19937& rng) {
  std::uniform_real_distribution<double> k(0.2, 5.0), a(0.0, M_PI);
  const double k1 = k(rng), k2 = k(rng), t = a(rng);
  const double c = std::cos(t), s = std::sin(t);
  return {c * c * k1 + s * s * k2, c * s * (k1 - k2), s * s * k1 + c * c * k2};
}

}  // namespace

TEST_CASE("reference basis: normal traces and divergence") {
  mfmfe::ReferenceBDM1 ref;
  const std::array<Vec2, 3> r{{{0, 0}, {1, 0}, {0, 1}}};
  const std::array<std::array<int, 2>, 3> ev{{{0, 1}, {1, 2}, {2, 0}}};
  for (int dof = 0; dof < 6; ++dof) {
    const int e = dof / 2, j = dof % 2;
    for (int e2 = 0; e2 < 3; ++e2) {
      Vec2 t = r[ev[e2][1]] - r[ev[e2][0]];
      Vec2 nu = t.perp() / t.norm();
      const Vec2 opp = r[3 - ev[e2][0] - ev[e2][1]];
      if (nu.dot(r[ev[e2][0]] - opp) < 0) nu = nu * (-1.0);
      for (int j2 = 0; j2 < 2; ++j2) {
        const double v = nu.dot(ref.evaluate(dof, r[ev[e2][j2]]));
        const double expected = (e2 == e && j2 == j) ? 1.0 : 0.0;
        CHECK(v == doctest::Approx(expected).epsilon(1e-13));
      }
      // nu.v is linear along the edge: midpoint value = mean of endpoints
      const Vec2 mid = (r[ev[e2][0]] + r[ev[e2][1]]) * 0.5;
      const double vm = nu.dot(ref.evaluate(dof, mid));
      const double va = nu.dot(ref.evaluate(dof, r[ev[e2][0]]));
      const double vb = nu.dot(ref.evaluate(dof, r[ev[e2][1]]));
      CHECK(vm == doctest::Approx(0.5 * (va + vb)).epsilon(1e-13));
    }
    // divergence of each basis function is constant by construction; check
    // it against the net boundary flux (divergence theorem)
    double net = 0.0;
    for (int e2 = 0; e2 < 3; ++e2) {
      Vec2 t = r[ev[e2][1]] - r[ev[e2][0]];
      Vec2 nu = t.perp() / t.norm();
      const Vec2 opp = r[3 - ev[e2][0] - ev[e2][1]];
      if (nu.dot(r[ev[e2][0]] - opp) < 0) nu = nu * (-1.0);
      const double va = nu.dot(ref.evaluate(dof, r[ev[e2][0]]));
      const double vb = nu.dot(ref.evaluate(dof, r[ev[e2][1]]));
      net += t.norm() * 0.5 * (va + vb);
    }
    CHECK(ref.divergence(dof) == doctest::Approx(net / 0.5).epsilon(1e-12));
  }
}

TEST_CASE("piola map determinants") {
  auto ref = mfmfe::piola_map({0, 0}, {1, 0}, {0, 1});
  CHECK(ref.J == doctest::Approx(1.0));
  CHECK((ref.DF - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() <= 1e-15);

  auto scaled = mfmfe::piola_map({0, 0}, {2, 0}, {0, 2});
  CHECK(scaled.J == doctest::Approx(4.0));

  auto reflected = mfmfe::piola_map({0, 0}, {0, 1}, {1, 0});
  CHECK(reflected.J == doctest::Approx(1.0));
  CHECK(reflected.J > 0.0);

  CHECK_THROWS_AS(mfmfe::piola_map({0, 0}, {1, 0}, {2, 0}), AssemblyError);
}

TEST_CASE("vertex quadrature mass matrix: block structure and symmetry") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const Vec2 p0{u(rng), u(rng)};
    Vec2 p1 = p0 + Vec2{1.0 + 0.2 * u(rng), 0.3 * u(rng)};
    Vec2 p2 = p0 + Vec2{0.3 * u(rng), 1.0 + 0.2 * u(rng)};
    const Tensor2 K = random_spd(rng);
    auto qm = mfmfe::assemble_vertex_quadrature_mass(p0, p1, p2, K);
    // symmetry
    CHECK((qm.M - qm.M.transpose()).cwiseAbs().maxCoeff() <= 1e-14 * qm.M.cwiseAbs().maxCoeff());
    // three 2x2 vertex blocks; all other entries identically zero
    // vertex v couples dofs {2v, 2((v+2)%3)+1}
    auto vertex_of = [](int dof) {
      const int e = dof / 2, j = dof % 2;
      const std::array<std::array<int, 2>, 3> ev{{{0, 1}, {1, 2}, {2, 0}}};
      return ev[e][j];
    };
    int nonzero_offblock = 0, pattern_nonzeros = 0;
    for (int a = 0; a < 6; ++a)
      for (int b = 0; b < 6; ++b) {
        if (a == b) continue;
        if (vertex_of(a) == vertex_of(b)) {
          ++pattern_nonzeros;
        } else if (qm.M(a, b) != 0.0) {
          ++nonzero_offblock;
        }
      }
    CHECK(nonzero_offblock == 0);
    CHECK(pattern_nonzeros == 6);
    // SPD
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(qm.M);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("vertex rule integrates constant fields exactly") {
  // phi = psi = (1,0), K = I: (phi, psi)_Q = |element|
  const Vec2 p0{0.2, -0.1}, p1{1.4, 0.3}, p2{0.5, 1.1};
  const double area = 0.5 * std::abs((p1 - p0).cross(p2 - p0));
  auto qm = mfmfe::assemble_vertex_quadrature_mass(p0, p1, p2, Tensor2::identity());
  // dof vector of the constant field (1,0): nu_e . (1,0) at both endpoints
  const std::array<Vec2, 3> r{{p0, p1, p2}};
  const std::array<std::array<int, 2>, 3> ev{{{0, 1}, {1, 2}, {2, 0}}};
  Eigen::Matrix<double, 6, 1> d;
  for (int dof = 0; dof < 6; ++dof) {
    const int e = dof / 2;
    Vec2 t = r[ev[e][1]] - r[ev[e][0]];
    Vec2 nu = t.perp() / t.norm();
    const Vec2 opp = r[3 - ev[e][0] - ev[e][1]];
    if (nu.dot(r[ev[e][0]] - opp) < 0) nu = nu * (-1.0);
    d(dof) = nu.x;
  }
  CHECK(d.dot(qm.M * d) == doctest::Approx(area).epsilon(1e-13));
}

TEST_CASE("reference-element mass matrix agrees with basis-function quadrature") {
  // independent route: evaluate the polynomial basis at the vertices and
  // apply the vertex rule directly
  mfmfe::ReferenceBDM1 ref;
  const std::array<Vec2, 3> r{{{0, 0}, {1, 0}, {0, 1}}};
  const double area = 0.5;
  const Tensor2 K{1.7, 0.4, 0.9};
  const Tensor2 Ki = K.inverse();
  Eigen::Matrix<double, 6, 6> M2 = Eigen::Matrix<double, 6, 6>::Zero();
  for (int a = 0; a < 6; ++a)
    for (int b = 0; b < 6; ++b)
      for (int v = 0; v < 3; ++v) {
        const Vec2 va = ref.evaluate(a, r[v]), vb = ref.evaluate(b, r[v]);
        M2(a, b) += area / 3.0 * Ki.apply(va).dot(vb);
      }
  auto qm = mfmfe::assemble_vertex_quadrature_mass(r[0], r[1], r[2], K);
  CHECK((qm.M - M2).cwiseAbs().maxCoeff() <= 1e-12 * M2.cwiseAbs().maxCoeff());
}

TEST_CASE("eliminated stencils match MPFA on crisscross patches") {
  Mesh2D mesh = generate_structured({{0, 0}, {3, 3}}, 3, 3, ElementKind::tri);
  PermField K_id = PermField::constant(mesh, Tensor2::identity());
  std::mt19937 rng(17);
  auto bc = mpfa::uniform_bc(mesh, mpfa::BcKind::dirichlet);
  auto compare_all = [&](const PermField& K) {
    int tested = 0;
    for (int v = 0; v < mesh.num_vertices(); ++v) {
      bool interior = true;
      for (int f : mesh.facets_at_vertex(v)) interior = interior && !mesh.facet(f).boundary();
      if (!interior) continue;
      auto mf = mfmfe::eliminate_velocity(mesh, K, v);
      auto sys = mpfa::local_gradient_system(mesh, K, v, bc);
      const double scale = std::max(1.0, sys.F_cells.cwiseAbs().maxCoeff());
      for (size_t lf = 0; lf < mf.facets.size(); ++lf)
        for (size_t lc = 0; lc < mf.cells.size(); ++lc) {
          int slf = -1, slc = -1;
          for (size_t i = 0; i < sys.facets.size(); ++i)
            if (sys.facets[i] == mf.facets[lf]) slf = static_cast<int>(i);
          for (size_t i = 0; i < sys.cells.size(); ++i)
            if (sys.cells[i] == mf.cells[lc]) slc = static_cast<int>(i);
          CHECK(std::abs(mf.stencil(static_cast<int>(lf), static_cast<int>(lc)) -
                         sys.F_cells(slf, slc)) <= 1e-10 * scale);
        }
      ++tested;
    }
    CHECK(tested > 0);
  };
  compare_all(K_id);
  // anisotropic diagonal
  compare_all(PermField::constant(mesh, Tensor2::diagonal(1.0, 10.0)));
  // random cellwise SPD tensors
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<Tensor2> Ks(mesh.num_cells());
    for (auto& k : Ks) k = random_spd(rng);
    compare_all(PermField(Ks));
  }
}

TEST_CASE("eliminate_velocity rejects boundary vertices and quads") {
  Mesh2D tri = generate_structured({{0, 0}, {1, 1}}, 2, 2, ElementKind::tri);
  PermField K = PermField::constant(tri, Tensor2::identity());
  CHECK_THROWS_AS(mfmfe::eliminate_velocity(tri, K, 0), AssemblyError);
}
