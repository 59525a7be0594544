#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>

#include "mpx/fem.hpp"
#include "mpx/mesh.hpp"
#include "mpx/models.hpp"
#include "mpx/quadrature.hpp"

using namespace mpx;

namespace {

constexpr double pi = std::numbers::pi;

P1Space interval(double length, int n) { return P1Space(build_periodic_interval(length, n)); }

Vector random_vector(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

// Entry (i, i + offset mod n) of a circulant matrix.
void expect_circulant(const SparseMatrix& m, const std::vector<std::pair<int, double>>& stencil,
                      double tol) {
  const int n = static_cast<int>(m.rows());
  Eigen::MatrixXd want = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (const auto& [offset, value] : stencil) want(i, ((i + offset) % n + n) % n) += value;
  }
  EXPECT_LE((Eigen::MatrixXd(m) - want).cwiseAbs().maxCoeff(), tol);
}

}  // namespace

TEST(Mass1D, StencilFromElementIntegrals) {
  // On the reference cell: int (1-t)^2 = 1/3 and int t(1-t) = 1/6.
  const double self = 2.0 * (1.0 / 3.0);
  const double neighbour = 1.0 / 6.0;
  expect_circulant(assemble_mass(interval(4.0, 4)), {{-1, neighbour}, {0, self}, {1, neighbour}},
                   1e-16);
}

TEST(Mass, IntegratesOneToMeasure) {
  const P1Space line = interval(2.5, 17);
  const P1Space torus(build_torus_mesh(2 * pi, 3.0, 6, 5));
  const P1Space sphere(build_icosphere(2));
  for (const P1Space* s : {&line, &torus, &sphere}) {
    const Vector one = Vector::Ones(s->n_dofs());
    EXPECT_NEAR(one.dot(assemble_mass(*s) * one), s->measure(), 1e-13);
    EXPECT_LT((lumped_mass(*s) - assemble_mass(*s) * one).norm(), 1e-14);
  }
  EXPECT_NEAR(torus.measure(), 6 * pi, 1e-13);
}

TEST(Mass, TorusSymmetric) {
  for (int n : {4, 9, 16}) {
    const SparseMatrix m = assemble_mass(P1Space(build_torus_mesh(2 * pi, 2 * pi, n, n)));
    EXPECT_LE(symmetry_defect(m), 1e-15);
  }
}

TEST(Stiffness1D, Stencil) {
  expect_circulant(assemble_stiffness(interval(4.0, 4)), {{-1, -1.0}, {0, 2.0}, {1, -1.0}}, 1e-15);
}

TEST(Stiffness, ConstantsInKernel) {
  const P1Space torus(build_torus_mesh(2 * pi, 2 * pi, 8, 8));
  const P1Space sphere(build_icosphere(3));
  const P1Space line = interval(3.0, 10);
  for (const P1Space* s : {&line, &torus, &sphere}) {
    const SparseMatrix k = assemble_stiffness(*s);
    const Vector k1 = k * Vector::Ones(s->n_dofs());
    EXPECT_LE(k1.lpNorm<Eigen::Infinity>(), 1e-14 * max_abs(k));
  }
}

TEST(Stiffness, SphereFirstEigenvalue) {
  const P1Space sphere(build_icosphere(3));
  const Eigen::MatrixXd k = Eigen::MatrixXd(assemble_stiffness(sphere));
  const Eigen::MatrixXd m = Eigen::MatrixXd(assemble_mass(sphere));
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(k, m, Eigen::EigenvaluesOnly);
  ASSERT_EQ(es.info(), Eigen::Success);
  // Eigenvalue 0 once (constants), then l(l+1) = 2 three times.
  EXPECT_NEAR(es.eigenvalues()(0), 0.0, 1e-10);
  for (int i = 1; i <= 3; ++i) EXPECT_NEAR(es.eigenvalues()(i), 2.0, 0.1);
  EXPECT_GT(es.eigenvalues()(4), 5.0);
}

TEST(Advection1D, Stencil) {
  const SparseMatrix a = assemble_advection_1d(interval(4.0, 4));
  expect_circulant(a, {{-1, -0.5}, {1, 0.5}}, 1e-16);
}

TEST(Advection1D, SkewWithConstantKernel) {
  for (int n : {5, 32, 101}) {
    const P1Space s = interval(7.0, n);
    const SparseMatrix a = assemble_advection_1d(s);
    EXPECT_LE(skew_defect(a), 1e-15);
    EXPECT_LE((a * Vector::Ones(n)).lpNorm<Eigen::Infinity>(), 1e-15);
  }
  EXPECT_THROW(assemble_advection_1d(P1Space(build_icosphere(0))), std::invalid_argument);
}

TEST(Trilinear1D, OnesReproduceMass) {
  const P1Space s = interval(3.0, 12);
  const Vector one = Vector::Ones(12);
  const Vector r11 = assemble_trilinear_kdv(s).contract(one, one);
  EXPECT_LT((r11 - assemble_mass(s) * one).norm(), 1e-14);
}

TEST(Trilinear1D, DiagonalEntry) {
  // int_0^1 t^3 + int_0^1 (1-t)^3 = 1/2 with h = 1.
  const TrilinearForm r = assemble_trilinear_kdv(interval(4.0, 4));
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(r.entry(i, i, i), 0.5, 1e-16);
}

TEST(Trilinear1D, SolitonSquareMatchesQuadrature) {
  const int n = 32;
  const P1Space s = interval(20 * pi, n);
  const double h = s.mesh_1d().h;
  const Vector a = s.interpolate([](double x) { return soliton_exact(x, 0.0); });
  const Vector got = assemble_trilinear_kdv(s).contract(a, a);
  // u_h^2 v_i is cubic on each cell, integrated exactly by 4-point Gauss.
  Vector want = Vector::Zero(n);
  for (int c = 0; c < n; ++c) {
    const int i0 = c, i1 = (c + 1) % n;
    for (std::size_t q = 0; q < 4; ++q) {
      const double t = quadrature::gauss4.nodes[q];
      const double w = quadrature::gauss4.weights[q] * h;
      const double u = (1 - t) * a(i0) + t * a(i1);
      want(i0) += w * u * u * (1 - t);
      want(i1) += w * u * u * t;
    }
  }
  EXPECT_LE((got - want).lpNorm<Eigen::Infinity>(), 1e-13);
}

TEST(NsPoissonTensor, ZeroStateGivesZero) {
  const P1Space s(build_torus_mesh(2 * pi, 2 * pi, 5, 5));
  EXPECT_EQ(max_abs(assemble_ns_poisson_tensor(s, Vector::Zero(s.n_dofs()))), 0.0);
}

TEST(NsPoissonTensor, SkewAndAnnihilatesState) {
  const P1Space torus(build_torus_mesh(2 * pi, 2 * pi, 6, 6));
  const P1Space sphere(build_icosphere(1));
  std::uint64_t seed = 3;
  for (const P1Space* s : {&torus, &sphere}) {
    for (int trial = 0; trial < 10; ++trial) {
      const Vector a = random_vector(s->n_dofs(), seed++);
      const Vector b = random_vector(s->n_dofs(), seed++);
      const SparseMatrix j = assemble_ns_poisson_tensor(*s, a);
      EXPECT_LE(skew_defect(j), 1e-13);
      // Jhat(a) M a = M^-1 J(a) a.
      EXPECT_LE((j * a).norm(), 1e-12);
      EXPECT_LE((j * b - apply_ns_poisson_tensor(*s, a, b)).norm(), 1e-13);
    }
  }
}

TEST(Interpolate, ReproducesLinearFunctions) {
  const P1Space s(build_torus_mesh(2.0, 3.0, 4, 6));
  const Vector a = s.interpolate([](const Point3& p) { return 2 * p.x() - p.y(); });
  for (int i = 0; i < s.n_dofs(); ++i) {
    const Point3& p = s.dof_coords()[i];
    EXPECT_DOUBLE_EQ(a(i), 2 * p.x() - p.y());
  }
}
