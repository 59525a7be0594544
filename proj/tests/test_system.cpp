#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>

#include "mpx/fem.hpp"
#include "mpx/mesh.hpp"
#include "mpx/models.hpp"
#include "mpx/system.hpp"

using namespace mpx;

namespace {

constexpr double pi = std::numbers::pi;

Vector random_vector(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

Vector zero_mean(Vector a, const SparseMatrix& mass) {
  const Vector m1 = mass * Vector::Ones(a.size());
  a.array() -= m1.dot(a) / m1.sum();
  return a;
}

// Inert system with J = 0, G = 0 on a small interval.
MetriplecticSystem inert_system(int n) {
  MetriplecticSystem s;
  s.mass = assemble_mass(P1Space(build_periodic_interval(1.0, n)));
  s.j_builder = [n](const Vector&) { return SparseMatrix(n, n); };
  s.g_builder = [n](const Vector&) { return SparseMatrix(n, n); };
  s.h_value = [](const Vector& a) { return 0.5 * a.squaredNorm(); };
  s.grad_h = [](const Vector& a) { return a; };
  s.s_value = [](const Vector& a) { return a.sum(); };
  s.grad_s = [](const Vector& a) { return Vector::Ones(a.size()); };
  s.metriplectic = true;
  finalize(s);
  return s;
}

std::shared_ptr<const KdvOperators> kdv_ops(int n, double length = 20 * pi) {
  return std::make_shared<KdvOperators>(
      std::make_shared<P1Space>(build_periodic_interval(length, n)));
}

std::shared_ptr<const NsOperators> torus_ops(int n) {
  return std::make_shared<NsOperators>(
      std::make_shared<P1Space>(build_torus_mesh(2 * pi, 2 * pi, n, n)));
}

}  // namespace

TEST(Rhs, InertSystemIsStatic) {
  const MetriplecticSystem s = inert_system(6);
  std::mt19937_64 rng(1);
  EXPECT_TRUE(rhs(s, random_vector(6, rng)).isZero(0.0));
  EXPECT_THROW(rhs(s, Vector::Zero(5)), std::invalid_argument);
}

TEST(Rhs, KdvConstantStateIsEquilibrium) {
  const KdvParams p{6.0, 1.0, 0.25, 20 * pi};
  const MetriplecticSystem s = kdv_system(p, kdv_ops(32));
  EXPECT_LE(rhs(s, Vector::Constant(32, 0.7)).lpNorm<Eigen::Infinity>(), 1e-13);
  EXPECT_TRUE(check_equilibrium(s, Vector::Constant(32, 0.7), 1e-12));
}

TEST(Rhs, AdvectionEqualsDirectAssembly) {
  auto space = std::make_shared<P1Space>(build_periodic_interval(1.0, 8));
  const MetriplecticSystem s = advection_diffusion_system(1.0, 0.0, space);
  const Eigen::MatrixXd m = Eigen::MatrixXd(assemble_mass(*space));
  const Eigen::MatrixXd a = Eigen::MatrixXd(assemble_advection_1d(*space));
  std::mt19937_64 rng(2);
  const Vector u = random_vector(8, rng);
  const Vector want = -m.ldlt().solve(a * u);
  EXPECT_LE((rhs(s, u) - want).lpNorm<Eigen::Infinity>(), 1e-13);
}

TEST(PoissonBracket, SelfBracketVanishes) {
  const KdvParams p{6.0, 1.0, 0.0, 20 * pi};
  const MetriplecticSystem s = kdv_system(p, kdv_ops(16));
  std::mt19937_64 rng(3);
  const Vector a = random_vector(16, rng);
  const Vector g = random_vector(16, rng);
  EXPECT_NEAR(poisson_bracket(s, a, g, g), 0.0, 1e-13);
}

TEST(PoissonBracket, EnstrophyIsCasimir) {
  auto ops = torus_ops(5);
  const MetriplecticSystem s = ns_torus_system(NsParams{0.0, Geometry::Torus}, ops);
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector a = zero_mean(random_vector(s.n_dofs, rng), ops->mass);
    const Vector grad_e = ops->mass * a;
    EXPECT_NEAR(poisson_bracket(s, a, s.grad_h(a), grad_e), 0.0, 1e-12);
  }
}

TEST(Brackets, MatchDenseOracle) {
  const int n = 10;
  const KdvParams p{6.0, 1.0, 0.3, 5.0};
  const MetriplecticSystem s = kdv_system(p, kdv_ops(n, 5.0));
  std::mt19937_64 rng(5);
  const Vector a = random_vector(n, rng);
  const Vector gf = random_vector(n, rng);
  const Vector gl = random_vector(n, rng);
  const Eigen::MatrixXd minv = Eigen::MatrixXd(s.mass).inverse();
  const Eigen::MatrixXd j = Eigen::MatrixXd(s.j_matrix(a));
  const Eigen::MatrixXd g = Eigen::MatrixXd(s.g_matrix(a));
  EXPECT_NEAR(poisson_bracket(s, a, gf, gl), gl.dot(minv * j * minv * gf), 1e-12);
  EXPECT_NEAR(metric_bracket(s, a, gf, gl), gl.dot(minv * g * minv * gf), 1e-12);
}

TEST(MetricBracket, KdvEntropyProduction) {
  const KdvParams p{6.0, 1.0, 0.25, 20 * pi};
  const MetriplecticSystem s = kdv_system(p, kdv_ops(32));
  EXPECT_EQ(s.g_sign, MetricSign::PositiveSemiDefinite);
  std::mt19937_64 rng(6);
  EXPECT_EQ(metric_bracket(s, Vector::Zero(32), Vector::Zero(32), Vector::Ones(32)), 0.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector a = random_vector(32, rng);
    const Vector gs = s.grad_s(a);
    EXPECT_GE(metric_bracket(s, a, gs, gs), -1e-13);
  }
}

TEST(NullConditions, InertSystem) {
  const MetriplecticSystem s = inert_system(5);
  const auto r = check_null_conditions(s, Vector::Ones(5), 0.0);
  EXPECT_EQ(r.metric_on_h, 0.0);
  EXPECT_EQ(r.poisson_on_s, 0.0);
  EXPECT_TRUE(r.passed);
}

TEST(NullConditions, NavierStokesZeroMeanStates) {
  auto torus = torus_ops(5);
  std::shared_ptr<const NsOperators> sphere =
      std::make_shared<NsOperators>(std::make_shared<P1Space>(build_icosphere(1)));
  std::mt19937_64 rng(7);
  for (const std::shared_ptr<const NsOperators>& ops : {torus, sphere}) {
    const MetriplecticSystem s = ns_system(NsParams{0.01, Geometry::Torus}, ops);
    for (int trial = 0; trial < 20; ++trial) {
      const Vector a = zero_mean(random_vector(s.n_dofs, rng), ops->mass);
      // |Jhat(a) M a| and |Ghat grad H(a) + a|.
      EXPECT_LE(s.apply_j_hat(a, ops->mass * a).norm(), 1e-12);
      const Vector gh = s.apply_g_hat(a, s.grad_h(a));
      EXPECT_LE((gh / 0.01 + a).norm(), 1e-11) << "metric defect " << (gh / 0.01 + a).norm();
      EXPECT_TRUE(check_null_conditions(s, a, 1e-11).passed);
    }
  }
}

TEST(DoubleBracket, ZeroJ) {
  const SparseMatrix m = assemble_mass(P1Space(build_periodic_interval(1.0, 6)));
  EXPECT_EQ(max_abs(double_bracket_metric(SparseMatrix(6, 6), m)), 0.0);
}

TEST(DoubleBracket, PositiveSemiDefinite) {
  std::mt19937_64 rng(8);
  for (int n : {3, 6, 10}) {
    const Eigen::MatrixXd r = Eigen::MatrixXd::Random(n, n);
    const Eigen::MatrixXd skew = r - r.transpose();
    const SparseMatrix m = assemble_mass(P1Space(build_periodic_interval(2.0, n)));
    const Eigen::MatrixXd g = Eigen::MatrixXd(double_bracket_metric(skew.sparseView(), m));
    EXPECT_LE((g - g.transpose()).cwiseAbs().maxCoeff(), 0.0);
    for (int k = 0; k < 1000; ++k) {
      const Vector v = random_vector(n, rng);
      EXPECT_GE(v.dot(g * v), -1e-13);
    }
  }
}

TEST(DoubleBracket, AdvectionKeepsConstants) {
  const P1Space s(build_periodic_interval(3.0, 9));
  const SparseMatrix g = double_bracket_metric(assemble_advection_1d(s), assemble_mass(s));
  EXPECT_LE((g * Vector::Ones(9)).lpNorm<Eigen::Infinity>(), 1e-14);
}

TEST(Equilibrium, WalshIsSteadyEulerFlowUpToProjection) {
  // The Walsh vorticity is an exact steady Euler flow; its interpolant is
  // steady up to a defect that shrinks at the projection rate O(h^2).
  std::vector<double> defects;
  for (int n : {64, 128}) {
    auto ops = torus_ops(n);
    const MetriplecticSystem s = ns_torus_system(NsParams{0.0, Geometry::Torus}, ops);
    const Vector a = ops->space->interpolate(
        [](const Point3& p) { return walsh_exact(p.x(), p.y(), 0.0, 0.0).omega; });
    const double scale = a.lpNorm<Eigen::Infinity>();
    defects.push_back(rhs(s, a).lpNorm<Eigen::Infinity>() / scale);
    EXPECT_TRUE(check_equilibrium(s, a, 0.1 * scale * (64.0 * 64.0) / (n * n)));
  }
  EXPECT_GE(defects[0] / defects[1], 3.5);
}

TEST(Equilibrium, RandomStateIsNot) {
  auto ops = torus_ops(6);
  const MetriplecticSystem s = ns_torus_system(NsParams{0.01, Geometry::Torus}, ops);
  std::mt19937_64 rng(9);
  EXPECT_FALSE(check_equilibrium(s, zero_mean(random_vector(s.n_dofs, rng), ops->mass), 1e-6));
}

TEST(GradientCheck, ExactAndWrongGradients) {
  auto f = [](const Vector& a) { return a.array().cube().sum(); };
  auto g = [](const Vector& a) { return Vector(3.0 * a.array().square()); };
  auto wrong = [](const Vector& a) { return Vector(2.0 * a.array().square()); };
  const Vector a = Vector::LinSpaced(6, -1.0, 1.5);
  EXPECT_LE(gradient_check(f, g, a), 1e-8);
  EXPECT_GE(gradient_check(f, wrong, a), 0.1);
  EXPECT_LE(gradient_check(f, g, a, 1e-5, 2), gradient_check(f, g, a));
}

TEST(Structure, KdvPassesAndSymmetrisedJFails) {
  const KdvParams p{6.0, 1.0, 0.25, 20 * pi};
  MetriplecticSystem s = kdv_system(p, kdv_ops(16));
  std::mt19937_64 rng(10);
  const Vector a = random_vector(16, rng);
  StructureReport r = check_structure(s, a, rng);
  EXPECT_LE(r.j_skew, 1e-13);
  EXPECT_LE(r.g_symmetry, 1e-13);
  EXPECT_GE(r.g_min_rayleigh, -1e-12);
  EXPECT_LE(r.grad_h_error, 1e-6);
  EXPECT_LE(r.grad_s_error, 1e-6);

  // Negative control: adding |J|, the symmetric part of a corrupted J.
  const auto skew = s.j_builder;
  s.j_builder = [skew](const Vector& x) {
    const SparseMatrix j = skew(x);
    return SparseMatrix(j + SparseMatrix(j.cwiseAbs()));
  };
  s.apply_j = nullptr;
  r = check_structure(s, a, rng, 0);
  EXPECT_GT(r.j_skew, 1e-3);
}

namespace {

// Cyclic sum {F,{G,H}} + {G,{H,F}} + {H,{F,G}} for linear F, G, H with
// gradients f, g, h; derivatives of Jhat(a) by central differences.
double jacobi_cyclic_sum(const MetriplecticSystem& s, const Vector& a, const Vector& f,
                         const Vector& g, const Vector& h) {
  auto bracket = [&](const Vector& x, const Vector& gf, const Vector& gl) {
    return poisson_bracket(s, x, gf, gl);
  };
  auto grad_bracket = [&](const Vector& gf, const Vector& gl) {
    const double eps = 1e-5;
    Vector d(a.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      Vector plus = a, minus = a;
      plus(i) += eps;
      minus(i) -= eps;
      d(i) = (bracket(plus, gf, gl) - bracket(minus, gf, gl)) / (2 * eps);
    }
    return d;
  };
  return bracket(a, f, grad_bracket(g, h)) + bracket(a, g, grad_bracket(h, f)) +
         bracket(a, h, grad_bracket(f, g));
}

double worst_jacobi(const MetriplecticSystem& s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const Vector a = random_vector(s.n_dofs, rng);
    const Vector f = random_vector(s.n_dofs, rng);
    const Vector g = random_vector(s.n_dofs, rng);
    const Vector h = random_vector(s.n_dofs, rng);
    worst = std::max(worst, std::abs(jacobi_cyclic_sum(s, a, f, g, h)));
  }
  return worst;
}

// Rigid body on R^3: Jhat(a) v = a x v, a Lie-Poisson structure.
MetriplecticSystem rigid_body() {
  MetriplecticSystem s;
  s.mass = SparseMatrix(3, 3);
  s.mass.setIdentity();
  s.j_builder = [](const Vector& a) {
    std::vector<Triplet> t = {{0, 1, -a(2)}, {0, 2, a(1)}, {1, 0, a(2)},
                              {1, 2, -a(0)}, {2, 0, -a(1)}, {2, 1, a(0)}};
    SparseMatrix j(3, 3);
    j.setFromTriplets(t.begin(), t.end());
    return j;
  };
  s.g_builder = [](const Vector&) { return SparseMatrix(3, 3); };
  s.h_value = [](const Vector& a) { return 0.5 * a.squaredNorm(); };
  s.grad_h = [](const Vector& a) { return a; };
  s.s_value = [](const Vector&) { return 0.0; };
  s.grad_s = [](const Vector& a) { return Vector::Zero(a.size()); };
  finalize(s);
  return s;
}

}  // namespace

TEST(Jacobi, HarnessOnRigidBody) { EXPECT_LE(worst_jacobi(rigid_body(), 11), 1e-6); }

TEST(Jacobi, KdvConstantStructure) {
  const MetriplecticSystem s = kdv_system(KdvParams{6.0, 1.0, 0.0, 5.0}, kdv_ops(6, 5.0));
  EXPECT_LE(worst_jacobi(s, 12), 1e-6);
}

TEST(Jacobi, NavierStokesSpotCheck) {
  // Smallest admissible torus mesh (3 x 3, N = 9).
  auto ops = torus_ops(3);
  const MetriplecticSystem s = ns_torus_system(NsParams{0.0, Geometry::Torus}, ops);
  EXPECT_LE(worst_jacobi(s, 13), 1e-6);
}
