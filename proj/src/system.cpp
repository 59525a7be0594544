#include "mpx/system.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mpx {

void finalize(MetriplecticSystem& system, double solver_tol) {
  if (system.mass.rows() == 0) throw std::invalid_argument("MetriplecticSystem: missing mass");
  system.n_dofs = static_cast<int>(system.mass.rows());
  if (!system.mass_solver) system.mass_solver = std::make_shared<SpdSolver>(system.mass, solver_tol);
  if (!system.j_builder || !system.g_builder || !system.grad_h || !system.grad_s ||
      !system.h_value || !system.s_value) {
    throw std::invalid_argument("MetriplecticSystem: incomplete operator set");
  }
}

State::State(Vector coefficients, double time) : a(std::move(coefficients)), t(time) {
  if (!a.allFinite() || !std::isfinite(t)) throw std::invalid_argument("State: non-finite entry");
}

Vector MetriplecticSystem::apply_j_hat(const Vector& a, const Vector& v) const {
  const Vector w = solve_mass(v);
  const Vector jw = apply_j ? apply_j(a, w) : Vector(j_builder(a) * w);
  return solve_mass(jw);
}

Vector MetriplecticSystem::apply_g_hat(const Vector& a, const Vector& v) const {
  return solve_mass(g_builder(a) * solve_mass(v));
}

Vector rhs(const MetriplecticSystem& system, const Vector& a) {
  if (a.size() != system.n_dofs || !a.allFinite()) {
    throw std::invalid_argument("rhs: state must be finite with n_dofs entries");
  }
  const Vector b = system.solve_mass(system.grad_h(a));
  const Vector c = system.solve_mass(system.grad_s(a));
  const Vector jb = system.apply_j ? system.apply_j(a, b) : Vector(system.j_builder(a) * b);
  return system.solve_mass(jb + system.g_builder(a) * c);
}

double poisson_bracket(const MetriplecticSystem& system, const Vector& a, const Vector& grad_f,
                       const Vector& grad_l) {
  return system.apply_j_hat(a, grad_f).dot(grad_l);
}

double metric_bracket(const MetriplecticSystem& system, const Vector& a, const Vector& grad_f,
                      const Vector& grad_l) {
  return system.apply_g_hat(a, grad_f).dot(grad_l);
}

NullConditionReport check_null_conditions(const MetriplecticSystem& system, const Vector& a,
                                          double tol) {
  NullConditionReport report;
  const Vector gh = system.metric_null_residual ? system.metric_null_residual(a)
                                                : system.apply_g_hat(a, system.grad_h(a));
  report.metric_on_h = gh.lpNorm<Eigen::Infinity>();
  report.poisson_on_s = system.apply_j_hat(a, system.grad_s(a)).lpNorm<Eigen::Infinity>();
  report.passed = report.metric_on_h <= tol && report.poisson_on_s <= tol;
  return report;
}

SparseMatrix double_bracket_metric(const SparseMatrix& j, const SparseMatrix& m) {
  if (j.rows() != j.cols() || m.rows() != j.rows() || m.cols() != j.cols()) {
    throw std::invalid_argument("double_bracket_metric: dimension mismatch");
  }
  const SpdSolver solver(m);
  const DenseMatrix jd = DenseMatrix(j);
  DenseMatrix minv_j(jd.rows(), jd.cols());
  for (Eigen::Index c = 0; c < jd.cols(); ++c) minv_j.col(c) = solver.solve(jd.col(c));
  DenseMatrix g = jd.transpose() * minv_j;
  g = 0.5 * (g + g.transpose()).eval();
  return g.sparseView(1.0, 0.0);
}

bool check_equilibrium(const MetriplecticSystem& system, const Vector& a_star, double tol) {
  return rhs(system, a_star).lpNorm<Eigen::Infinity>() <= tol;
}

double gradient_check(const std::function<double(const Vector&)>& value,
                      const std::function<Vector(const Vector&)>& gradient, const Vector& a,
                      double eps, int max_coordinates) {
  const Vector g = gradient(a);
  double worst = 0.0;
  Vector x = a;
  const Eigen::Index n = a.size();
  const Eigen::Index count = max_coordinates > 0 ? std::min<Eigen::Index>(n, max_coordinates) : n;
  for (Eigen::Index k = 0; k < count; ++k) {
    const Eigen::Index i = k * n / count;
    x(i) = a(i) + eps;
    const double plus = value(x);
    x(i) = a(i) - eps;
    const double minus = value(x);
    x(i) = a(i);
    worst = std::max(worst, std::abs((plus - minus) / (2.0 * eps) - g(i)));
  }
  return worst;
}

double min_signed_rayleigh(const SparseMatrix& g, MetricSign sign, int samples,
                           std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  const double s = sign == MetricSign::PositiveSemiDefinite ? 1.0 : -1.0;
  double worst = std::numeric_limits<double>::infinity();
  Vector x(g.cols());
  for (int k = 0; k < samples; ++k) {
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = normal(rng);
    worst = std::min(worst, s * x.dot(g * x) / x.squaredNorm());
  }
  return worst;
}

StructureReport check_structure(const MetriplecticSystem& system, const Vector& a,
                                std::mt19937_64& rng, int gradient_coordinates) {
  StructureReport report;
  const SparseMatrix j = system.j_builder(a);
  const SparseMatrix g = system.g_builder(a);
  report.j_skew = skew_defect(j) / std::max(1.0, max_abs(j));
  report.g_symmetry = symmetry_defect(g) / std::max(1.0, max_abs(g));
  report.g_min_rayleigh = min_signed_rayleigh(g, system.g_sign, 20, rng);
  if (gradient_coordinates != 0) {
    // Central differences carry rounding noise of order eps |f| / h, so the
    // error is reported relative to max(1, |f(a)|).
    report.grad_h_error =
        gradient_check(system.h_value, system.grad_h, a, 1e-5, gradient_coordinates) /
        std::max(1.0, std::abs(system.h_value(a)));
    report.grad_s_error =
        gradient_check(system.s_value, system.grad_s, a, 1e-5, gradient_coordinates) /
        std::max(1.0, std::abs(system.s_value(a)));
  }
  // Casimirs are conserved by the Poisson part of the flow.
  const Vector f = system.apply_j_hat(a, system.grad_h(a));
  for (const auto& c : system.casimirs) {
    report.casimir_rates.emplace_back(c.name, std::abs(c.gradient(a).dot(f)));
  }
  if (system.metriplectic) {
    report.has_null_conditions = true;
    report.null_conditions = check_null_conditions(system, a, 0.0);
  }
  return report;
}

}  // namespace mpx
