#pragma once

#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "mpx/linalg.hpp"
#include "mpx/types.hpp"

namespace mpx {

/// Sign of the metric operator G: entropy-producing (PSD) or dissipating (NSD).
enum class MetricSign { PositiveSemiDefinite, NegativeSemiDefinite };

struct Casimir {
  std::string name;
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
};

/// Semi-discrete system  M da/dt = J(a) b + G(a) c,  M b = grad H(a),
/// M c = grad S(a), i.e. da/dt = Jhat(a) grad H + Ghat(a) grad S with
/// Jhat = M^-1 J M^-1 and Ghat = M^-1 G M^-1.
struct MetriplecticSystem {
  std::string name;
  int n_dofs = 0;
  SparseMatrix mass;
  std::shared_ptr<const SpdSolver> mass_solver;

  std::function<SparseMatrix(const Vector&)> j_builder;
  std::function<SparseMatrix(const Vector&)> g_builder;
  MetricSign g_sign = MetricSign::PositiveSemiDefinite;

  std::function<double(const Vector&)> h_value;
  std::function<Vector(const Vector&)> grad_h;
  std::function<double(const Vector&)> s_value;
  std::function<Vector(const Vector&)> grad_s;

  std::vector<Casimir> casimirs;

  /// Declares G grad H = 0 and J grad S = 0.
  bool metriplectic = false;
  /// Replaces Ghat grad H in the null-condition report when the model's
  /// degeneracy takes an affine form (2D Navier-Stokes: Ghat grad H + a = 0).
  std::function<Vector(const Vector&)> metric_null_residual;
  /// Optional fast J(a) b that skips assembling J(a).
  std::function<Vector(const Vector&, const Vector&)> apply_j;

  Vector solve_mass(const Vector& rhs) const { return mass_solver->solve(rhs); }
  SparseMatrix j_matrix(const Vector& a) const { return j_builder(a); }
  SparseMatrix g_matrix(const Vector& a) const { return g_builder(a); }
  /// Jhat(a) v and Ghat(a) v as composed operators.
  Vector apply_j_hat(const Vector& a, const Vector& v) const;
  Vector apply_g_hat(const Vector& a, const Vector& v) const;
};

/// Builds the mass solver and checks the pieces are present.
void finalize(MetriplecticSystem& system, double solver_tol = 1e-12);

/// Finite state vector; rejects NaN and Inf.
struct State {
  Vector a;
  double t = 0.0;

  State(Vector coefficients, double time);
};

Vector rhs(const MetriplecticSystem& system, const Vector& a);

double poisson_bracket(const MetriplecticSystem& system, const Vector& a, const Vector& grad_f,
                       const Vector& grad_l);
double metric_bracket(const MetriplecticSystem& system, const Vector& a, const Vector& grad_f,
                      const Vector& grad_l);

struct NullConditionReport {
  double metric_on_h = 0.0;      // ||Ghat grad H|| (or the model's affine residual)
  double poisson_on_s = 0.0;     // ||Jhat grad S||
  bool passed = false;
};

NullConditionReport check_null_conditions(const MetriplecticSystem& system, const Vector& a,
                                          double tol);

/// G_db = J^T M^-1 J, symmetric positive semi-definite for skew J. Forms
/// M^-1 J densely, so intended for small and moderate sizes.
SparseMatrix double_bracket_metric(const SparseMatrix& j, const SparseMatrix& m);

bool check_equilibrium(const MetriplecticSystem& system, const Vector& a_star, double tol);

/// Largest |central difference - gradient| over all coordinates, or over
/// `max_coordinates` evenly spaced ones when positive.
double gradient_check(const std::function<double(const Vector&)>& value,
                      const std::function<Vector(const Vector&)>& gradient, const Vector& a,
                      double eps = 1e-5, int max_coordinates = -1);

/// Minimum of x^T G x / x^T x over `samples` random x, multiplied by the
/// declared sign so that a valid operator gives a value >= 0 (up to rounding).
double min_signed_rayleigh(const SparseMatrix& g, MetricSign sign, int samples, std::mt19937_64& rng);

/// Summary of the structural checks on one state.
struct StructureReport {
  double j_skew = 0.0;           // max |J + J^T| / max(1, max|J|)
  double g_symmetry = 0.0;       // max |G - G^T| / max(1, max|G|)
  double g_min_rayleigh = 0.0;   // signed, see min_signed_rayleigh
  double grad_h_error = 0.0;     // gradient_check / max(1, |H(a)|)
  double grad_s_error = 0.0;     // gradient_check / max(1, |S(a)|)
  std::vector<std::pair<std::string, double>> casimir_rates;  // |grad C . Jhat grad H|
  NullConditionReport null_conditions;
  bool has_null_conditions = false;
};

/// `gradient_coordinates`: -1 checks every coordinate, 0 skips the
/// gradient checks, k > 0 checks k evenly spaced coordinates.
StructureReport check_structure(const MetriplecticSystem& system, const Vector& a,
                                std::mt19937_64& rng, int gradient_coordinates = -1);

}  // namespace mpx
