#pragma once

#include <memory>
#include <string>
#include <string_view>

#include <Eigen/SparseLU>

#include "mpx/linalg.hpp"
#include "mpx/models.hpp"
#include "mpx/system.hpp"

namespace mpx {

enum class SchemeId { Midpoint, AVF };

std::string_view to_string(SchemeId scheme);
SchemeId parse_scheme(std::string_view name);

/// Weights of the quadratic chord terms: d1^-1 for the mixed product
/// (a^{k+1}, a^k) in KdV (resp. the diagonal products in NS) and d2^-1 for
/// the remaining ones.
struct SchemeCoefficients {
  double d1;
  double d2;
};

/// Cubic Hamiltonian (KdV): midpoint 4, 8; AVF 6, 6.
SchemeCoefficients kdv_coefficients(SchemeId scheme);
/// Quadratic bracket (NS): midpoint 4, 4; AVF 3, 6.
SchemeCoefficients ns_coefficients(SchemeId scheme);

/// Uniform partition of (t0, T] into n_steps intervals.
struct TimeGrid {
  double t0 = 0.0;
  double t_end = 1.0;
  int n_steps = 1;

  TimeGrid() = default;
  TimeGrid(double start, double end, int steps);
  double dt() const { return (t_end - t0) / n_steps; }
  double time(int k) const { return t0 + k * dt(); }
};

struct StepResult {
  Vector a;
  int iterations = 0;
  double update_norm = 0.0;
};

/// (a1 - a0) / dt = f((a0 + a1) / 2), f = rhs(system, .).
StepResult step_midpoint_generic(const MetriplecticSystem& system, const Vector& a0, double dt,
                                 const FixedPointConfig& fp);

/// (a1 - a0) / dt = int_0^1 f((1 - xi) a0 + xi a1) dxi, with the xi-integral
/// taken by 3-point Gauss-Legendre (exact for vector fields of degree <= 5).
StepResult step_avf_generic(const MetriplecticSystem& system, const Vector& a0, double dt,
                            const FixedPointConfig& fp);

StepResult step_generic(SchemeId scheme, const MetriplecticSystem& system, const Vector& a0,
                        double dt, const FixedPointConfig& fp);

/// Gauss evaluation of int_0^1 f((1 - xi) a0 + xi a1) dxi.
template <typename F>
Vector chord_average(F&& f, const Vector& a0, const Vector& a1);

/// R (a1 a1 / d2 + a0 a0 / d2 + a1 a0 / d1): the chord average of
/// (1/2) R y (x) y for the scheme, up to the factor 2.
Vector kdv_quadratic_term(SchemeId scheme, const TrilinearForm& r, const Vector& a0,
                          const Vector& a1);

struct KdvStep {
  Vector a;
  Vector b_star;
  int iterations = 0;
  double update_norm = 0.0;
};

/// Fully discrete KdV update
///   (M + dt/2 nu K) a1 + dt A b* = (M - dt/2 nu K) a0
///   M b* = alpha R(a1 a1 / d2 + a0 a0 / d2 + a1 a0 / d1) - eta K (a0 + a1) / 2.
/// The linear block is factorised once; the quadratic term is lagged in a
/// Picard iteration on a1 starting from a0.
class KdvStepper {
 public:
  KdvStepper(SchemeId scheme, const KdvParams& params, std::shared_ptr<const KdvOperators> ops,
             double dt, FixedPointConfig fp = {});

  KdvStep step(const Vector& a0) const;
  SchemeId scheme() const { return scheme_; }
  double dt() const { return dt_; }

 private:
  SchemeId scheme_;
  KdvParams params_;
  std::shared_ptr<const KdvOperators> ops_;
  double dt_;
  FixedPointConfig fp_;
  SparseMatrix explicit_part_;  // M - dt/2 nu K
  std::unique_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> block_;
};

KdvStep kdv_step(SchemeId scheme, const Vector& a0, double dt, const KdvParams& params,
                 std::shared_ptr<const KdvOperators> ops, const FixedPointConfig& fp = {});

struct NsStep {
  Vector a;
  Vector b;
  int iterations = 0;
  double update_norm = 0.0;
};

/// Fully discrete vorticity update
///   (M + dt/2 nu K) a1 - dt/d1 J(a1) b1 - dt/d2 J(a1) b0 - dt/d2 J(a0) b1
///     = (M - dt/2 nu K) a0 + dt/d1 J(a0) b0,   K b1 = M a1.
class NsStepper {
 public:
  NsStepper(SchemeId scheme, double nu, std::shared_ptr<const NsOperators> ops, double dt,
            FixedPointConfig fp = {});

  NsStep step(const Vector& a0, const Vector& b0) const;
  SchemeId scheme() const { return scheme_; }
  double dt() const { return dt_; }

 private:
  SchemeId scheme_;
  double nu_;
  std::shared_ptr<const NsOperators> ops_;
  double dt_;
  FixedPointConfig fp_;
  SparseMatrix explicit_part_;
  std::unique_ptr<SpdSolver> implicit_part_;
};

NsStep ns_step(SchemeId scheme, const Vector& a0, const Vector& b0, double dt, double nu,
               std::shared_ptr<const NsOperators> ops, const FixedPointConfig& fp = {});

// ---------------------------------------------------------------------------

template <typename F>
Vector chord_average(F&& f, const Vector& a0, const Vector& a1) {
  constexpr double offset = 0.38729833462074170;  // sqrt(3/5) / 2
  const double nodes[3] = {0.5 - offset, 0.5, 0.5 + offset};
  const double weights[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
  Vector sum = Vector::Zero(a0.size());
  for (int q = 0; q < 3; ++q) {
    const Vector y = (1.0 - nodes[q]) * a0 + nodes[q] * a1;
    sum += weights[q] * f(y);
  }
  return sum;
}

}  // namespace mpx
