#include "mpx/integrators.hpp"

#include <stdexcept>
#include <vector>

namespace mpx {

std::string_view to_string(SchemeId scheme) {
  return scheme == SchemeId::Midpoint ? "midpoint" : "avf";
}

SchemeId parse_scheme(std::string_view name) {
  if (name == "midpoint" || name == "im") return SchemeId::Midpoint;
  if (name == "avf") return SchemeId::AVF;
  throw std::invalid_argument("unknown scheme '" + std::string(name) + "' (expected midpoint|avf)");
}

SchemeCoefficients kdv_coefficients(SchemeId scheme) {
  return scheme == SchemeId::Midpoint ? SchemeCoefficients{4.0, 8.0} : SchemeCoefficients{6.0, 6.0};
}

SchemeCoefficients ns_coefficients(SchemeId scheme) {
  return scheme == SchemeId::Midpoint ? SchemeCoefficients{4.0, 4.0} : SchemeCoefficients{3.0, 6.0};
}

TimeGrid::TimeGrid(double start, double end, int steps) : t0(start), t_end(end), n_steps(steps) {
  if (steps < 1) throw std::invalid_argument("TimeGrid: need at least one step");
  if (!std::isfinite(start) || !std::isfinite(end) || end == start) {
    throw std::invalid_argument("TimeGrid: invalid interval");
  }
}

StepResult step_midpoint_generic(const MetriplecticSystem& system, const Vector& a0, double dt,
                                 const FixedPointConfig& fp) {
  auto map = [&](const Vector& a1) -> Vector {
    return a0 + dt * rhs(system, Vector(0.5 * (a0 + a1)));
  };
  auto result = fixed_point_solve(map, a0, fp);
  return {std::move(result.x), result.iterations, result.update_norm};
}

StepResult step_avf_generic(const MetriplecticSystem& system, const Vector& a0, double dt,
                            const FixedPointConfig& fp) {
  auto f = [&](const Vector& y) { return rhs(system, y); };
  auto map = [&](const Vector& a1) -> Vector { return a0 + dt * chord_average(f, a0, a1); };
  auto result = fixed_point_solve(map, a0, fp);
  return {std::move(result.x), result.iterations, result.update_norm};
}

StepResult step_generic(SchemeId scheme, const MetriplecticSystem& system, const Vector& a0,
                        double dt, const FixedPointConfig& fp) {
  return scheme == SchemeId::Midpoint ? step_midpoint_generic(system, a0, dt, fp)
                                      : step_avf_generic(system, a0, dt, fp);
}

Vector kdv_quadratic_term(SchemeId scheme, const TrilinearForm& r, const Vector& a0,
                          const Vector& a1) {
  const auto [d1, d2] = kdv_coefficients(scheme);
  return r.contract(a1, a1) / d2 + r.contract(a0, a0) / d2 + r.contract(a1, a0) / d1;
}

KdvStepper::KdvStepper(SchemeId scheme, const KdvParams& params,
                       std::shared_ptr<const KdvOperators> ops, double dt, FixedPointConfig fp)
    : scheme_(scheme), params_(params), ops_(std::move(ops)), dt_(dt), fp_(fp) {
  params_.validate();
  fp_.validate();
  const int n = static_cast<int>(ops_->mass.rows());
  const SparseMatrix& m = ops_->mass;
  const SparseMatrix& k = ops_->stiffness;
  const SparseMatrix& a = ops_->advection;
  explicit_part_ = m - (0.5 * dt_ * params_.nu) * k;
  const SparseMatrix top_left = m + (0.5 * dt_ * params_.nu) * k;

  std::vector<Triplet> trips;
  auto add = [&](const SparseMatrix& block, int row0, int col0, double scale) {
    for (Eigen::Index r = 0; r < block.outerSize(); ++r) {
      for (SparseMatrix::InnerIterator it(block, r); it; ++it) {
        trips.emplace_back(row0 + static_cast<int>(it.row()), col0 + static_cast<int>(it.col()),
                           scale * it.value());
      }
    }
  };
  add(top_left, 0, 0, 1.0);
  add(a, 0, n, dt_);
  add(k, n, 0, 0.5 * params_.eta);
  add(m, n, n, 1.0);
  Eigen::SparseMatrix<double> block(2 * n, 2 * n);
  block.setFromTriplets(trips.begin(), trips.end());
  block.makeCompressed();
  block_ = std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
  block_->compute(block);
  if (block_->info() != Eigen::Success) {
    throw SolverError("KdvStepper: factorisation of the linear block failed", 0.0);
  }
}

KdvStep KdvStepper::step(const Vector& a0) const {
  const Eigen::Index n = a0.size();
  if (n != ops_->mass.rows()) throw std::invalid_argument("KdvStepper: state size mismatch");
  Vector rhs(2 * n);
  rhs.head(n) = explicit_part_ * a0;
  const Vector half_k_a0 = (0.5 * params_.eta) * (ops_->stiffness * a0);
  Vector b_star;
  auto map = [&](const Vector& a1) -> Vector {
    rhs.tail(n) = params_.alpha * kdv_quadratic_term(scheme_, ops_->triple, a0, a1) - half_k_a0;
    const Vector sol = block_->solve(rhs);
    b_star = sol.tail(n);
    return sol.head(n);
  };
  auto result = fixed_point_solve(map, a0, fp_);
  return {std::move(result.x), std::move(b_star), result.iterations, result.update_norm};
}

KdvStep kdv_step(SchemeId scheme, const Vector& a0, double dt, const KdvParams& params,
                 std::shared_ptr<const KdvOperators> ops, const FixedPointConfig& fp) {
  return KdvStepper(scheme, params, std::move(ops), dt, fp).step(a0);
}

NsStepper::NsStepper(SchemeId scheme, double nu, std::shared_ptr<const NsOperators> ops,
                     double dt, FixedPointConfig fp)
    : scheme_(scheme), nu_(nu), ops_(std::move(ops)), dt_(dt), fp_(fp) {
  if (!(nu_ >= 0.0)) throw std::invalid_argument("NsStepper: nu must be non-negative");
  fp_.validate();
  explicit_part_ = ops_->mass - (0.5 * dt_ * nu_) * ops_->stiffness;
  implicit_part_ = std::make_unique<SpdSolver>(SparseMatrix(ops_->mass + (0.5 * dt_ * nu_) * ops_->stiffness));
}

NsStep NsStepper::step(const Vector& a0, const Vector& b0) const {
  const auto [d1, d2] = ns_coefficients(scheme_);
  const Vector fixed = explicit_part_ * a0 + (dt_ / d1) * ops_->apply_j(a0, b0);
  auto map = [&](const Vector& a1) -> Vector {
    const Vector b1 = ops_->stream(a1);
    const Vector bracket = ops_->apply_j(a1, b1) / d1 + ops_->apply_j(a1, b0) / d2 +
                           ops_->apply_j(a0, b1) / d2;
    return implicit_part_->solve(fixed + dt_ * bracket);
  };
  auto result = fixed_point_solve(map, a0, fp_);
  Vector b1 = ops_->stream(result.x);
  return {std::move(result.x), std::move(b1), result.iterations, result.update_norm};
}

NsStep ns_step(SchemeId scheme, const Vector& a0, const Vector& b0, double dt, double nu,
               std::shared_ptr<const NsOperators> ops, const FixedPointConfig& fp) {
  return NsStepper(scheme, nu, std::move(ops), dt, fp).step(a0, b0);
}

}  // namespace mpx
