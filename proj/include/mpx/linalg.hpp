#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "mpx/types.hpp"

namespace mpx {

/// Problems at or below this size use a sparse LDLT factorisation; larger
/// ones use diagonally preconditioned conjugate gradients.
inline constexpr int kDirectSolveLimit = 20000;

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double residual, int iterations = 0)
      : std::runtime_error(what), residual_(residual), iterations_(iterations) {}
  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

/// Relative residual ||A x - b||_2 / ||b||_2 (absolute when b = 0).
double relative_residual(const SparseMatrix& a, const Vector& x, const Vector& b);

/// Reusable solver for a symmetric positive definite matrix.
class SpdSolver {
 public:
  explicit SpdSolver(SparseMatrix matrix, double tol = 1e-12);

  Vector solve(const Vector& rhs) const;
  const SparseMatrix& matrix() const { return matrix_; }
  int size() const { return static_cast<int>(matrix_.rows()); }
  bool direct() const { return direct_ != nullptr; }

 private:
  using ColMatrix = Eigen::SparseMatrix<double>;
  SparseMatrix matrix_;
  double tol_;
  std::unique_ptr<Eigen::SimplicialLDLT<ColMatrix>> direct_;
  ColMatrix column_major_;
  std::unique_ptr<Eigen::ConjugateGradient<ColMatrix, Eigen::Lower | Eigen::Upper>> iterative_;
};

Vector solve_spd(const SparseMatrix& matrix, const Vector& rhs, double tol = 1e-12);

/// Solves K x = r on a closed surface, where K has the constants as kernel.
///
/// The rhs is made consistent by removing its component along M 1, i.e.
/// r <- r - M 1 (1^T r) / (1^T M 1), which for r = M a subtracts the mean of a.
/// The returned representative satisfies 1^T M x = 0. The induced map
/// r -> x is symmetric, so (M a)^T x is a well-defined quadratic form in a.
/// A rhs lying along M 1 up to summation noise yields x = 0. `tol` bounds
/// the normwise backward error ||P(r - K x)|| / (||K|| ||x|| + ||r||), P
/// being the projection above.
class ZeroMeanPoissonSolver {
 public:
  ZeroMeanPoissonSolver(const SparseMatrix& stiffness, const SparseMatrix& mass,
                        double tol = 1e-12);

  Vector solve(const Vector& rhs) const;
  /// The consistent rhs actually solved for.
  Vector project_rhs(const Vector& rhs) const;
  int size() const { return static_cast<int>(stiffness_.rows()); }

 private:
  using ColMatrix = Eigen::SparseMatrix<double>;
  SparseMatrix stiffness_;
  Vector mass_ones_;  // M 1
  double measure_;    // 1^T M 1
  double stiffness_norm_ = 0.0;  // ||K||_inf
  double tol_;
  std::unique_ptr<Eigen::SparseLU<ColMatrix>> bordered_;  // [K, M1; (M1)^T, 0]
  ColMatrix column_major_;
  std::unique_ptr<Eigen::ConjugateGradient<ColMatrix, Eigen::Lower | Eigen::Upper>> iterative_;
};

Vector solve_saddle_zero_mean(const SparseMatrix& stiffness, const SparseMatrix& mass,
                              const Vector& rhs, double tol = 1e-12);

struct FixedPointConfig {
  double tolerance = 1e-12;  // on ||x_{n+1} - x_n||_inf
  int max_iterations = 100;

  void validate() const {
    if (!(tolerance > 0.0)) throw std::invalid_argument("fixed point tolerance must be positive");
    if (max_iterations < 1) throw std::invalid_argument("fixed point needs max_iterations >= 1");
  }
};

struct FixedPointResult {
  Vector x;
  int iterations = 0;
  double update_norm = 0.0;
};

class FixedPointError : public std::runtime_error {
 public:
  FixedPointError(const std::string& what, Vector last, double update_norm, int iterations)
      : std::runtime_error(what),
        last_(std::move(last)),
        update_norm_(update_norm),
        iterations_(iterations) {}
  const Vector& last_iterate() const { return last_; }
  double update_norm() const { return update_norm_; }
  int iterations() const { return iterations_; }

 private:
  Vector last_;
  double update_norm_;
  int iterations_;
};

/// Plain Picard iteration x <- map(x). One call of `map` counts as one
/// iteration; stops when the max-norm update drops to the tolerance.
template <typename Map>
FixedPointResult fixed_point_solve(Map&& map, Vector initial, const FixedPointConfig& config) {
  config.validate();
  Vector x = std::move(initial);
  double update = 0.0;
  for (int it = 1; it <= config.max_iterations; ++it) {
    Vector next = map(static_cast<const Vector&>(x));
    update = (next - x).lpNorm<Eigen::Infinity>();
    x = std::move(next);
    if (!std::isfinite(update)) {
      throw FixedPointError("fixed point iteration produced a non-finite update", x, update, it);
    }
    if (update <= config.tolerance) return {std::move(x), it, update};
  }
  throw FixedPointError("fixed point iteration did not converge (last update " +
                            std::to_string(update) + ")",
                        x, update, config.max_iterations);
}

/// Sparse third-order tensor R(i, j, k) = <v_j v_k, v_i>.
class TrilinearForm {
 public:
  struct Entry {
    int i, j, k;
    double value;
  };

  TrilinearForm() = default;
  TrilinearForm(int n, std::vector<Entry> entries);

  int size() const { return n_; }
  const std::vector<Entry>& entries() const { return entries_; }
  double entry(int i, int j, int k) const;

  /// (R a (x) c)_i = sum_{j,k} R(i,j,k) a_j c_k.
  Vector contract(const Vector& a, const Vector& c) const;
  /// sum_{i,j,k} R(i,j,k) a_i a_j a_k.
  double triple(const Vector& a) const;

 private:
  int n_ = 0;
  std::vector<Entry> entries_;  // sorted by (i, j, k), unique
};

/// One "i j value" line per stored entry (0-based indices).
void write_coordinate(std::ostream& out, const SparseMatrix& matrix);
void write_coordinate(const std::string& path, const SparseMatrix& matrix);

/// max_ij |X + X^T| and max_ij |X - X^T|.
double skew_defect(const SparseMatrix& x);
double symmetry_defect(const SparseMatrix& x);
double max_abs(const SparseMatrix& x);

}  // namespace mpx
