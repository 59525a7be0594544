#include "mpx/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace mpx {

namespace {
std::string format_residual(double r) {
  std::ostringstream out;
  out << r;
  return out.str();
}
}  // namespace

double relative_residual(const SparseMatrix& a, const Vector& x, const Vector& b) {
  const double rnorm = (a * x - b).norm();
  const double bnorm = b.norm();
  return bnorm > 0.0 ? rnorm / bnorm : rnorm;
}

SpdSolver::SpdSolver(SparseMatrix matrix, double tol) : matrix_(std::move(matrix)), tol_(tol) {
  if (matrix_.rows() != matrix_.cols()) throw std::invalid_argument("SpdSolver: matrix not square");
  matrix_.makeCompressed();
  ColMatrix col = matrix_;
  if (matrix_.rows() <= kDirectSolveLimit) {
    direct_ = std::make_unique<Eigen::SimplicialLDLT<ColMatrix>>(col);
    // LDL^T also succeeds on indefinite matrices; D exposes them.
    if (direct_->info() != Eigen::Success || !(direct_->vectorD().minCoeff() > 0.0)) {
      throw SolverError("SpdSolver: factorisation failed (matrix not SPD?)", 0.0);
    }
  } else {
    iterative_ = std::make_unique<Eigen::ConjugateGradient<ColMatrix, Eigen::Lower | Eigen::Upper>>();
    // Eigen's criterion is looser than the relative residual checked below.
    iterative_->setTolerance(0.1 * tol_);
    iterative_->setMaxIterations(std::max<Eigen::Index>(1000, 10 * matrix_.rows()));
    // The solver keeps a reference to its matrix.
    column_major_ = std::move(col);
    iterative_->compute(column_major_);
  }
}

Vector SpdSolver::solve(const Vector& rhs) const {
  if (rhs.size() != matrix_.rows()) throw std::invalid_argument("SpdSolver: rhs size mismatch");
  if (!rhs.allFinite()) throw SolverError("SpdSolver: non-finite right-hand side", 0.0);
  if (rhs.isZero(0.0)) return Vector::Zero(rhs.size());
  Vector x;
  int iterations = 0;
  if (direct_) {
    x = direct_->solve(rhs);
    // One step of refinement keeps the residual well below tol on
    // badly scaled systems.
    if (relative_residual(matrix_, x, rhs) > tol_) x += direct_->solve(Vector(rhs - matrix_ * x));
  } else {
    x = iterative_->solve(rhs);
    iterations = static_cast<int>(iterative_->iterations());
  }
  const double res = relative_residual(matrix_, x, rhs);
  if (!(res <= tol_)) {
    throw SolverError("SpdSolver: residual " + format_residual(res) + " above tolerance", res,
                      iterations);
  }
  return x;
}

Vector solve_spd(const SparseMatrix& matrix, const Vector& rhs, double tol) {
  return SpdSolver(matrix, tol).solve(rhs);
}

ZeroMeanPoissonSolver::ZeroMeanPoissonSolver(const SparseMatrix& stiffness,
                                             const SparseMatrix& mass, double tol)
    : stiffness_(stiffness), tol_(tol) {
  const Eigen::Index n = stiffness.rows();
  if (n < 2 || stiffness.cols() != n || mass.rows() != n || mass.cols() != n) {
    throw std::invalid_argument("ZeroMeanPoissonSolver: dimension mismatch");
  }
  stiffness_.makeCompressed();
  mass_ones_ = mass * Vector::Ones(n);
  measure_ = mass_ones_.sum();
  for (Eigen::Index r = 0; r < n; ++r) {
    stiffness_norm_ = std::max(stiffness_norm_, stiffness_.row(r).cwiseAbs().sum());
  }

  if (n <= kDirectSolveLimit) {
    // Bordered system [K v; v^T 0] with v = M 1. Any rounding inconsistency
    // of the rhs is absorbed by the multiplier along M 1 instead of piling
    // up in a single pinned row.
    std::vector<Triplet> trips;
    trips.reserve(stiffness_.nonZeros() + 2 * n);
    for (Eigen::Index r = 0; r < n; ++r) {
      for (SparseMatrix::InnerIterator it(stiffness_, r); it; ++it) {
        trips.emplace_back(static_cast<int>(r), static_cast<int>(it.col()), it.value());
      }
      trips.emplace_back(static_cast<int>(r), static_cast<int>(n), mass_ones_(r));
      trips.emplace_back(static_cast<int>(n), static_cast<int>(r), mass_ones_(r));
    }
    ColMatrix bordered(n + 1, n + 1);
    bordered.setFromTriplets(trips.begin(), trips.end());
    bordered.makeCompressed();
    bordered_ = std::make_unique<Eigen::SparseLU<ColMatrix>>();
    bordered_->compute(bordered);
    if (bordered_->info() != Eigen::Success) {
      throw SolverError("ZeroMeanPoissonSolver: factorisation failed", 0.0);
    }
  } else {
    iterative_ = std::make_unique<Eigen::ConjugateGradient<ColMatrix, Eigen::Lower | Eigen::Upper>>();
    // Eigen's criterion is looser than the relative residual checked below.
    iterative_->setTolerance(0.1 * tol_);
    iterative_->setMaxIterations(std::max<Eigen::Index>(1000, 10 * n));
    column_major_ = ColMatrix(stiffness_);
    iterative_->compute(column_major_);
  }
}

Vector ZeroMeanPoissonSolver::project_rhs(const Vector& rhs) const {
  return rhs - mass_ones_ * (rhs.sum() / measure_);
}

Vector ZeroMeanPoissonSolver::solve(const Vector& rhs) const {
  const Eigen::Index n = stiffness_.rows();
  if (rhs.size() != n) throw std::invalid_argument("ZeroMeanPoissonSolver: rhs size mismatch");
  if (!rhs.allFinite()) throw SolverError("ZeroMeanPoissonSolver: non-finite right-hand side", 0.0);
  const Vector r = project_rhs(rhs);
  const double scale = rhs.norm();
  // Summation noise of the projection grows like sqrt(n) eps; anything at
  // that level is a constant rhs and has the zero-mean solution 0.
  const double noise = 8.0 * std::sqrt(static_cast<double>(n)) * std::numeric_limits<double>::epsilon();
  if (scale == 0.0 || r.norm() <= noise * scale) return Vector::Zero(n);

  Vector x(n);
  int iterations = 0;
  if (bordered_) {
    Vector rhs_b(n + 1);
    rhs_b << r, 0.0;
    x = bordered_->solve(rhs_b).head(n);
  } else {
    x = iterative_->solve(r);
    iterations = static_cast<int>(iterative_->iterations());
  }
  x.array() -= mass_ones_.dot(x) / measure_;
  // Normwise backward error ||P(r - K x)|| / (||K|| ||x|| + ||r||): the rhs
  // M a is small on fine meshes, so the plain relative residual would sit
  // at a rounding floor above any useful tolerance. P removes the M 1
  // component, which is outside the range of K and is absorbed by the
  // multiplier.
  const double res =
      project_rhs(r - stiffness_ * x).norm() / (stiffness_norm_ * x.norm() + r.norm());
  if (!(res <= tol_)) {
    throw SolverError("ZeroMeanPoissonSolver: residual " + format_residual(res) +
                          " above tolerance",
                      res, iterations);
  }
  return x;
}

Vector solve_saddle_zero_mean(const SparseMatrix& stiffness, const SparseMatrix& mass,
                              const Vector& rhs, double tol) {
  return ZeroMeanPoissonSolver(stiffness, mass, tol).solve(rhs);
}

TrilinearForm::TrilinearForm(int n, std::vector<Entry> entries) : n_(n) {
  auto key = [](const Entry& e) { return std::array<int, 3>{e.i, e.j, e.k}; };
  std::sort(entries.begin(), entries.end(),
            [&](const Entry& a, const Entry& b) { return key(a) < key(b); });
  for (const auto& e : entries) {
    if (e.i < 0 || e.j < 0 || e.k < 0 || e.i >= n || e.j >= n || e.k >= n) {
      throw std::out_of_range("TrilinearForm: index out of range");
    }
    if (!entries_.empty() && key(entries_.back()) == key(e)) {
      entries_.back().value += e.value;
    } else {
      entries_.push_back(e);
    }
  }
}

double TrilinearForm::entry(int i, int j, int k) const {
  const std::array<int, 3> want{i, j, k};
  auto it = std::lower_bound(entries_.begin(), entries_.end(), want,
                             [](const Entry& e, const std::array<int, 3>& w) {
                               return std::array<int, 3>{e.i, e.j, e.k} < w;
                             });
  if (it != entries_.end() && it->i == i && it->j == j && it->k == k) return it->value;
  return 0.0;
}

Vector TrilinearForm::contract(const Vector& a, const Vector& c) const {
  if (a.size() != n_ || c.size() != n_) throw std::invalid_argument("TrilinearForm: size mismatch");
  Vector out = Vector::Zero(n_);
  for (const auto& e : entries_) out(e.i) += e.value * a(e.j) * c(e.k);
  return out;
}

double TrilinearForm::triple(const Vector& a) const {
  if (a.size() != n_) throw std::invalid_argument("TrilinearForm: size mismatch");
  double sum = 0.0;
  for (const auto& e : entries_) sum += e.value * a(e.i) * a(e.j) * a(e.k);
  return sum;
}

void write_coordinate(std::ostream& out, const SparseMatrix& matrix) {
  out << std::setprecision(17);
  for (Eigen::Index r = 0; r < matrix.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(matrix, r); it; ++it) {
      out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
    }
  }
}

void write_coordinate(const std::string& path, const SparseMatrix& matrix) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open matrix output file: " + path);
  write_coordinate(out, matrix);
}

double skew_defect(const SparseMatrix& x) {
  const SparseMatrix t = x.transpose();
  const SparseMatrix s = x + t;
  return max_abs(s);
}

double symmetry_defect(const SparseMatrix& x) {
  const SparseMatrix t = x.transpose();
  const SparseMatrix s = x - t;
  return max_abs(s);
}

double max_abs(const SparseMatrix& x) {
  double m = 0.0;
  for (Eigen::Index r = 0; r < x.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(x, r); it; ++it) m = std::max(m, std::abs(it.value()));
  }
  return m;
}

}  // namespace mpx
