#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mpx/fem.hpp"
#include "mpx/system.hpp"
#include "mpx/types.hpp"

namespace mpx {

struct DiagnosticsRecord {
  int step = 0;
  double time = 0.0;
  std::optional<double> mass;
  std::optional<double> hamiltonian;
  std::optional<double> entropy;
  std::optional<double> enstrophy;
  std::optional<double> palinstrophy;
  std::optional<double> entropy_residual;
  std::optional<double> rel_l2_error;
  std::optional<int> fp_iterations;
};

inline constexpr const char* kTimeSeriesHeader =
    "step,time,mass,hamiltonian,entropy,enstrophy,palinstrophy,entropy_residual,rel_l2_error,"
    "fp_iterations";

/// Writes the header once, then one row per record with 17 significant
/// digits; absent values are empty fields. Rejects non-finite values and
/// non-increasing times.
class TimeSeriesWriter {
 public:
  explicit TimeSeriesWriter(std::ostream& out);
  void write(const DiagnosticsRecord& record);

 private:
  std::ostream& out_;
  std::optional<double> last_time_;
};

std::vector<DiagnosticsRecord> read_time_series(std::istream& in);
void write_time_series(const std::string& path, const std::vector<DiagnosticsRecord>& records);

/// Exact solution sampled on the discrete domain (1D: p.x(); sphere: p is
/// projected onto the unit sphere by the caller if needed).
using ExactField = std::function<double(const Point3&)>;

/// ||u - u_h|| / ||u|| in L2, by 4-point Gauss per interval or the degree-4
/// triangle rule per element. Throws if the exact field vanishes.
double rel_l2_error(const Vector& a, const ExactField& exact, const P1Space& space);

/// (S(a1) - S(a0)) / dt - production, with S = -sigma/2 a^T M a and
/// production = sigma nu m^T K m, m = (a0 + a1) / 2; sigma = +1 for an
/// entropy-producing metric (KdV) and -1 for a dissipating one (NS).
double entropy_residual(const Vector& a0, const Vector& a1, double dt, double nu,
                        const SparseMatrix& mass, const SparseMatrix& stiffness,
                        MetricSign sign = MetricSign::PositiveSemiDefinite);

struct ConvergenceRow {
  int n_dofs = 0;
  double error = 0.0;
  std::optional<double> rate_dofs;  // log(e_{i-1}/e_i) / log(N_i/N_{i-1})
  std::optional<double> rate_h;     // rate_dofs * dimension
};

struct ConvergenceTable {
  int dimension = 1;
  std::vector<ConvergenceRow> rows;

  void add(int n_dofs, double error);
  /// Least-squares slope of -log e against log N over rows [first, end).
  double fitted_rate_dofs(std::size_t first = 0) const;
};

void write_convergence_csv(std::ostream& out, const ConvergenceTable& table);
std::string convergence_json(const ConvergenceTable& table);

struct ConvergenceSample {
  int n_dofs;
  double error;
};

/// Runs `simulate(resolution)` for each resolution (in increasing order)
/// and tabulates the errors. Resolutions run concurrently when `threads` > 1.
ConvergenceTable run_convergence_study(const std::function<ConvergenceSample(int)>& simulate,
                                       const std::vector<int>& resolutions, int dimension,
                                       int threads = 1);

}  // namespace mpx
