#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mpx/diagnostics.hpp"
#include "mpx/fem.hpp"
#include "mpx/integrators.hpp"
#include "mpx/linalg.hpp"
#include "mpx/models.hpp"
#include "mpx/system.hpp"

namespace mpx {

enum class ModelKind { AdvDiff, Kdv, NsTorus, NsSphere };
enum class InitialKind { Soliton, Sine, Walsh, SphereHarmonic, PointVortices, CustomFile };

std::string to_string(ModelKind model);
std::string to_string(InitialKind ic);

/// Raised for unreadable or inconsistent configuration; the message names
/// the source and the offending line or field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string source = "<memory>";

  ModelKind model = ModelKind::Kdv;
  double alpha = 0.0;
  double eta = 0.0;
  double nu = 0.0;
  double velocity = 0.0;

  // 1D: n_nodes on [0, length); torus: nx x ny on [0, lx] x [0, ly]; sphere: subdivisions.
  int n_nodes = 0;
  double length = 0.0;
  int nx = 0;
  int ny = 0;
  double lx = 0.0;
  double ly = 0.0;
  int subdivisions = -1;

  SchemeId scheme = SchemeId::AVF;
  double t0 = 0.0;
  double t_end = 0.0;
  int n_steps = 0;

  InitialKind initial = InitialKind::Soliton;
  double lambda = 0.0;
  PointVortexConfig vortices;
  std::string initial_path;

  FixedPointConfig fixed_point;
  double linear_tolerance = 1e-12;

  std::string output_dir = "out";
  int record_every = 1;
  std::uint64_t seed = 1;

  std::vector<int> resolutions;
  int threads = 1;

  void validate() const;
  TimeGrid time_grid() const { return TimeGrid(t0, t_end, n_steps); }
};

/// Sectioned key-value text ([model], [mesh], [time], [initial], [solver],
/// [output], [run], [converge]). Every model parameter the selected model
/// uses must be present; unknown keys are rejected.
RunConfig parse_config(std::istream& in, const std::string& source = "<stream>");
RunConfig load_config(const std::string& path);

/// Directory searched for `<name>.ini`; MPX_PRESET_DIR overrides the
/// compiled-in location.
std::string preset_directory();
RunConfig load_preset(const std::string& name);

/// Same configuration at another mesh resolution: n_nodes (1D), nx = ny
/// (torus) or subdivisions (sphere).
RunConfig with_resolution(const RunConfig& config, int resolution);

/// Everything needed to integrate one configuration.
struct Problem {
  P1SpacePtr space;
  MetriplecticSystem system;
  Vector initial;
  /// Exact solution at time t, when the configuration has one.
  std::function<double(const Point3&, double)> exact;
  std::shared_ptr<const KdvOperators> kdv;
  std::shared_ptr<const NsOperators> ns;
};

P1SpacePtr build_space(const RunConfig& config);
Problem build_problem(const RunConfig& config);

/// Called after every accepted step (and once for the initial state).
using StepObserver = std::function<void(int step, double time, const Vector& a)>;

struct RunResult {
  int n_dofs = 0;
  /// One record per time level, k = 0..n_steps (fewer if the run failed).
  std::vector<DiagnosticsRecord> records;
  Vector final_state;
  std::optional<double> max_rel_error;
  double max_abs_entropy_residual = 0.0;
  int max_fp_iterations = 0;
  bool completed = false;
  std::string failure;
};

RunResult simulate(const RunConfig& config, const StepObserver& observer = {});
RunResult simulate(const RunConfig& config, const Problem& problem,
                   const StepObserver& observer = {});

/// Records at k = 0, every `record_every` steps, and the last level.
std::vector<DiagnosticsRecord> sampled_records(const std::vector<DiagnosticsRecord>& records,
                                               int record_every);

/// Largest |x_k - x_0| (relative to max(|x_0|, floor) when `relative`).
double max_drift(const std::vector<DiagnosticsRecord>& records,
                 std::optional<double> DiagnosticsRecord::*field, bool relative);
/// True when x_{k+1} <= x_k + slack * max(1, |x_k|) for every k.
bool non_increasing(const std::vector<DiagnosticsRecord>& records,
                    std::optional<double> DiagnosticsRecord::*field, double slack = 1e-12);

struct CheckTolerances {
  double skew = 1e-13;
  double symmetry = 1e-13;
  double rayleigh = -1e-12;
  double gradient = 1e-6;
  double casimir = 1e-10;
  double null_condition = 1e-11;
};

struct StructureVerdict {
  bool skew = false;
  bool symmetry = false;
  bool definiteness = false;
  bool gradients = false;
  bool casimirs = false;
  bool null_conditions = false;
  bool passed() const {
    return skew && symmetry && definiteness && gradients && casimirs && null_conditions;
  }
};

/// With s = max(1, |a|_inf): Casimir rates and |J grad S| are compared
/// against tol * s^2, |G grad H| against tol * s. Gradient errors are
/// already relative.
StructureVerdict judge(const StructureReport& report, const Vector& a,
                       const CheckTolerances& tol = {});

std::string structure_json(const StructureReport& report, const StructureVerdict& verdict);

/// Pretty-printed JSON run summary: final values, drifts, errors and
/// structural checks.
std::string summary_json(const RunConfig& config, const RunResult& result,
                         const StructureReport& report, const StructureVerdict& verdict);

/// Named operators for `--dump-matrix`: mass, stiffness, advection, poisson
/// (J at the initial state), metric (G at the initial state).
SparseMatrix named_matrix(const Problem& problem, const std::string& name);

struct MatrixDump {
  std::string name;
  std::string path;
};
MatrixDump parse_matrix_dump(const std::string& spec);

void write_problem_mesh(const Problem& problem, const std::string& path);

struct CommandOptions {
  bool strict = false;
  std::vector<MatrixDump> dumps;
  std::string mesh_path;
};

/// The CLI subcommands. Each returns the process exit status and reports
/// progress and failures on `log`.
int run_command(const RunConfig& config, const CommandOptions& options, std::ostream& log);
int check_command(const RunConfig& config, const CommandOptions& options, std::ostream& out,
                  std::ostream& log);
int converge_command(const RunConfig& config, const CommandOptions& options, std::ostream& log);
int dump_mesh_command(const RunConfig& config, const std::string& path, std::ostream& log);

}  // namespace mpx
