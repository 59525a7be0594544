#include "mpx/driver.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "json.hpp"

#ifndef MPX_PRESET_DIR
#define MPX_PRESET_DIR "presets"
#endif

namespace mpx {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;
using nlohmann::json;

std::string to_string(ModelKind model) {
  switch (model) {
    case ModelKind::AdvDiff: return "advdiff";
    case ModelKind::Kdv: return "kdv";
    case ModelKind::NsTorus: return "ns-torus";
    case ModelKind::NsSphere: return "ns-sphere";
  }
  return "?";
}

std::string to_string(InitialKind ic) {
  switch (ic) {
    case InitialKind::Soliton: return "soliton";
    case InitialKind::Sine: return "sine";
    case InitialKind::Walsh: return "walsh";
    case InitialKind::SphereHarmonic: return "sphere-harmonic";
    case InitialKind::PointVortices: return "point-vortices";
    case InitialKind::CustomFile: return "custom-file";
  }
  return "?";
}

namespace {

bool is_1d(ModelKind m) { return m == ModelKind::AdvDiff || m == ModelKind::Kdv; }
bool is_ns(ModelKind m) { return m == ModelKind::NsTorus || m == ModelKind::NsSphere; }

ModelKind parse_model(const std::string& name) {
  if (name == "advdiff") return ModelKind::AdvDiff;
  if (name == "kdv") return ModelKind::Kdv;
  if (name == "ns-torus") return ModelKind::NsTorus;
  if (name == "ns-sphere") return ModelKind::NsSphere;
  throw std::invalid_argument("unknown model '" + name + "' (expected advdiff|kdv|ns-torus|ns-sphere)");
}

InitialKind parse_initial(const std::string& name) {
  if (name == "soliton") return InitialKind::Soliton;
  if (name == "sine") return InitialKind::Sine;
  if (name == "walsh") return InitialKind::Walsh;
  if (name == "sphere-harmonic") return InitialKind::SphereHarmonic;
  if (name == "point-vortices") return InitialKind::PointVortices;
  if (name == "custom-file") return InitialKind::CustomFile;
  throw std::invalid_argument("unknown initial condition '" + name +
                              "' (expected soliton|sine|walsh|sphere-harmonic|point-vortices|"
                              "custom-file)");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T convert(const std::string& text) {
  const std::string s = trim(text);
  if constexpr (std::is_same_v<T, std::string>) {
    return s;
  } else {
    T value{};
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (s.empty() || ec != std::errc() || end != s.data() + s.size()) {
      throw std::invalid_argument("cannot parse '" + s + "'");
    }
    if constexpr (std::is_floating_point_v<T>) {
      if (!std::isfinite(value)) throw std::invalid_argument("non-finite value '" + s + "'");
    }
    return value;
  }
}

std::vector<int> convert_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(convert<int>(item));
  return out;
}

/// Field access on a parsed ini tree that remembers which keys were read
/// and reports errors with the line where the key appears.
class Fields {
 public:
  Fields(pt::ptree tree, std::string source, std::vector<std::string> lines)
      : tree_(std::move(tree)), source_(std::move(source)), lines_(std::move(lines)) {}

  bool has(const std::string& section, const std::string& key) const {
    const auto s = tree_.get_child_optional(pt::ptree::path_type(section, '\0'));
    return s && s->get_child_optional(pt::ptree::path_type(key, '\0'));
  }

  template <typename T>
  T required(const std::string& section, const std::string& key) {
    if (!has(section, key)) fail(section, key, "missing required field");
    return read<T>(section, key);
  }

  template <typename T>
  T optional(const std::string& section, const std::string& key, T fallback) {
    if (!has(section, key)) return fallback;
    return read<T>(section, key);
  }

  std::vector<int> list(const std::string& section, const std::string& key) {
    if (!has(section, key)) return {};
    used_.insert(section + "." + key);
    try {
      return convert_list(raw(section, key));
    } catch (const std::exception& e) {
      fail(section, key, e.what());
    }
  }

  void reject_unused() const {
    for (const auto& [section, child] : tree_) {
      if (child.empty()) {
        throw ConfigError(source_ + ":" + line_info("", section) + " field '" + section +
                          "' outside any section");
      }
      for (const auto& [key, value] : child) {
        if (!used_.count(section + "." + key)) fail(section, key, "unknown or unused field");
      }
    }
  }

  [[noreturn]] void fail(const std::string& section, const std::string& key,
                         const std::string& message) const {
    throw ConfigError(source_ + ":" + line_info(section, key) + " [" + section + "] " + key +
                      ": " + message);
  }

 private:
  std::string raw(const std::string& section, const std::string& key) const {
    return tree_.get_child(pt::ptree::path_type(section, '\0'))
        .get_child(pt::ptree::path_type(key, '\0'))
        .data();
  }

  template <typename T>
  T read(const std::string& section, const std::string& key) {
    used_.insert(section + "." + key);
    try {
      return convert<T>(raw(section, key));
    } catch (const std::exception& e) {
      fail(section, key, e.what());
    }
  }

  std::string line_info(const std::string& section, const std::string& key) const {
    std::string current;
    for (std::size_t i = 0; i < lines_.size(); ++i) {
      const std::string line = trim(lines_[i]);
      if (line.empty() || line[0] == ';' || line[0] == '#') continue;
      if (line.front() == '[' && line.back() == ']') {
        current = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq != std::string::npos && current == section && trim(line.substr(0, eq)) == key) {
        return std::to_string(i + 1) + ":";
      }
    }
    return "";
  }

  pt::ptree tree_;
  std::string source_;
  std::vector<std::string> lines_;
  std::set<std::string> used_;
};

bool near(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); }

}  // namespace

void RunConfig::validate() const {
  auto bad = [&](const std::string& what) { throw ConfigError(source + ": " + what); };
  if (n_steps < 1) bad("n_steps must be at least 1");
  if (!(t_end > t0)) bad("t_end must exceed t0");
  if (!(nu >= 0.0)) bad("nu must be non-negative");
  if (!(linear_tolerance > 0.0)) bad("linear_tolerance must be positive");
  if (!(fixed_point.tolerance > 0.0) || fixed_point.max_iterations < 1) {
    bad("fixed-point tolerance must be positive and max_iterations >= 1");
  }
  if (record_every < 1) bad("record_every must be at least 1");
  if (threads < 1) bad("threads must be at least 1");
  switch (model) {
    case ModelKind::AdvDiff:
    case ModelKind::Kdv:
      if (n_nodes < 3) bad("n_nodes must be at least 3");
      if (!(length > 0.0)) bad("length must be positive");
      if (model == ModelKind::Kdv && (!(alpha > 0.0) || !(eta > 0.0))) {
        bad("alpha and eta must be positive");
      }
      if (initial != InitialKind::Soliton && initial != InitialKind::Sine &&
          initial != InitialKind::CustomFile) {
        bad("initial condition '" + to_string(initial) + "' needs a surface model");
      }
      break;
    case ModelKind::NsTorus:
      if (nx < 3 || ny < 3) bad("nx and ny must be at least 3");
      if (!(lx > 0.0) || !(ly > 0.0)) bad("lx and ly must be positive");
      if (initial == InitialKind::Walsh) {
        if (!near(lambda, kWalshLambda)) bad("the Walsh flow is defined for lambda = 25");
        if (!near(lx, 2.0 * std::numbers::pi) || !near(ly, 2.0 * std::numbers::pi)) {
          bad("the Walsh flow lives on [0, 2 pi]^2");
        }
      } else if (initial != InitialKind::CustomFile) {
        bad("initial condition '" + to_string(initial) + "' is not available on the torus");
      }
      break;
    case ModelKind::NsSphere:
      if (subdivisions < 0) bad("subdivisions must be non-negative");
      if (initial == InitialKind::PointVortices) {
        try {
          vortices.validate();
        } catch (const std::exception& e) {
          bad(e.what());
        }
      } else if (initial != InitialKind::SphereHarmonic && initial != InitialKind::CustomFile) {
        bad("initial condition '" + to_string(initial) + "' is not available on the sphere");
      }
      break;
  }
  if (initial == InitialKind::CustomFile && initial_path.empty()) bad("custom-file needs a path");
}

RunConfig parse_config(std::istream& in, const std::string& source) {
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  std::vector<std::string> lines;
  {
    std::stringstream ls(text);
    std::string line;
    while (std::getline(ls, line)) lines.push_back(line);
  }
  if (trim(text).empty()) throw ConfigError(source + ": empty configuration");
  pt::ptree tree;
  try {
    std::stringstream ts(text);
    pt::read_ini(ts, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(source + ":" + std::to_string(e.line()) + ": " + e.message());
  }

  Fields f(tree, source, lines);
  RunConfig c;
  c.source = source;
  try {
    c.model = parse_model(f.required<std::string>("model", "name"));
  } catch (const std::invalid_argument& e) {
    f.fail("model", "name", e.what());
  }
  c.nu = f.required<double>("model", "nu");
  if (c.model == ModelKind::Kdv) {
    c.alpha = f.required<double>("model", "alpha");
    c.eta = f.required<double>("model", "eta");
  }
  if (c.model == ModelKind::AdvDiff) c.velocity = f.required<double>("model", "velocity");

  if (is_1d(c.model)) {
    c.n_nodes = f.required<int>("mesh", "n_nodes");
    c.length = f.required<double>("mesh", "length");
  } else if (c.model == ModelKind::NsTorus) {
    c.nx = f.required<int>("mesh", "nx");
    c.ny = f.required<int>("mesh", "ny");
    c.lx = f.required<double>("mesh", "lx");
    c.ly = f.required<double>("mesh", "ly");
  } else {
    c.subdivisions = f.required<int>("mesh", "subdivisions");
  }

  try {
    c.scheme = parse_scheme(f.required<std::string>("time", "scheme"));
  } catch (const std::invalid_argument& e) {
    f.fail("time", "scheme", e.what());
  }
  c.t0 = f.required<double>("time", "t0");
  c.t_end = f.required<double>("time", "t_end");
  c.n_steps = f.required<int>("time", "n_steps");

  try {
    c.initial = parse_initial(f.required<std::string>("initial", "name"));
  } catch (const std::invalid_argument& e) {
    f.fail("initial", "name", e.what());
  }
  if (c.initial == InitialKind::Walsh) c.lambda = f.required<double>("initial", "lambda");
  if (c.initial == InitialKind::PointVortices) {
    c.vortices.n_vortices = f.required<int>("initial", "count");
    c.vortices.intensity = f.required<double>("initial", "intensity");
    const std::string profile = f.required<std::string>("initial", "profile");
    if (profile == "gaussian") {
      c.vortices.profile = VortexProfile::Gaussian;
      c.vortices.regularisation_width = f.required<double>("initial", "width");
    } else if (profile == "nodal") {
      c.vortices.profile = VortexProfile::Nodal;
    } else {
      f.fail("initial", "profile", "expected gaussian|nodal, got '" + profile + "'");
    }
  }
  if (c.initial == InitialKind::CustomFile) {
    c.initial_path = f.required<std::string>("initial", "path");
    if (fs::path(c.initial_path).is_relative() && fs::exists(source)) {
      c.initial_path = (fs::path(source).parent_path() / c.initial_path).string();
    }
  }

  c.fixed_point.tolerance = f.required<double>("solver", "fp_tolerance");
  c.fixed_point.max_iterations = f.required<int>("solver", "fp_max_iterations");
  c.linear_tolerance = f.required<double>("solver", "linear_tolerance");

  c.output_dir = f.optional<std::string>("output", "directory", c.output_dir);
  c.record_every = f.optional<int>("output", "record_every", c.record_every);
  c.seed = f.optional<std::uint64_t>("run", "seed", c.seed);
  c.vortices.seed = c.seed;
  c.resolutions = f.list("converge", "resolutions");
  c.threads = f.optional<int>("converge", "threads", c.threads);

  f.reject_unused();
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open configuration file");
  return parse_config(in, path);
}

std::string preset_directory() {
  if (const char* env = std::getenv("MPX_PRESET_DIR")) return env;
  return MPX_PRESET_DIR;
}

RunConfig load_preset(const std::string& name) {
  const fs::path path = fs::path(preset_directory()) / (name + ".ini");
  if (!fs::exists(path)) throw ConfigError("unknown preset '" + name + "' (looked for " + path.string() + ")");
  return load_config(path.string());
}

RunConfig with_resolution(const RunConfig& config, int resolution) {
  RunConfig c = config;
  if (is_1d(c.model)) {
    c.n_nodes = resolution;
  } else if (c.model == ModelKind::NsTorus) {
    c.nx = c.ny = resolution;
  } else {
    c.subdivisions = resolution;
  }
  c.validate();
  return c;
}

P1SpacePtr build_space(const RunConfig& config) {
  switch (config.model) {
    case ModelKind::AdvDiff:
    case ModelKind::Kdv:
      return std::make_shared<const P1Space>(build_periodic_interval(config.length, config.n_nodes));
    case ModelKind::NsTorus:
      return std::make_shared<const P1Space>(
          build_torus_mesh(config.lx, config.ly, config.nx, config.ny));
    case ModelKind::NsSphere:
      return std::make_shared<const P1Space>(build_icosphere(config.subdivisions));
  }
  throw std::logic_error("build_space: unhandled model");
}

namespace {

Vector read_custom_state(const std::string& path, int n) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open initial state");
  std::vector<double> values;
  std::string token;
  while (in >> token) {
    try {
      values.push_back(convert<double>(token));
    } catch (const std::exception& e) {
      throw ConfigError(path + ": entry " + std::to_string(values.size() + 1) + ": " + e.what());
    }
  }
  if (static_cast<int>(values.size()) != n) {
    throw ConfigError(path + ": expected " + std::to_string(n) + " values, found " +
                      std::to_string(values.size()));
  }
  return Eigen::Map<const Vector>(values.data(), n);
}

}  // namespace

Problem build_problem(const RunConfig& config) {
  config.validate();
  Problem p;
  p.space = build_space(config);
  const P1Space& space = *p.space;
  const double tol = config.linear_tolerance;

  if (is_1d(config.model)) {
    const double len = config.length;
    if (config.initial == InitialKind::Soliton) {
      p.initial = space.interpolate([](double x) { return soliton_exact(x, 0.0); });
    } else if (config.initial == InitialKind::Sine) {
      const double k = 2.0 * std::numbers::pi / len;
      p.initial = space.interpolate([k](double x) { return std::sin(k * x); });
    }
    if (config.model == ModelKind::Kdv) {
      KdvParams params{config.alpha, config.eta, config.nu, len};
      p.kdv = std::make_shared<const KdvOperators>(p.space, tol);
      p.system = kdv_system(params, p.kdv);
      if (config.initial == InitialKind::Soliton && config.nu == 0.0 && config.alpha == 6.0 &&
          config.eta == 1.0) {
        p.exact = [](const Point3& x, double t) { return soliton_exact(x.x(), t); };
      }
    } else {
      p.system = advection_diffusion_system(config.velocity, config.nu, p.space, tol);
      if (config.initial == InitialKind::Sine) {
        const double k = 2.0 * std::numbers::pi / len;
        const double v = config.velocity, nu = config.nu;
        p.exact = [k, v, nu](const Point3& x, double t) {
          return std::exp(-nu * k * k * t) * std::sin(k * (x.x() - v * t));
        };
      }
    }
  } else {
    p.ns = std::make_shared<const NsOperators>(p.space, tol);
    NsParams params{config.nu, config.model == ModelKind::NsTorus ? Geometry::Torus : Geometry::Sphere};
    p.system = ns_system(params, p.ns);
    const double nu = config.nu;
    if (config.initial == InitialKind::Walsh) {
      p.initial = space.interpolate([nu](const Point3& x) {
        return walsh_exact(x.x(), x.y(), 0.0, nu).omega;
      });
      p.exact = [nu](const Point3& x, double t) { return walsh_exact(x.x(), x.y(), t, nu).omega; };
    } else if (config.initial == InitialKind::SphereHarmonic) {
      auto omega = [nu](const Point3& x, double t) {
        const auto [theta, phi] = sphere_angles(x);
        return sphere_harmonic_exact(theta, phi, t, nu).omega;
      };
      p.initial = space.interpolate([omega](const Point3& x) { return omega(x, 0.0); });
      p.exact = omega;
    }
    if (p.initial.size() == space.n_dofs()) {
      // The exact vorticity has zero mean; its interpolant only up to
      // aliasing, and the null conditions hold on zero-mean states.
      const Vector m1 = p.ns->mass * Vector::Ones(space.n_dofs());
      p.initial.array() -= m1.dot(p.initial) / m1.sum();
    }
    if (config.initial == InitialKind::PointVortices) {
      PointVortexConfig vc = config.vortices;
      vc.seed = config.seed;
      p.initial = point_vortex_ic(vc, *p.ns);
    }
  }
  if (config.initial == InitialKind::CustomFile) {
    p.initial = read_custom_state(config.initial_path, space.n_dofs());
  }
  if (p.initial.size() != space.n_dofs()) {
    throw ConfigError(config.source + ": initial condition '" + to_string(config.initial) +
                      "' is not available for model '" + to_string(config.model) + "'");
  }
  return p;
}

namespace {

/// One time-stepping scheme bound to a model.
class Dynamics {
 public:
  virtual ~Dynamics() = default;
  /// Advances `a` by one step and returns the fixed-point iteration count.
  virtual int advance(Vector& a) = 0;
  virtual void invariants(const Vector& a, DiagnosticsRecord& r) const = 0;
  virtual double residual(const Vector& a0, const Vector& a1) const = 0;
};

class GenericDynamics : public Dynamics {
 public:
  GenericDynamics(const RunConfig& c, const Problem& p)
      : scheme_(c.scheme), system_(p.system), dt_(c.time_grid().dt()), nu_(c.nu), fp_(c.fixed_point),
        stiffness_(assemble_stiffness(*p.space)) {}

  int advance(Vector& a) override {
    auto step = step_generic(scheme_, system_, a, dt_, fp_);
    a = std::move(step.a);
    return step.iterations;
  }
  void invariants(const Vector& a, DiagnosticsRecord& r) const override {
    r.mass = system_.casimirs.front().value(a);
    r.hamiltonian = system_.h_value(a);
    r.entropy = system_.s_value(a);
  }
  double residual(const Vector& a0, const Vector& a1) const override {
    return entropy_residual(a0, a1, dt_, nu_, system_.mass, stiffness_, system_.g_sign);
  }

 private:
  SchemeId scheme_;
  const MetriplecticSystem& system_;
  double dt_;
  double nu_;
  FixedPointConfig fp_;
  SparseMatrix stiffness_;
};

class KdvDynamics : public Dynamics {
 public:
  KdvDynamics(const RunConfig& c, const Problem& p)
      : params_{c.alpha, c.eta, c.nu, c.length},
        ops_(p.kdv),
        stepper_(c.scheme, params_, p.kdv, c.time_grid().dt(), c.fixed_point),
        m1_(p.kdv->mass * Vector::Ones(p.kdv->mass.rows())) {}

  int advance(Vector& a) override {
    auto step = stepper_.step(a);
    a = std::move(step.a);
    return step.iterations;
  }
  void invariants(const Vector& a, DiagnosticsRecord& r) const override {
    r.mass = m1_.dot(a);
    r.hamiltonian = kdv_hamiltonian(params_, *ops_, a);
    r.entropy = -0.5 * a.dot(ops_->mass * a);
  }
  double residual(const Vector& a0, const Vector& a1) const override {
    return entropy_residual(a0, a1, stepper_.dt(), params_.nu, ops_->mass, ops_->stiffness,
                            MetricSign::PositiveSemiDefinite);
  }

 private:
  KdvParams params_;
  std::shared_ptr<const KdvOperators> ops_;
  KdvStepper stepper_;
  Vector m1_;
};

class NsDynamics : public Dynamics {
 public:
  NsDynamics(const RunConfig& c, const Problem& p)
      : ops_(p.ns),
        stepper_(c.scheme, c.nu, p.ns, c.time_grid().dt(), c.fixed_point),
        nu_(c.nu),
        m1_(p.ns->mass * Vector::Ones(p.ns->mass.rows())),
        b_(p.ns->stream(p.initial)) {}

  int advance(Vector& a) override {
    auto step = stepper_.step(a, b_);
    a = std::move(step.a);
    b_ = std::move(step.b);
    return step.iterations;
  }
  void invariants(const Vector& a, DiagnosticsRecord& r) const override {
    const NsInvariants inv = ns_invariants(a, ops_->stream(a), *ops_);
    r.mass = m1_.dot(a);
    r.hamiltonian = inv.hamiltonian;
    r.entropy = inv.enstrophy;
    r.enstrophy = inv.enstrophy;
    r.palinstrophy = inv.palinstrophy;
  }
  double residual(const Vector& a0, const Vector& a1) const override {
    return entropy_residual(a0, a1, stepper_.dt(), nu_, ops_->mass, ops_->stiffness,
                            MetricSign::NegativeSemiDefinite);
  }

 private:
  std::shared_ptr<const NsOperators> ops_;
  NsStepper stepper_;
  double nu_;
  Vector m1_;
  Vector b_;
};

std::unique_ptr<Dynamics> make_dynamics(const RunConfig& c, const Problem& p) {
  switch (c.model) {
    case ModelKind::AdvDiff: return std::make_unique<GenericDynamics>(c, p);
    case ModelKind::Kdv: return std::make_unique<KdvDynamics>(c, p);
    case ModelKind::NsTorus:
    case ModelKind::NsSphere: return std::make_unique<NsDynamics>(c, p);
  }
  throw std::logic_error("make_dynamics: unhandled model");
}

}  // namespace

RunResult simulate(const RunConfig& config, const StepObserver& observer) {
  const Problem problem = build_problem(config);
  return simulate(config, problem, observer);
}

RunResult simulate(const RunConfig& config, const Problem& problem, const StepObserver& observer) {
  const TimeGrid grid = config.time_grid();
  auto dynamics = make_dynamics(config, problem);
  RunResult result;
  result.n_dofs = problem.space->n_dofs();

  auto error_at = [&](const Vector& a, double t) -> std::optional<double> {
    if (!problem.exact) return std::nullopt;
    const auto& exact = problem.exact;
    const double e = rel_l2_error(a, [&](const Point3& x) { return exact(x, t); }, *problem.space);
    result.max_rel_error = std::max(result.max_rel_error.value_or(0.0), e);
    return e;
  };

  Vector a = problem.initial;
  DiagnosticsRecord first;
  first.step = 0;
  first.time = grid.time(0);
  dynamics->invariants(a, first);
  first.rel_l2_error = error_at(a, first.time);
  first.fp_iterations = 0;
  result.records.push_back(first);
  if (observer) observer(0, first.time, a);

  for (int k = 1; k <= grid.n_steps; ++k) {
    const Vector previous = a;
    int iterations = 0;
    try {
      iterations = dynamics->advance(a);
    } catch (const std::exception& e) {
      result.failure = "step " + std::to_string(k) + " (t = " + std::to_string(grid.time(k)) +
                       "): " + e.what();
      result.final_state = previous;
      return result;
    }
    DiagnosticsRecord r;
    r.step = k;
    r.time = grid.time(k);
    dynamics->invariants(a, r);
    r.entropy_residual = dynamics->residual(previous, a);
    r.rel_l2_error = error_at(a, r.time);
    r.fp_iterations = iterations;
    result.max_abs_entropy_residual =
        std::max(result.max_abs_entropy_residual, std::abs(*r.entropy_residual));
    result.max_fp_iterations = std::max(result.max_fp_iterations, iterations);
    result.records.push_back(r);
    if (observer) observer(k, r.time, a);
  }
  result.final_state = a;
  result.completed = true;
  return result;
}

std::vector<DiagnosticsRecord> sampled_records(const std::vector<DiagnosticsRecord>& records,
                                               int record_every) {
  std::vector<DiagnosticsRecord> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].step % record_every == 0 || i + 1 == records.size()) out.push_back(records[i]);
  }
  return out;
}

double max_drift(const std::vector<DiagnosticsRecord>& records,
                 std::optional<double> DiagnosticsRecord::*field, bool relative) {
  if (records.empty() || !(records.front().*field)) return 0.0;
  const double x0 = *(records.front().*field);
  const double scale = relative ? std::max(std::abs(x0), std::numeric_limits<double>::min()) : 1.0;
  double worst = 0.0;
  for (const auto& r : records) {
    if (r.*field) worst = std::max(worst, std::abs(*(r.*field) - x0) / scale);
  }
  return worst;
}

bool non_increasing(const std::vector<DiagnosticsRecord>& records,
                    std::optional<double> DiagnosticsRecord::*field, double slack) {
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& prev = records[i - 1].*field;
    const auto& cur = records[i].*field;
    if (!prev || !cur) continue;
    if (*cur > *prev + slack * std::max(1.0, std::abs(*prev))) return false;
  }
  return true;
}

StructureVerdict judge(const StructureReport& report, const Vector& a, const CheckTolerances& tol) {
  const double scale = std::max(1.0, a.lpNorm<Eigen::Infinity>());
  StructureVerdict v;
  v.skew = report.j_skew <= tol.skew;
  v.symmetry = report.g_symmetry <= tol.symmetry;
  v.definiteness = report.g_min_rayleigh >= tol.rayleigh;
  v.gradients = report.grad_h_error <= tol.gradient && report.grad_s_error <= tol.gradient;
  // J(a) grad S and grad C . J(a) grad H are at least quadratic in a.
  v.casimirs = std::all_of(report.casimir_rates.begin(), report.casimir_rates.end(), [&](const auto& c) {
    return c.second <= tol.casimir * scale * scale;
  });
  v.null_conditions = !report.has_null_conditions ||
                      (report.null_conditions.metric_on_h <= tol.null_condition * scale &&
                       report.null_conditions.poisson_on_s <= tol.null_condition * scale * scale);
  return v;
}

namespace {

json structure_object(const StructureReport& report, const StructureVerdict& verdict) {
  json casimirs = json::object();
  for (const auto& [name, rate] : report.casimir_rates) casimirs[name] = rate;
  json j = {
      {"j_skew_defect", report.j_skew},
      {"g_symmetry_defect", report.g_symmetry},
      {"g_min_signed_rayleigh", report.g_min_rayleigh},
      {"grad_h_error", report.grad_h_error},
      {"grad_s_error", report.grad_s_error},
      {"casimir_rates", casimirs},
      {"passed",
       {{"skew", verdict.skew},
        {"symmetry", verdict.symmetry},
        {"definiteness", verdict.definiteness},
        {"gradients", verdict.gradients},
        {"casimirs", verdict.casimirs},
        {"null_conditions", verdict.null_conditions},
        {"all", verdict.passed()}}},
  };
  if (report.has_null_conditions) {
    j["null_conditions"] = {{"metric_on_h", report.null_conditions.metric_on_h},
                            {"poisson_on_s", report.null_conditions.poisson_on_s}};
  }
  return j;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

std::string structure_json(const StructureReport& report, const StructureVerdict& verdict) {
  return structure_object(report, verdict).dump(2);
}

std::string summary_json(const RunConfig& config, const RunResult& result,
                         const StructureReport& report, const StructureVerdict& verdict) {
  json j;
  j["model"] = to_string(config.model);
  j["scheme"] = std::string(to_string(config.scheme));
  j["initial"] = to_string(config.initial);
  j["n_dofs"] = result.n_dofs;
  j["n_steps"] = config.n_steps;
  j["dt"] = config.time_grid().dt();
  j["seed"] = config.seed;
  j["completed"] = result.completed;
  if (!result.failure.empty()) j["failure"] = result.failure;
  if (!result.records.empty()) {
    const auto& last = result.records.back();
    j["final"] = {{"step", last.step},
                  {"time", last.time},
                  {"mass", optional_json(last.mass)},
                  {"hamiltonian", optional_json(last.hamiltonian)},
                  {"entropy", optional_json(last.entropy)},
                  {"enstrophy", optional_json(last.enstrophy)},
                  {"palinstrophy", optional_json(last.palinstrophy)}};
  }
  const auto& rs = result.records;
  j["drift"] = {{"mass_abs", max_drift(rs, &DiagnosticsRecord::mass, false)},
                {"hamiltonian_rel", max_drift(rs, &DiagnosticsRecord::hamiltonian, true)},
                {"entropy_rel", max_drift(rs, &DiagnosticsRecord::entropy, true)}};
  if (is_ns(config.model)) {
    j["monotone"] = {{"hamiltonian", non_increasing(rs, &DiagnosticsRecord::hamiltonian)},
                     {"enstrophy", non_increasing(rs, &DiagnosticsRecord::enstrophy)},
                     {"palinstrophy", non_increasing(rs, &DiagnosticsRecord::palinstrophy)}};
  }
  j["max_rel_l2_error"] = optional_json(result.max_rel_error);
  j["max_abs_entropy_residual"] = result.max_abs_entropy_residual;
  j["max_fp_iterations"] = result.max_fp_iterations;
  j["structure"] = structure_object(report, verdict);
  return j.dump(2);
}

SparseMatrix named_matrix(const Problem& p, const std::string& name) {
  if (name == "mass") return p.system.mass;
  if (name == "stiffness") return assemble_stiffness(*p.space);
  if (name == "advection") {
    if (!p.space->is_1d()) throw std::invalid_argument("matrix 'advection' exists only in 1D");
    return assemble_advection_1d(*p.space);
  }
  if (name == "poisson") return p.system.j_matrix(p.initial);
  if (name == "metric") return p.system.g_matrix(p.initial);
  throw std::invalid_argument("unknown matrix '" + name +
                              "' (expected mass|stiffness|advection|poisson|metric)");
}

MatrixDump parse_matrix_dump(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == spec.size()) {
    throw std::invalid_argument("--dump-matrix expects <name>:<path>, got '" + spec + "'");
  }
  return {spec.substr(0, colon), spec.substr(colon + 1)};
}

void write_problem_mesh(const Problem& p, const std::string& path) {
  if (p.space->is_1d()) {
    write_mesh(path, p.space->mesh_1d());
  } else {
    write_mesh(path, p.space->tri_mesh());
  }
}

namespace {

constexpr int kExitStructure = 1;
constexpr int kExitSolver = 3;

int gradient_budget(int n) { return n <= 64 ? -1 : 16; }

void write_side_outputs(const Problem& p, const CommandOptions& options, std::ostream& log) {
  for (const auto& d : options.dumps) {
    write_coordinate(d.path, named_matrix(p, d.name));
    log << "wrote matrix " << d.name << " to " << d.path << '\n';
  }
  if (!options.mesh_path.empty()) {
    write_problem_mesh(p, options.mesh_path);
    log << "wrote mesh to " << options.mesh_path << '\n';
  }
}

Vector random_state(const Problem& p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Vector a(p.space->n_dofs());
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = normal(rng);
  if (p.ns) {
    const Vector m1 = p.system.mass * Vector::Ones(a.size());
    a.array() -= m1.dot(a) / m1.sum();
  }
  return a;
}

}  // namespace

int run_command(const RunConfig& config, const CommandOptions& options, std::ostream& log) {
  const Problem problem = build_problem(config);
  write_side_outputs(problem, options, log);
  std::mt19937_64 rng(config.seed);
  const StructureReport report =
      check_structure(problem.system, problem.initial, rng, gradient_budget(problem.space->n_dofs()));
  const StructureVerdict verdict = judge(report, problem.initial);

  log << "running " << to_string(config.model) << " (" << to_string(config.scheme) << ", N = "
      << problem.space->n_dofs() << ", " << config.n_steps << " steps)\n";
  const RunResult result = simulate(config, problem);

  fs::create_directories(config.output_dir);
  const std::string series = (fs::path(config.output_dir) / "timeseries.csv").string();
  const std::string summary = (fs::path(config.output_dir) / "summary.json").string();
  write_time_series(series, sampled_records(result.records, config.record_every));
  {
    std::ofstream out(summary);
    out << summary_json(config, result, report, verdict) << '\n';
  }
  log << "wrote " << series << " and " << summary << '\n';

  if (!result.completed) {
    log << "error: solver failure at " << result.failure << '\n';
    return kExitSolver;
  }
  if (options.strict && !verdict.passed()) {
    log << "error: structural checks failed (strict mode)\n";
    return kExitStructure;
  }
  return 0;
}

int check_command(const RunConfig& config, const CommandOptions& options, std::ostream& out,
                  std::ostream& log) {
  const Problem problem = build_problem(config);
  write_side_outputs(problem, options, log);
  const int budget = gradient_budget(problem.space->n_dofs());
  std::mt19937_64 rng(config.seed);

  const StructureReport at_initial = check_structure(problem.system, problem.initial, rng, budget);
  const StructureVerdict v_initial = judge(at_initial, problem.initial);
  const Vector random = random_state(problem, config.seed);
  const StructureReport at_random = check_structure(problem.system, random, rng, budget);
  const StructureVerdict v_random = judge(at_random, random);
  const Vector constant = Vector::Constant(problem.space->n_dofs(), 0.5);
  const bool equilibrium = check_equilibrium(problem.system, constant, 1e-10);

  json j;
  j["model"] = to_string(config.model);
  j["n_dofs"] = problem.space->n_dofs();
  j["initial_state"] = structure_object(at_initial, v_initial);
  j["random_state"] = structure_object(at_random, v_random);
  j["constant_state_is_equilibrium"] = equilibrium;
  const bool passed = v_initial.passed() && v_random.passed() && equilibrium;
  j["passed"] = passed;
  out << j.dump(2) << '\n';
  return options.strict && !passed ? kExitStructure : 0;
}

int converge_command(const RunConfig& config, const CommandOptions& options, std::ostream& log) {
  (void)options;
  if (config.resolutions.empty()) {
    throw ConfigError(config.source + ": [converge] resolutions is required for converge");
  }
  auto simulate_one = [&](int resolution) -> ConvergenceSample {
    const RunConfig c = with_resolution(config, resolution);
    const RunResult r = simulate(c);
    if (!r.completed) throw SolverError("converge: run failed at " + r.failure, 0.0);
    if (!r.max_rel_error) {
      throw ConfigError(config.source + ": converge needs an initial condition with an exact solution");
    }
    return {r.n_dofs, *r.max_rel_error};
  };
  const int dimension = is_1d(config.model) ? 1 : 2;
  const ConvergenceTable table =
      run_convergence_study(simulate_one, config.resolutions, dimension, config.threads);
  fs::create_directories(config.output_dir);
  const std::string csv = (fs::path(config.output_dir) / "convergence.csv").string();
  const std::string js = (fs::path(config.output_dir) / "convergence.json").string();
  {
    std::ofstream out(csv);
    write_convergence_csv(out, table);
  }
  {
    std::ofstream out(js);
    out << convergence_json(table) << '\n';
  }
  for (const auto& row : table.rows) {
    log << "N = " << row.n_dofs << "  error = " << std::setprecision(6) << row.error;
    if (row.rate_dofs) log << "  rate(dofs) = " << *row.rate_dofs;
    log << '\n';
  }
  log << "wrote " << csv << " and " << js << '\n';
  return 0;
}

int dump_mesh_command(const RunConfig& config, const std::string& path, std::ostream& log) {
  const P1SpacePtr space = build_space(config);
  if (space->is_1d()) {
    write_mesh(path, space->mesh_1d());
  } else {
    write_mesh(path, space->tri_mesh());
  }
  log << "wrote mesh to " << path << '\n';
  return 0;
}

}  // namespace mpx
