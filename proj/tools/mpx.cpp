#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "mpx/driver.hpp"

namespace {

struct Common {
  std::string config_path;
  std::string preset;
  std::string out_dir;
  bool strict = false;
  long long seed = -1;
  std::vector<std::string> dumps;
  std::string mesh_path;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "Configuration file");
  cmd->add_option("--preset", c.preset, "Name of a bundled preset");
  cmd->add_option("--out", c.out_dir, "Output directory (overrides [output] directory)");
  cmd->add_flag("--strict", c.strict, "Nonzero exit when structural checks fail");
  cmd->add_option("--seed", c.seed, "Random seed (overrides [run] seed)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--dump-matrix", c.dumps, "Write an operator as 'i j value' lines: <name>:<path>");
  cmd->add_option("--dump-mesh", c.mesh_path, "Write the mesh to <path>");
}

mpx::RunConfig resolve(const Common& c) {
  if (c.config_path.empty() == c.preset.empty()) {
    throw mpx::ConfigError("exactly one of --config or --preset is required");
  }
  mpx::RunConfig config = c.preset.empty() ? mpx::load_config(c.config_path) : mpx::load_preset(c.preset);
  if (!c.out_dir.empty()) config.output_dir = c.out_dir;
  if (c.seed >= 0) {
    config.seed = static_cast<std::uint64_t>(c.seed);
    config.vortices.seed = config.seed;
  }
  return config;
}

mpx::CommandOptions options(const Common& c) {
  mpx::CommandOptions o;
  o.strict = c.strict;
  o.mesh_path = c.mesh_path;
  for (const auto& d : c.dumps) o.dumps.push_back(mpx::parse_matrix_dump(d));
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structure-preserving finite element integrators for metriplectic systems"};
  app.require_subcommand(1);

  Common run_opts, check_opts, converge_opts, mesh_opts;
  std::vector<int> resolutions;
  int threads = 0;
  std::string mesh_target;

  auto* run = app.add_subcommand("run", "Integrate one configuration and write timeseries.csv and summary.json");
  add_common(run, run_opts);
  auto* check = app.add_subcommand("check", "Print a JSON report of the structural checks");
  add_common(check, check_opts);
  auto* converge = app.add_subcommand("converge", "Run a mesh-convergence study");
  add_common(converge, converge_opts);
  converge->add_option("--n", resolutions, "Resolutions (overrides [converge] resolutions)")->delimiter(',');
  converge->add_option("--threads", threads, "Concurrent runs")->check(CLI::PositiveNumber);
  auto* dump = app.add_subcommand("dump-mesh", "Write the configured mesh");
  add_common(dump, mesh_opts);
  dump->add_option("path", mesh_target, "Output path (alternative to --dump-mesh)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return mpx::run_command(resolve(run_opts), options(run_opts), std::cerr);
    if (*check) return mpx::check_command(resolve(check_opts), options(check_opts), std::cout, std::cerr);
    if (*converge) {
      mpx::RunConfig config = resolve(converge_opts);
      if (!resolutions.empty()) config.resolutions = resolutions;
      if (threads > 0) config.threads = threads;
      return mpx::converge_command(config, options(converge_opts), std::cerr);
    }
    if (*dump) {
      const std::string path = mesh_target.empty() ? mesh_opts.mesh_path : mesh_target;
      if (path.empty()) throw mpx::ConfigError("dump-mesh needs an output path");
      return mpx::dump_mesh_command(resolve(mesh_opts), path, std::cerr);
    }
  } catch (const mpx::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
