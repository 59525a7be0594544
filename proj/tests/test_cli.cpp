#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "json.hpp"
#include "mpx/driver.hpp"

namespace fs = std::filesystem;
using namespace mpx;

namespace {

struct Outcome {
  int status;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir = fs::temp_directory_path() / (std::string("mpx_cli_") + info->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  Outcome mpx(const std::string& args) const {
    const fs::path out = dir / "stdout.txt";
    const fs::path err = dir / "stderr.txt";
    const std::string cmd = std::string("MPX_PRESET_DIR=") + MPX_SOURCE_DIR + "/presets " +
                            MPX_CLI_PATH + " " + args + " >" + out.string() + " 2>" +
                            err.string();
    const int raw = std::system(cmd.c_str());
    return {WEXITSTATUS(raw), slurp(out), slurp(err)};
  }

  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(dir / name) << text;
    return dir / name;
  }

  fs::path dir;
};

const char* kSmallTorus = R"([model]
name = ns-torus
nu = 0.01

[mesh]
nx = 5
ny = 5
lx = 6.2831853071795862
ly = 6.2831853071795862

[time]
scheme = midpoint
t0 = 0
t_end = 0.05
n_steps = 5

[initial]
name = walsh
lambda = 25

[solver]
fp_tolerance = 1e-12
fp_max_iterations = 100
linear_tolerance = 1e-12
)";

}  // namespace

TEST_F(Cli, EmptyConfigIsAParseErrorWithoutOutputs) {
  const fs::path cfg = write("empty.ini", "");
  const Outcome r = mpx("run --config " + cfg.string() + " --out " + (dir / "out").string());
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("empty.ini"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST_F(Cli, InvalidValueNamesLineAndField) {
  std::string text = kSmallTorus;
  text.replace(text.find("nu = 0.01"), 9, "nu = fast");
  const fs::path cfg = write("bad.ini", text);
  const Outcome r = mpx("run --config " + cfg.string() + " --out " + (dir / "out").string());
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("bad.ini:3"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("nu"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST_F(Cli, UnknownAndMissingKeysAreRejected) {
  std::istringstream unknown(std::string(kSmallTorus) + "\n[run]\nsed = 3\n");
  EXPECT_THROW(parse_config(unknown, "u.ini"), ConfigError);
  std::string text = kSmallTorus;
  text.erase(text.find("lambda = 25"), 11);
  std::istringstream missing(text);
  try {
    parse_config(missing, "m.ini");
    FAIL() << "missing lambda accepted";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("lambda"), std::string::npos);
  }
}

TEST_F(Cli, PresetsPinReferenceParameters) {
  const RunConfig kdv = load_preset("kdv-soliton-conservative");
  EXPECT_EQ(kdv.model, ModelKind::Kdv);
  EXPECT_EQ(kdv.n_nodes, 512);
  EXPECT_EQ(kdv.n_steps, 800);
  EXPECT_EQ(kdv.t_end, 15.0);
  EXPECT_EQ(kdv.alpha, 6.0);
  EXPECT_EQ(kdv.eta, 1.0);
  EXPECT_EQ(kdv.nu, 0.0);
  EXPECT_DOUBLE_EQ(kdv.length, 20 * std::numbers::pi);

  const double nus[] = {1e-2, 1e-4, 0.0};
  const char* names[] = {"ns-torus-walsh", "ns-torus-walsh-nu1e-4", "ns-torus-walsh-inviscid"};
  for (int i = 0; i < 3; ++i) {
    const RunConfig ns = load_preset(names[i]);
    EXPECT_EQ(ns.model, ModelKind::NsTorus);
    EXPECT_DOUBLE_EQ(ns.lx, 2 * std::numbers::pi);
    EXPECT_DOUBLE_EQ(ns.ly, 2 * std::numbers::pi);
    EXPECT_EQ(ns.lambda, 25.0);
    EXPECT_EQ(ns.n_steps, 200);
    EXPECT_EQ(ns.t_end, 1.0);
    EXPECT_EQ(ns.nu, nus[i]);
  }
  EXPECT_THROW(load_preset("no-such-preset"), ConfigError);
}

TEST_F(Cli, CheckReportsPassingStructure) {
  const fs::path cfg = write("torus.ini", kSmallTorus);
  const Outcome r = mpx("check --strict --config " + cfg.string());
  ASSERT_EQ(r.status, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_TRUE(j["passed"].get<bool>());
  EXPECT_TRUE(j["constant_state_is_equilibrium"].get<bool>());
  const auto& rs = j["random_state"];
  EXPECT_LE(rs["j_skew_defect"].get<double>(), 1e-11);
  EXPECT_LE(rs["null_conditions"]["metric_on_h"].get<double>(), 1e-11);
  EXPECT_LE(rs["null_conditions"]["poisson_on_s"].get<double>(), 1e-11);
  for (const auto& [name, rate] : rs["casimir_rates"].items()) EXPECT_LE(rate.get<double>(), 1e-11) << name;
}

TEST_F(Cli, KdvConstantStateIsEquilibrium) {
  RunConfig c = load_preset("kdv-soliton-dissipative");
  c.n_nodes = 32;
  std::ostringstream out, log;
  EXPECT_EQ(check_command(c, CommandOptions{true, {}, {}}, out, log), 0) << log.str();
  EXPECT_TRUE(nlohmann::json::parse(out.str())["constant_state_is_equilibrium"].get<bool>());
}

TEST_F(Cli, RunWritesSeriesSummaryAndDumps) {
  const fs::path cfg = write("torus.ini", kSmallTorus);
  const Outcome r = mpx("run --strict --config " + cfg.string() + " --out " +
                        (dir / "out").string() + " --dump-matrix mass:" +
                        (dir / "m.txt").string() + " --dump-mesh " + (dir / "mesh.txt").string());
  ASSERT_EQ(r.status, 0) << r.err;
  const auto series = [&] {
    std::ifstream in(dir / "out" / "timeseries.csv");
    return read_time_series(in);
  }();
  EXPECT_EQ(series.size(), 6u);
  const auto summary = nlohmann::json::parse(slurp(dir / "out" / "summary.json"));
  EXPECT_TRUE(summary["completed"].get<bool>());
  EXPECT_TRUE(summary["structure"]["passed"]["all"].get<bool>());
  EXPECT_TRUE(fs::file_size(dir / "m.txt") > 0);
  EXPECT_TRUE(fs::file_size(dir / "mesh.txt") > 0);
}

TEST_F(Cli, IdenticalRunsAreByteIdentical) {
  const fs::path cfg = write("torus.ini", kSmallTorus);
  ASSERT_EQ(mpx("run --config " + cfg.string() + " --out " + (dir / "a").string()).status, 0);
  ASSERT_EQ(mpx("run --config " + cfg.string() + " --out " + (dir / "b").string()).status, 0);
  EXPECT_EQ(slurp(dir / "a" / "timeseries.csv"), slurp(dir / "b" / "timeseries.csv"));
}

TEST_F(Cli, ConvergeWritesTable) {
  const fs::path cfg = write("torus.ini", kSmallTorus);
  const Outcome r =
      mpx("converge --config " + cfg.string() + " --n 8,16 --threads 2 --out " + (dir / "c").string());
  ASSERT_EQ(r.status, 0) << r.err;
  const auto j = nlohmann::json::parse(slurp(dir / "c" / "convergence.json"));
  ASSERT_EQ(j["rows"].size(), 2u);
  EXPECT_EQ(j["rows"][0]["n_dofs"].get<int>(), 64);
  EXPECT_EQ(j["rows"][1]["n_dofs"].get<int>(), 256);
  EXPECT_TRUE(fs::exists(dir / "c" / "convergence.csv"));
}

TEST_F(Cli, DumpMeshAndUsageErrors) {
  const fs::path cfg = write("torus.ini", kSmallTorus);
  EXPECT_EQ(mpx("dump-mesh --config " + cfg.string() + " " + (dir / "mesh.txt").string()).status, 0);
  EXPECT_TRUE(fs::exists(dir / "mesh.txt"));
  EXPECT_NE(mpx("run").status, 0);
  EXPECT_NE(mpx("run --preset kdv-soliton-conservative --config " + cfg.string()).status, 0);
  EXPECT_EQ(mpx("run --preset no-such-preset").status, 2);
}
