#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(CONVINT_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("convint_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    write("small.cfg",
          "dimension = 2\ninterval = 0 1\nprofile.kind = bump\ngrid.nt = 32\ngrid.nx = 32\nsolver.max_steps = 1\n");
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& text) {
    std::ofstream(dir_ / name) << text;
    return (dir_ / name).string();
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, SolveWritesAllOutputsAndVerifies) {
  ASSERT_EQ(run("solve --config " + path("small.cfg") + " --out " + path("out")), 0);
  for (const char* f : {"field.waves", "diagnostics.csv", "energy.csv", "manifest.json"})
    EXPECT_TRUE(fs::exists(dir_ / "out" / f)) << f;
  const auto manifest = nlohmann::json::parse(slurp(dir_ / "out" / "manifest.json"));
  EXPECT_EQ(manifest["status"], "max_steps");
  EXPECT_EQ(manifest["seed"], 0);
  EXPECT_EQ(manifest["config"]["profile.kind"], "bump");
  const std::string diag = slurp(dir_ / "out" / "diagnostics.csv");
  EXPECT_EQ(diag.substr(0, diag.find('\n')), "step,J,I,energy_gap,cover_size,captured,k,gamma,gain,delta,attempts");
  EXPECT_EQ(run("verify --field " + path("out/field.waves") + " --config " + path("small.cfg")), 0);
  for (const char* what : {"energy", "u", "b", "dist"})
    EXPECT_EQ(run("export --field " + path("out/field.waves") + " --config " + path("small.cfg") + " --what " + what +
                  " --out " + path(std::string("x_") + what + ".csv")),
              0)
        << what;
  EXPECT_TRUE(fs::exists(dir_ / "x_dist.csv"));
}

TEST_F(Cli, SeedOverrideChangesField) {
  ASSERT_EQ(run("solve --config " + path("small.cfg") + " --out " + path("a") + " --seed 3"), 0);
  ASSERT_EQ(run("solve --config " + path("small.cfg") + " --out " + path("b") + " --seed 3"), 0);
  ASSERT_EQ(run("solve --config " + path("small.cfg") + " --out " + path("c") + " --seed 4"), 0);
  EXPECT_EQ(slurp(dir_ / "a/field.waves"), slurp(dir_ / "b/field.waves"));
  EXPECT_NE(slurp(dir_ / "a/field.waves"), slurp(dir_ / "c/field.waves"));
}

TEST_F(Cli, ConfigErrorsLeaveNoOutputs) {
  const auto bad = write("bad.cfg", "dimension = 2\nfrobnicate = 1\n");
  EXPECT_EQ(run("solve --config " + bad + " --out " + path("none")), 1);
  EXPECT_FALSE(fs::exists(dir_ / "none"));
  EXPECT_EQ(run("solve --config " + path("missing.cfg") + " --out " + path("none")), 1);
  EXPECT_EQ(run("solve --out " + path("none")), 1);
  EXPECT_EQ(run("frobnicate"), 1);
}

TEST_F(Cli, UnresolvableGridExitsWithResolutionCode) {
  const auto coarse = write("coarse.cfg", "dimension = 2\ngrid.nt = 4\ngrid.nx = 4\n");
  EXPECT_EQ(run("solve --config " + coarse + " --out " + path("none")), 3);
  EXPECT_FALSE(fs::exists(dir_ / "none"));
}

TEST_F(Cli, VerifyFailures) {
  ASSERT_EQ(run("solve --config " + path("small.cfg") + " --out " + path("out")), 0);
  const auto d3 = write("d3.cfg", "dimension = 3\ngrid.nt = 16\ngrid.nx = 16\n");
  EXPECT_EQ(run("verify --field " + path("out/field.waves") + " --config " + d3), 1);
  std::string text = slurp(dir_ / "out/field.waves");
  text = text.substr(0, text.size() / 2);
  const auto truncated = write("truncated.waves", text);
  EXPECT_EQ(run("verify --field " + truncated + " --config " + path("small.cfg")), 1);
  EXPECT_EQ(run("export --field " + path("out/field.waves") + " --config " + path("small.cfg") + " --what vorticity"), 1);
}

TEST_F(Cli, WaveCommand) {
  EXPECT_EQ(run("wave --zbar 0.5,0.2,0.1,0.3,-0.4 --k 2 --out " + path("w")), 0);
  const auto rep = nlohmann::json::parse(slurp(dir_ / "w/report.json"));
  EXPECT_GE(rep["l2_mass"].get<double>(), rep["plateau_bound"].get<double>());
  EXPECT_EQ(rep["branch"], "planar");
  EXPECT_TRUE(fs::exists(dir_ / "w/slice.csv"));
  EXPECT_EQ(run("wave --zbar 0.5,0.2,0.1,0.3,-0.4 --k 2 --cells 16 --out " + path("w2")), 3);
  EXPECT_EQ(run("wave --zbar 0,1,0,0,0 --out " + path("w3")), 1);  // momentum without density
  EXPECT_EQ(run("wave --zbar 1,2 --out " + path("w4")), 1);
  EXPECT_EQ(run("wave --dim 3 --zbar 0.5,0.2,0.1,0,0.3,-0.4,0 --k 1 --out " + path("w5")), 0);
}
