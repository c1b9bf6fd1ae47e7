#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

#include "jsqlab/experiments.hpp"

using namespace jsq;
namespace fs = std::filesystem;

namespace {

const char* kNetwork = R"({"mode": "network", "D": 2, "alpha": 0.5, "N": 30,
  "service": {"kind": "exponential"}, "horizon": 2000, "k_max": 12, "seed": 9})";

const char* kCavity = R"({"mode": "cavity", "D": 2, "alpha": 0.5, "service": {"kind": "exponential"},
  "k_max": 12, "cycles": 50000, "seed": 4})";

fs::path scratch_dir() {
  const auto dir = fs::temp_directory_path() / ("jsqlab_test_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(JSQLAB_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string capture_cli(const std::string& args) {
  const auto out = scratch_dir() / "captured.txt";
  const std::string cmd = std::string(JSQLAB_CLI) + " " + args + " > " + out.string() + " 2>/dev/null";
  EXPECT_EQ(std::system(cmd.c_str()), 0) << args;
  return read_file(out.string());
}

}  // namespace

TEST(Config, ParsesAndValidates) {
  const auto c = config_from_text(kNetwork);
  EXPECT_EQ(c.mode, Mode::network);
  EXPECT_EQ(c.N, 30);
  EXPECT_EQ(c.network().k_max, 12u);
  EXPECT_THROW(config_from_text(R"({"mode": "network", "D": 5, "N": 3})"), ConfigError);
  EXPECT_THROW(config_from_text(R"({"mode": "network", "bogus": 1})"), ConfigError);
  EXPECT_THROW(config_from_text(R"({"D": 2})"), ConfigError);
  EXPECT_THROW(config_from_text(R"({"mode": "cavity", "D": 1})"), ConfigError);
  EXPECT_THROW(config_from_text(R"({"mode": "network", "seed": -1})"), ConfigError);
  EXPECT_THROW(config_from_text(R"({"mode": "network", "service": {"kind": "lomax"}})"), ConfigError);
  EXPECT_THROW(config_from_text("{not json"), ConfigError);
}

TEST(Config, EchoRoundTrips) {
  for (const char* text : {kNetwork, kCavity}) {
    const auto c = config_from_text(text);
    const auto again = config_from_json(to_json(c));
    EXPECT_EQ(to_json(again).dump(), to_json(c).dump());
  }
}

TEST(Simulate, ReplicationsAreDeterministicAndWorkerIndependent) {
  auto c = config_from_text(kNetwork);
  c.replications = 8;
  c.pair_levels = {1, 2};
  const auto a = run_simulate(c, 1);
  const auto b = run_simulate(c, 1);
  const auto d = run_simulate(c, 4);
  EXPECT_EQ(a.tail_csv, b.tail_csv);
  EXPECT_EQ(a.tail_csv, d.tail_csv);
  EXPECT_EQ(a.pairs_csv, d.pairs_csv);
  EXPECT_EQ(a.sidecar["replication_seeds"], d.sidecar["replication_seeds"]);
  EXPECT_EQ(a.sidecar["events"], d.sidecar["events"]);
  EXPECT_EQ(a.tail_csv.substr(0, 27), "k,p,ci_low,ci_high\n0,1,1,1\n");
}

TEST(Simulate, SidecarReproducesOutput) {
  const auto first = run_simulate(config_from_text(kNetwork));
  const auto second = run_simulate(config_from_json(first.sidecar));
  EXPECT_EQ(first.tail_csv, second.tail_csv);
  EXPECT_EQ(first.sidecar["audit"], "passed");
}

TEST(Cavity, ByteIdenticalAndConverged) {
  const auto c = config_from_text(kCavity);
  const auto a = run_cavity(c, 1);
  const auto b = run_cavity(c, 3);
  EXPECT_EQ(dump(a.report_json), dump(b.report_json));
  EXPECT_EQ(a.tail_csv, b.tail_csv);
  EXPECT_TRUE(a.report.converged);
  EXPECT_NEAR(a.report.estimate.p[2], 0.125, 0.01);
}

TEST(Cavity, ZeroIterations) {
  auto c = config_from_text(kCavity);
  c.max_iter = 0;
  const auto out = run_cavity(c);
  EXPECT_FALSE(out.report.converged);
  EXPECT_EQ(out.report.env.values(), TailVector::geometric(0.5, 12).values());
}

TEST(RegimeRow, Format) {
  EXPECT_EQ(regime_csv_row(analytic::classify_regime(2, 2.0)), "2,2,exponential-boundary,\n");
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch_dir();
  const auto bad = dir / "bad.json";
  write_file(bad.string(), R"({"mode": "network", "D": 5, "N": 3})");
  EXPECT_EQ(run_cli("simulate --config " + bad.string() + " --out " + (dir / "x").string()), 2);
  EXPECT_EQ(run_cli("simulate --D 2 --N 20 --horizon 500 --out " + (dir / "ok").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "ok.csv"));
  EXPECT_TRUE(fs::exists(dir / "ok.json"));
  EXPECT_EQ(run_cli("simulate --no-such-flag"), 2);
  EXPECT_EQ(run_cli("fit --input " + (dir / "missing.csv").string() + " --model power-law"), 3);
  EXPECT_EQ(run_cli("predict --D 2"), 2);
  EXPECT_EQ(run_cli("cavity --D 2 --alpha 0.5 --max-iter 0 --out " + (dir / "cz").string()), 0);
}

TEST(Cli, PredictText) {
  EXPECT_EQ(capture_cli("predict --D 2 --beta 3 --format text"), "D=2 beta=3: doubly-exponential, q=0.6942\n");
  EXPECT_EQ(capture_cli("predict --D 2 --beta 2 --format text"), "D=2 beta=2: exponential-boundary\n");
  EXPECT_EQ(capture_cli("predict --D 2 --beta 1.4 --format text"), "D=2 beta=1.4: power-law, nu=0.6667\n");
  const auto grid = capture_cli("predict --D 2 --beta-from 1.5 --beta-to 2.5 --beta-step 0.5");
  EXPECT_EQ(grid.substr(0, 23), "D,beta,regime,exponent\n");
  EXPECT_NE(grid.find("2,2,exponential-boundary,"), std::string::npos);
}

TEST(Cli, CavityOutputsAreByteIdentical) {
  const auto dir = scratch_dir();
  const std::string args = "cavity --D 2 --alpha 0.8 --service-kind exponential --k-max 16 --seed 3 --out ";
  ASSERT_EQ(run_cli(args + (dir / "c1").string()), 0);
  ASSERT_EQ(run_cli(args + (dir / "c1").string() + " --workers 2"), 0);
  const auto first = read_file((dir / "c1.json").string());
  ASSERT_EQ(run_cli(args + (dir / "c1").string()), 0);
  EXPECT_EQ(first, read_file((dir / "c1.json").string()));
  const auto fit = capture_cli("fit --input " + (dir / "c1.csv").string() + " --model exponential --max-rel-ci 0.5");
  EXPECT_NE(fit.find("\"slope\""), std::string::npos);
}
