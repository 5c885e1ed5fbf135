#include "gsgs/cli.hpp"
#include "gsgs/error.hpp"
#include "gsgs/image_io.hpp"
#include "gsgs/run_config.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

using namespace gsgs;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "gsgs");
  std::ostringstream out, err;
  CliResult r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "gsgs_cli_test" / name;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const std::vector<std::string> kSmallRun{"--rows",      "16", "--cols",     "16", "--max-iters",
                                         "60",          "--burn-in", "20", "--thinning", "20",
                                         "--n-dirs",    "4"};

std::vector<std::string> with(std::vector<std::string> base, const std::vector<std::string>& more) {
  base.insert(base.end(), more.begin(), more.end());
  return base;
}

}  // namespace

TEST(RunConfig, JsonRoundTrip) {
  RunConfig cfg;
  cfg.rows = 32;
  cfg.offsets = {{0, 0}, {1, 1}};
  cfg.perturbation = "iid_normal";
  cfg.paper_literal_shapes = true;
  cfg.seed = 99;
  const RunConfig back = RunConfig::from_json(cfg.to_json());
  EXPECT_EQ(back.to_json(), cfg.to_json());
  EXPECT_EQ(back.shapes(), ShapeConvention::kPaperLiteral);
  EXPECT_EQ(back.gsgs_config().perturbation, Perturbation::kIidNormal);
}

TEST(RunConfig, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(RunConfig::from_json({{"n_dir", 3}}), ConfigError);
  EXPECT_THROW(RunConfig::from_json({{"rows", "many"}}), ConfigError);
  RunConfig cfg;
  cfg.factor = 3;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = RunConfig{};
  cfg.offsets = {{2, 0}};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = RunConfig{};
  cfg.gamma_n_true = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = RunConfig{};
  cfg.perturbation = "sometimes";
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = RunConfig{};
  cfg.chains = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_NO_THROW(RunConfig{}.validate());
}

TEST(ChainCsv, RoundTrip) {
  ChainRecord rec;
  rec.theta_names = {"gamma_n", "gamma_x"};
  for (int t = 1; t <= 3; ++t) {
    IterationRecord it;
    it.t = t;
    it.theta = {1.0 / 3.0 * t, 0.1 * t};
    it.potential = -12.5 * t;
    it.alpha_norm = 0.25;
    it.directions = 4;
    it.wall_ms = 1.5;
    rec.iterations.push_back(it);
  }
  const fs::path dir = fresh_dir("csv");
  fs::create_directories(dir);
  write_chain_csv(dir / "chain.csv", rec);
  const ChainTable table = read_chain_csv(dir / "chain.csv");
  EXPECT_EQ(table.columns, (std::vector<std::string>{"t", "gamma_n", "gamma_x", "J", "wall_ms",
                                                     "alpha_norm", "directions"}));
  ASSERT_EQ(table.rows.size(), 3u);
  EXPECT_EQ(table.column("gamma_n")[2], 1.0 / 3.0 * 3);
  EXPECT_EQ(table.column("J")[0], -12.5);
  EXPECT_THROW(table.column("nope"), ConfigError);
}

TEST(Cli, SimulateWritesDataAndSidecars) {
  const fs::path dir = fresh_dir("sim");
  const CliResult r = cli({"simulate", "--output-dir", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"y.f64", "y.f64.json", "truth.f64", "truth.f64.json", "geometry.json",
                        "resolved_config.json"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  const RawImage y = read_raw_image(dir / "y.f64");
  EXPECT_EQ(y.shape, (GridShape{3 * 32, 32}));
  EXPECT_EQ(y.pixels.size(), 3 * 32 * 32);
  const auto meta = read_json(dir / "y.f64.json");
  EXPECT_EQ(meta["seed"], 1);
  EXPECT_EQ(meta["boundary"], "periodic");
  EXPECT_EQ(meta["blur_anchor"], nlohmann::json::array({2, 2}));
}

TEST(Cli, SameSeedGivesIdenticalBytes) {
  const fs::path a = fresh_dir("seed_a"), b = fresh_dir("seed_b"), c = fresh_dir("seed_c");
  ASSERT_EQ(cli({"simulate", "--seed", "7", "--output-dir", a.string()}).code, 0);
  ASSERT_EQ(cli({"simulate", "--seed", "7", "--output-dir", b.string()}).code, 0);
  ASSERT_EQ(cli({"simulate", "--seed", "8", "--output-dir", c.string()}).code, 0);
  EXPECT_EQ(slurp(a / "y.f64"), slurp(b / "y.f64"));
  EXPECT_NE(slurp(a / "y.f64"), slurp(c / "y.f64"));
}

TEST(Cli, NoisePrecisionSetsResidualVariance) {
  const fs::path dir = fresh_dir("noise");
  ASSERT_EQ(cli({"simulate", "--gamma-n", "0.01", "--output-dir", dir.string()}).code, 0);
  const RawImage y = read_raw_image(dir / "y.f64");
  const RawImage truth = read_raw_image(dir / "truth.f64");
  const SuperResOperators ops = make_operators(Geometry::desk());
  const Vector clean = ops.decimation->apply(ops.blur->apply(truth.pixels));
  const Vector r = y.pixels - clean;
  const double var = r.squaredNorm() / static_cast<double>(r.size());
  EXPECT_NEAR(var, 100.0, 100.0 * 4.0 * std::sqrt(2.0 / r.size()));
}

TEST(Cli, RunWritesOutputsAndTable) {
  const fs::path dir = fresh_dir("run");
  const CliResult r = cli(with({"run", "--output-dir", dir.string()}, kSmallRun));
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"pm.f64", "pm.f64.json", "pm.pgm", "psd.f64", "psd.pgm", "chain.csv",
                        "chain.csv.json", "summary.json", "resolved_config.json",
                        "snapshots/meta.json", "snapshots/snap_40.f64", "snapshots/snap_60.f64"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  EXPECT_NE(r.out.find("gamma_n hat"), std::string::npos);
  EXPECT_NE(r.out.find("total [s.]"), std::string::npos);
  const ChainTable t = read_chain_csv(dir / "chain.csv");
  EXPECT_EQ(t.rows.size(), 60u);
  EXPECT_EQ(read_raw_image(dir / "pm.f64").shape, (GridShape{16, 16}));
  EXPECT_TRUE(r.err.empty()) << r.err;
}

TEST(Cli, RunFromSimulatedDataDirectory) {
  const fs::path data = fresh_dir("data"), out = fresh_dir("run_data");
  ASSERT_EQ(cli({"simulate", "--rows", "16", "--cols", "16", "--output-dir", data.string()}).code, 0);
  const CliResult r = cli(with({"run", "--data-dir", data.string(), "--output-dir", out.string(),
                                "--no-snapshots"},
                               kSmallRun));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_FALSE(fs::exists(out / "snapshots"));
  EXPECT_EQ(cli({"run", "--data-dir", (data / "missing").string(), "--output-dir", out.string()}).code,
            kExitUsage);
}

TEST(Cli, PaperLiteralShapesAreRecorded) {
  const fs::path dir = fresh_dir("literal");
  ASSERT_EQ(cli(with({"run", "--paper-literal-shapes", "--output-dir", dir.string()}, kSmallRun)).code,
            0);
  EXPECT_EQ(read_json(dir / "resolved_config.json")["paper_literal_shapes"], true);
}

TEST(Cli, NoPerturbationWarns) {
  const fs::path dir = fresh_dir("none");
  const CliResult r =
      cli(with({"run", "--perturbation", "none", "--output-dir", dir.string()}, kSmallRun));
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.err.find("warning"), std::string::npos);
}

TEST(Cli, MultipleChainsWritePerChainAndPooledOutputs) {
  const fs::path dir = fresh_dir("chains");
  const CliResult r = cli(with({"run", "--chains", "2", "--output-dir", dir.string()}, kSmallRun));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "chain_0" / "chain.csv"));
  EXPECT_TRUE(fs::exists(dir / "chain_1" / "chain.csv"));
  EXPECT_TRUE(fs::exists(dir / "pm.f64"));
  EXPECT_NE(slurp(dir / "chain_0" / "pm.f64"), slurp(dir / "chain_1" / "pm.f64"));
}

TEST(Cli, DiagnoseReportsAutocorrelationAndComparison) {
  const fs::path a = fresh_dir("diag_a"), b = fresh_dir("diag_b");
  ASSERT_EQ(cli(with({"run", "--output-dir", a.string()}, kSmallRun)).code, 0);
  ASSERT_EQ(cli(with({"run", "--seed", "2", "--output-dir", b.string()}, kSmallRun)).code, 0);
  const CliResult r = cli({"diagnose", "--run-dir", a.string(), "--reference", b.string(),
                           "--max-lag", "5"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = read_json(a / "diagnose.json");
  EXPECT_TRUE(report["series"].contains("gamma_n"));
  EXPECT_TRUE(report["series"].contains("J"));
  EXPECT_TRUE(report.contains("reference"));
  EXPECT_EQ(cli({"diagnose", "--run-dir", (a / "nothing").string()}).code, kExitUsage);
}

TEST(Cli, ValidateOperatorsSuitePassesQuickly) {
  const fs::path dir = fresh_dir("validate");
  const auto start = std::chrono::steady_clock::now();
  const CliResult r = cli({"validate", "operators", "--output-dir", dir.string()});
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_LT(s, 10.0);
  EXPECT_TRUE(fs::exists(dir / "validate_operators.json"));
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(cli({"validate", "no-such-suite"}).code, kExitUsage);
  EXPECT_EQ(cli({"run", "--bogus-flag"}).code, kExitUsage);
  EXPECT_EQ(cli({}).code, kExitUsage);
  EXPECT_EQ(cli({"run", "--factor", "3", "--output-dir", fresh_dir("bad").string()}).code,
            kExitUsage);
  EXPECT_EQ(cli({"run", "--config", "/nonexistent/config.json"}).code, kExitUsage);
  EXPECT_EQ(cli({"--help"}).code, kExitOk);
}

TEST(Cli, ConfigFileIsApplied) {
  const fs::path dir = fresh_dir("cfgfile");
  fs::create_directories(dir);
  write_json(dir / "cfg.json", {{"rows", 16}, {"cols", 16}, {"seed", 5}});
  ASSERT_EQ(cli({"simulate", "--config", (dir / "cfg.json").string(), "--output-dir",
                 (dir / "out").string()})
                .code,
            0);
  EXPECT_EQ(read_json(dir / "out" / "resolved_config.json")["seed"], 5);
  EXPECT_EQ(read_raw_image(dir / "out" / "truth.f64").shape, (GridShape{16, 16}));
}
