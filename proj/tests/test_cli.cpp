#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "planar_mk/density_io.hpp"

namespace fs = std::filesystem;

namespace {

struct Run
{
  int code = -1;
  std::string output;
};

Run run(const std::string& args, const std::string& env = "")
{
  const std::string cmd = env + " " + std::string(PLANAR_MK_CLI) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe)
    return r;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe))
    r.output += buf;
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string data(const std::string& name)
{
  return std::string(PLANAR_MK_DATA_DIR) + "/" + name;
}

fs::path fresh_dir(const std::string& name)
{
  auto p = fs::temp_directory_path() / ("planar_mk_cli_" + name);
  fs::remove_all(p);
  return p;
}

nlohmann::json read_json(const fs::path& p)
{
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

std::string pair_args(const std::string& f, const std::string& g)
{
  return "--input-f " + data(f) + " --input-g " + data(g);
}

} // namespace

TEST(Cli, SolveIdenticalInputs)
{
  const auto out = fresh_dir("identical");
  const auto r = run("solve " + pair_args("blob8.csv", "blob8.csv") + " --out-dir " + out.string());
  ASSERT_EQ(r.code, 0) << r.output;
  const auto report = read_json(out / "report.json");
  EXPECT_EQ(report["schema"], 1);
  EXPECT_LT(report["L_final"].get<double>(), 1e-6);
  EXPECT_TRUE(report.contains("marginal_errors"));
  EXPECT_TRUE(report.contains("el_residual_interior_l2"));
}

TEST(Cli, EmittedGridsRoundTrip)
{
  const auto out = fresh_dir("roundtrip");
  ASSERT_EQ(run("solve " + pair_args("generic4_f.json", "generic4_g.json") + " --out-dir " + out.string()).code, 0);
  for (const char* name : {"p_star.csv", "g.csv", "h.csv", "gradient.csv", "el_residual.csv"}) {
    const auto raw = planar_mk::read_grid_file((out / name).string());
    EXPECT_EQ(raw.values.nx(), 4u) << name;
    std::ostringstream again;
    planar_mk::write_grid_csv(again, raw.grid_x, *raw.grid_y, raw.values);
    std::ifstream orig(out / name);
    std::stringstream text;
    text << orig.rdbuf();
    EXPECT_EQ(again.str(), text.str()) << name;
  }
}

TEST(Cli, ProductPairMatchesPerAxisSum)
{
  const auto out = fresh_dir("product");
  const auto r = run("solve " + pair_args("product16_f.json", "product16_g.json") + " --out-dir " + out.string());
  ASSERT_EQ(r.code, 0) << r.output;
  const auto report = read_json(out / "report.json");
  const double w2 = report["per_axis_w2_sum"].get<double>();
  EXPECT_NEAR(report["L_final"].get<double>(), w2, 0.02 * w2);
}

TEST(Cli, MalformedJsonExitsOne)
{
  const auto r = run("solve " + pair_args("malformed.json", "blob8.csv") + " --out-dir " + fresh_dir("bad").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find("parse error"), std::string::npos) << r.output;
}

TEST(Cli, MissingFileAndBadFlagsExitOne)
{
  EXPECT_EQ(run("solve --input-f /nonexistent.json --input-g " + data("blob8.csv")).code, 1);
  EXPECT_EQ(run("solve --bogus").code, 1);
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("solve " + pair_args("blob8.csv", "blob8.csv") + " --out-dir " + fresh_dir("env").string(),
                "PLANAR_MK_THREADS=zero")
                .code,
            1);
}

TEST(Cli, MaxItersExitsTwo)
{
  const auto dir = fresh_dir("maxiters");
  fs::create_directories(dir);
  std::ofstream(dir / "config.json") << R"({"max_iters": 1})";
  const auto r = run("solve " + pair_args("generic4_f.json", "generic4_g.json") + " --config " +
                     (dir / "config.json").string() + " --out-dir " + dir.string());
  EXPECT_EQ(r.code, 2) << r.output;
  EXPECT_EQ(read_json(dir / "report.json")["termination_reason"], "max_iters");
}

TEST(Cli, SolveIsDeterministicForASeed)
{
  const auto a = fresh_dir("det_a");
  const auto b = fresh_dir("det_b");
  const std::string args = "solve " + pair_args("generic4_f.json", "generic4_g.json") + " --config " +
                           data("solver.json") + " --seed 11 --out-dir ";
  ASSERT_EQ(run(args + a.string()).code, 0);
  ASSERT_EQ(run(args + b.string(), "PLANAR_MK_THREADS=1").code, 0);
  auto ra = read_json(a / "report.json");
  auto rb = read_json(b / "report.json");
  ra.erase("timing");
  rb.erase("timing");
  EXPECT_EQ(ra.dump(2), rb.dump(2));
  EXPECT_EQ(ra["config"]["seed"], 11);
}

TEST(Cli, CompareIdenticalDensities)
{
  const auto out = fresh_dir("cmp_same");
  const auto r = run("compare " + pair_args("generic4_f.json", "generic4_f.json") + " --out-dir " + out.string());
  ASSERT_EQ(r.code, 0) << r.output;
  const auto doc = read_json(out / "comparison.json");
  EXPECT_LT(doc["L_p_star"].get<double>(), 1e-6);
  EXPECT_NEAR(doc["oracle_optimum"].get<double>(), 0.0, 1e-14);
  EXPECT_LT(doc["gap"].get<double>(), 1e-6);
  EXPECT_TRUE(fs::exists(out / "comparison.csv"));
}

TEST(Cli, CompareTooLargeExitsThree)
{
  const auto r = run("compare " + pair_args("product16_f.json", "product16_g.json"));
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.output.find("size limit"), std::string::npos) << r.output;
}

TEST(Cli, CompareGapBeyondToleranceExitsFour)
{
  const auto out = fresh_dir("cmp_gap");
  const auto r =
      run("compare " + pair_args("generic4_f.json", "generic4_g.json") + " --tolerance 1e-9 --out-dir " + out.string());
  EXPECT_EQ(r.code, 4) << r.output;
  EXPECT_FALSE(read_json(out / "comparison.json")["pass"].get<bool>());
}

TEST(Cli, OracleOnAnInstanceFile)
{
  const auto out = fresh_dir("oracle");
  const auto r = run("oracle --instance " + data("instance3.json") + " --out-dir " + out.string());
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NEAR(read_json(out / "oracle.json")["objective"].get<double>(), 0.1, 1e-12);
}

TEST(Cli, CheckLemmasPasses)
{
  const auto out = fresh_dir("lemmas");
  const auto r = run("check-lemmas --out-dir " + out.string());
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(read_json(out / "lemmas.json")["cases"].size(), 6u);
}

TEST(Cli, CheckElOnTheIdentityCoupling)
{
  const auto out = fresh_dir("el");
  const auto r = run("check-el " + pair_args("blob8.csv", "blob8.csv") + " --coupling " + data("blob8.csv") +
                     " --tolerance 1e-12 --out-dir " + out.string());
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_LE(read_json(out / "el.json")["interior_l2"].get<double>(), 1e-12);
}
