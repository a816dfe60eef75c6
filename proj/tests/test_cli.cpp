#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "liediff/cli.hpp"
#include "liediff/verify.hpp"

namespace fs = std::filesystem;
using liediff::dispatch;

namespace
{

fs::path scratch(const std::string& name)
{
  const fs::path p = fs::temp_directory_path() / ("liediff_cli_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p)
{
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines_of(const fs::path& p)
{
  std::vector<std::string> out;
  std::ifstream in(p);
  for (std::string line; std::getline(in, line);)
    out.push_back(line);
  return out;
}

int run(std::vector<std::string> args)
{
  args.insert(args.begin(), "liediff");
  return dispatch(args);
}

}  // namespace

TEST_CASE("verify")
{
  const fs::path d = scratch("verify");
  CHECK(run({"verify", "--seed", "7", "--run-dir", (d / "ok").string()}) == liediff::kExitOk);
  const auto rows = lines_of(d / "ok" / "verify.jsonl");
  CHECK(rows.size() == liediff::kVerifyRowCount);
  for (const auto& r : rows)
    CHECK(nlohmann::json::parse(r).at("pass") == true);
  CHECK(fs::exists(d / "ok" / "config.ini"));

  CHECK(run({"verify", "--seed", "7", "--inject-fault", "--run-dir", (d / "bad").string()}) == liediff::kExitFailure);
  bool transpose_failed = false;
  for (const auto& r : lines_of(d / "bad" / "verify.jsonl"))
  {
    const auto j = nlohmann::json::parse(r);
    if (j.at("property") == "so3_transpose_relation")
      transpose_failed = j.at("pass") == false;
  }
  CHECK(transpose_failed);
}

TEST_CASE("usage errors")
{
  const fs::path d = scratch("usage");
  CHECK(run({}) == liediff::kExitUsage);
  CHECK(run({"frobnicate", "--seed", "1"}) == liediff::kExitUsage);
  CHECK(run({"verify"}) == liediff::kExitUsage);
  CHECK(run({"verify", "--seed", "1", "--bogus"}) == liediff::kExitUsage);
  CHECK(run({"gen-data", "--seed", "1", "--shapes", "sphere", "--run-dir", d.string()}) == liediff::kExitUsage);
  CHECK(run({"gen-data", "--seed", "1", "--mode", "so4", "--run-dir", d.string()}) == liediff::kExitUsage);
  CHECK(run({"gen-data", "--seed", "1", "--n", "0", "--run-dir", d.string()}) == liediff::kExitUsage);
  CHECK(run({"train", "--seed", "1", "--run-dir", d.string()}) == liediff::kExitUsage);
}

TEST_CASE("process exit codes")
{
  const std::string bin = LIEDIFF_CLI_PATH;
  const fs::path d = scratch("proc");
  auto code = [](const std::string& cmd) {
    const int status = std::system((cmd + " > /dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  CHECK(code(bin + " verify --seed 3 --run-dir " + (d / "v").string()) == 0);
  CHECK(code(bin + " verify --seed 3 --inject-fault --run-dir " + (d / "f").string()) == 1);
  CHECK(code(bin + " nope") == 2);
}

TEST_CASE("gen-data is deterministic and records its config")
{
  const fs::path d = scratch("gen");
  const std::vector<std::string> base{"gen-data", "--shapes", "tet,cube", "--n", "2000", "--seed", "1"};
  auto with = [&](const std::string& dir, const std::string& out) {
    auto a = base;
    a.insert(a.end(), {"--run-dir", (d / dir).string(), "--out", (d / out).string()});
    return a;
  };
  REQUIRE(run(with("a", "d1.jsonl")) == 0);
  REQUIRE(run(with("b", "d2.jsonl")) == 0);
  CHECK(slurp(d / "d1.jsonl") == slurp(d / "d2.jsonl"));
  CHECK(lines_of(d / "d1.jsonl").size() == 4001);

  const std::string cfg = slurp(d / "a" / "config.ini");
  CHECK(cfg.rfind("[gen-data]", 0) == 0);
  CHECK(cfg.find("shapes=") != std::string::npos);
  CHECK(cfg.find("seed=1") != std::string::npos);
  CHECK(cfg.find("t-max=") != std::string::npos);
}

TEST_CASE("config file precedence")
{
  const fs::path d = scratch("config");
  {
    std::ofstream ini(d / "gen.ini");
    ini << "[gen-data]\nn=7\nshapes=\"cone\"\n";
  }
  REQUIRE(run({"--config", (d / "gen.ini").string(), "gen-data", "--seed", "2", "--run-dir", (d / "a").string()}) == 0);
  CHECK(lines_of(d / "a" / "data.jsonl").size() == 8);
  REQUIRE(run({"--config", (d / "gen.ini").string(), "gen-data", "--seed", "2", "--n", "3", "--run-dir",
               (d / "b").string()}) == 0);
  CHECK(lines_of(d / "b" / "data.jsonl").size() == 4);
  CHECK(nlohmann::json::parse(lines_of(d / "b" / "data.jsonl").front()).at("shapes").at(0) == "cone");
}

TEST_CASE("run root from the environment")
{
  const fs::path d = scratch("env");
  ::setenv("LIEDIFF_RUN_ROOT", d.string().c_str(), 1);
  REQUIRE(run({"gen-data", "--seed", "11", "--n", "2"}) == 0);
  CHECK(fs::exists(d / "gen-data-11" / "data.jsonl"));
  CHECK(fs::exists(d / "gen-data-11" / "config.ini"));
}

TEST_CASE("train, sample, eval, ablate and export")
{
  const fs::path d = scratch("pipeline");
  REQUIRE(run({"gen-data", "--shapes", "tet,cyl", "--n", "30", "--mode", "se3", "--seed", "4", "--run-dir",
               (d / "data").string()}) == 0);
  const std::string data = (d / "data" / "data.jsonl").string();

  const std::vector<std::string> train{"train", "--data", data, "--seed", "5", "--steps", "12", "--batch", "4",
                                       "--fan-out", "4", "--levels", "10", "--width", "16", "--embed-dim", "4",
                                       "--log-every", "4", "--ckpt-every", "6"};
  auto train_into = [&](const std::string& dir, std::vector<std::string> extra = {}) {
    auto a = train;
    a.insert(a.end(), {"--run-dir", (d / dir).string()});
    a.insert(a.end(), extra.begin(), extra.end());
    return run(a);
  };
  REQUIRE(train_into("t1") == 0);
  REQUIRE(train_into("t2") == 0);
  CHECK(slurp(d / "t1" / "model.bin") == slurp(d / "t2" / "model.bin"));
  CHECK(fs::exists(d / "t1" / "ckpt_6.bin"));
  const auto metrics = lines_of(d / "t1" / "metrics.jsonl");
  REQUIRE(metrics.size() == 3);
  const auto m0 = nlohmann::json::parse(metrics[0]);
  for (const char* key : {"step", "loss", "lr", "wall_time"})
    CHECK(m0.contains(key));
  CHECK(m0.at("step") == 4);

  REQUIRE(train_into("t3", {"--resume", (d / "t1" / "ckpt_6.bin").string()}) == 0);
  CHECK(slurp(d / "t3" / "model.bin") == slurp(d / "t1" / "model.bin"));

  REQUIRE(train_into("t4", {"--score-kind", "true"}) == 0);
  CHECK(slurp(d / "t4" / "config.ini").find("score-kind=true") != std::string::npos);
  CHECK(train_into("t5", {"--score-kind", "exact"}) == liediff::kExitUsage);

  const std::string ckpt = (d / "t1" / "model.bin").string();
  REQUIRE(run({"sample", "--checkpoint", ckpt, "--n", "5", "--data", data, "--gt-index", "3", "--levels", "10",
               "--seed", "6", "--run-dir", (d / "s1").string()}) == 0);
  REQUIRE(run({"sample", "--checkpoint", ckpt, "--n", "5", "--data", data, "--gt-index", "3", "--levels", "10",
               "--seed", "6", "--run-dir", (d / "s2").string()}) == 0);
  CHECK(lines_of(d / "s1" / "samples.jsonl").size() == 5);
  CHECK(slurp(d / "s1" / "samples.jsonl") == slurp(d / "s2" / "samples.jsonl"));

  REQUIRE(run({"eval", "--checkpoint", ckpt, "--data", data, "--samples", "8", "--gts", "2", "--levels", "10",
               "--seed", "7", "--run-dir", (d / "e").string()}) == 0);
  const auto report = lines_of(d / "e" / "report.jsonl");
  REQUIRE(report.size() == 2);
  CHECK(nlohmann::json::parse(report[0]).at("shape") == "tet");

  REQUIRE(run({"ablate-steps", "--checkpoint", ckpt, "--data", data, "--steps", "100,50,10,5", "--samples", "4",
               "--gts", "2", "--seed", "8", "--run-dir", (d / "ab").string()}) == 0);
  const auto csv = lines_of(d / "ab" / "ablation.csv");
  REQUIRE(csv.size() == 1 + 4 * 2);
  CHECK(csv[0] == "score_kind,steps,shape,spread_deg,trans_err");
  CHECK(csv[1].rfind("surrogate,100,tet,", 0) == 0);
  CHECK(csv[8].rfind("surrogate,5,cyl,", 0) == 0);

  REQUIRE(run({"ablate-steps", "--checkpoint", (d / "t4" / "model.bin").string(), "--data", data, "--steps", "5",
               "--samples", "2", "--gts", "1", "--seed", "8", "--run-dir", (d / "ab2").string()}) == 0);
  CHECK(lines_of(d / "ab2" / "ablation.csv")[1].rfind("true,5,", 0) == 0);

  REQUIRE(run({"export-viz", "--samples", (d / "s1" / "samples.jsonl").string(), "--seed", "9", "--run-dir",
               (d / "viz").string()}) == 0);
  const auto viz = lines_of(d / "viz" / "mollweide.csv");
  CHECK(viz.size() == 6);
  CHECK(viz[0] == "lon,lat,roll,gimbal_flag");

  CHECK(run({"eval", "--checkpoint", (d / "missing.bin").string(), "--data", data, "--seed", "1", "--run-dir",
             (d / "e2").string()}) == liediff::kExitFailure);
}
