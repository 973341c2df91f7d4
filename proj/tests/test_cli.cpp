#include "vcm/cli.hpp"
#include "vcm/model_json.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

namespace fs = std::filesystem;
using namespace vcm;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("vcm_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run(std::vector<std::string> args) { return cli_main(args); }

}  // namespace

TEST_SUITE("cli-io") {

TEST_CASE("simulate is deterministic for a fixed seed") {
  TempDir dir;
  REQUIRE(run({"simulate", "tang", "--n", "10", "--seed", "7", "--out", dir / "a.csv"}) == 0);
  REQUIRE(run({"simulate", "tang", "--n", "10", "--seed", "7", "--out", dir / "b.csv"}) == 0);
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  REQUIRE(run({"simulate", "tang", "--n", "10", "--seed", "8", "--out", dir / "c.csv"}) == 0);
  CHECK(slurp(dir / "a.csv") != slurp(dir / "c.csv"));
  CHECK(slurp(dir / "a.csv").rfind("unit,t,y,x1,x2,x3,x4\n", 0) == 0);
  CHECK(!fs::exists(dir / "a.csv.tmp"));
}

TEST_CASE("fit writes a model that predict can load") {
  TempDir dir;
  REQUIRE(run({"simulate", "tang", "--n", "40", "--seed", "3", "--out", dir / "d.csv"}) == 0);
  REQUIRE(run({"fit", "--data", dir / "d.csv", "--mode", "two-step", "--out", dir / "m.json", "--curves",
               dir / "c.csv"}) == 0);
  const auto doc = nlohmann::json::parse(slurp(dir / "m.json"));
  const VCFit fit = fit_from_json(doc);
  CHECK(fit.p == 4);
  CHECK(doc.at("predictors").size() == 4);

  std::istringstream curves(slurp(dir / "c.csv"));
  std::string line;
  std::size_t lines = 0;
  while (std::getline(curves, line)) ++lines;
  CHECK(lines == 201);

  REQUIRE(run({"predict", "--model", dir / "m.json", "--data", dir / "d.csv", "--out", dir / "p.csv"}) == 0);
  CHECK(slurp(dir / "p.csv").rfind("unit,t,y,y_hat\n", 0) == 0);
}

TEST_CASE("bench table1 summary has two methods and four coefficients") {
  TempDir dir;
  REQUIRE(run({"bench", "table1", "--reps", "5", "--n", "50", "--seed", "1", "--out", dir / "t1.csv", "--raw",
               dir / "raw.csv"}) == 0);
  std::istringstream in(slurp(dir / "t1.csv"));
  std::string header, a, b, extra;
  std::getline(in, header);
  std::getline(in, a);
  std::getline(in, b);
  CHECK(!std::getline(in, extra));
  CHECK(header ==
        "method,mse1_x100_mean,mse1_x100_sd,mse2_x100_mean,mse2_x100_sd,mse3_x100_mean,mse3_x100_sd,"
        "mse4_x100_mean,mse4_x100_sd,knots1_mean,knots2_mean,knots3_mean,knots4_mean");
  CHECK(a.rfind("one-step,", 0) == 0);
  CHECK(b.rfind("two-step,", 0) == 0);
  CHECK(std::count(a.begin(), a.end(), ',') == 12);
}

TEST_CASE("select writes the selection report") {
  TempDir dir;
  REQUIRE(run({"simulate", "wei", "--n", "60", "--p", "15", "--seed", "2", "--out", dir / "w.csv"}) == 0);
  REQUIRE(run({"select", "--data", dir / "w.csv", "--grid", "quantile", "--out", dir / "s.json"}) == 0);
  const auto doc = nlohmann::json::parse(slurp(dir / "s.json"));
  for (const char* key : {"active", "group_norms", "lambda1", "lambda2", "bic", "knots_per_predictor"})
    CHECK(doc.contains(key));
  CHECK(doc["group_norms"].size() == 15);
}

TEST_CASE("lagscan and corr") {
  TempDir dir;
  REQUIRE(run({"simulate", "panel", "--n", "4", "--days", "90", "--seed", "5", "--out", dir / "p.csv"}) == 0);
  REQUIRE(run({"lagscan", "--data", dir / "p.csv", "--standardize", "--add-intercept", "--mode", "one-step",
               "--tau-min", "0", "--tau-max", "5", "--out", dir / "lag.csv"}) == 0);
  CHECK(slurp(dir / "lag.csv").rfind("tau,n,rmse\n0,", 0) == 0);
  REQUIRE(run({"lagscan", "--data", dir / "p.csv", "--tau-min", "2", "--tau-max", "1", "--out", dir / "e.csv"}) == 0);
  CHECK(slurp(dir / "e.csv") == "tau,n,rmse\n");
  REQUIRE(run({"corr", "--data", dir / "p.csv", "--out", dir / "corr.csv"}) == 0);
  CHECK(slurp(dir / "corr.csv").rfind("predictor,x1,x2\n", 0) == 0);
}

TEST_CASE("config file values, overridden by flags") {
  TempDir dir;
  REQUIRE(run({"simulate", "tang", "--n", "30", "--seed", "1", "--out", dir / "d.csv"}) == 0);
  {
    std::ofstream cfg(dir / "run.cfg");
    cfg << "degree = 1\nmode = one-step\n";
  }
  REQUIRE(run({"fit", "--config", dir / "run.cfg", "--data", dir / "d.csv", "--out", dir / "m1.json"}) == 0);
  CHECK(nlohmann::json::parse(slurp(dir / "m1.json"))["degree"] == 1);
  REQUIRE(run({"fit", "--config", dir / "run.cfg", "--degree", "2", "--data", dir / "d.csv", "--out",
               dir / "m2.json"}) == 0);
  CHECK(nlohmann::json::parse(slurp(dir / "m2.json"))["degree"] == 2);
}

TEST_CASE("exit codes") {
  TempDir dir;
  CHECK(run({"fit", "--no-such-flag"}) == 1);
  CHECK(run({}) == 1);
  CHECK(run({"simulate", "tang", "--out", dir / "x.csv"}) == 1);  // seed is mandatory
  CHECK(run({"bench", "table1", "--out", dir / "x.csv"}) == 1);
  CHECK(run({"fit", "--data", dir / "missing.csv", "--out", dir / "m.json"}) == 2);
  {
    std::ofstream bad(dir / "bad.csv");
    bad << "unit,t,x1\n";
  }
  CHECK(run({"fit", "--data", dir / "bad.csv", "--out", dir / "m.json"}) == 2);
  CHECK(run({"--help"}) == 0);
}

}
