// Copyright 2026 The rds-size Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "doctest.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kCli = RDS_SIZE_CLI;
const fs::path kFixtures = RDS_SIZE_FIXTURES;

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("rds_size_cli_" + name);
  fs::remove_all(p);
  return p;
}

int run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + kCli + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

json load(const fs::path& p) { return json::parse(slurp(p)); }

fs::path simulated(const std::string& name, const std::string& extra = "") {
  fs::path out = scratch(name);
  REQUIRE(run("simulate --N 1200 --n 120 --rho 0.02 --alpha 0.5 --seed 7 -o " + out.string() +
              " " + extra) == 0);
  return out;
}

}  // namespace

TEST_CASE("simulate writes the dataset, latent sidecar and manifest") {
  fs::path out = simulated("sim");
  for (const char* f : {"dataset.csv", "dataset.coupon_limit.json", "latent.csv",
                        "simulation.json", "manifest.json"})
    CHECK(fs::exists(out / f));
  json m = load(out / "manifest.json");
  CHECK(m["subcommand"] == "simulate");
  CHECK(m.contains("schema_version"));
  CHECK(m["config"]["N"] == 1200);
  CHECK(m.contains("seeds"));
  CHECK(load(out / "simulation.json").contains("schema_version"));
  CHECK(slurp(out / "latent.csv").rfind("id,y,y_effective,affected", 0) == 0);

  fs::path again = simulated("sim2");
  CHECK(slurp(out / "dataset.csv") == slurp(again / "dataset.csv"));
  CHECK(slurp(out / "latent.csv") == slurp(again / "latent.csv"));
}

TEST_CASE("simulate input errors") {
  CHECK(run("simulate --n 500 -o " + scratch("noN").string()) == 2);
  CHECK(run("simulate --N 100 --n 200 -o " + scratch("bad").string()) == 2);
  CHECK(run("simulate --N 5000 --n 500 --rho 0.01 --alpha 0.25 --eta 0.25 --lambda 0.5 "
            "--seed 7 -o " + scratch("viol").string()) == 0);
  CHECK(run("frobnicate") == 2);
}

TEST_CASE("estimate exit codes follow the advisory contract") {
  fs::path est = scratch("est");
  CHECK(run("estimate --data " + (kFixtures / "estonia_like.csv").string() + " -o " +
            est.string()) == 0);
  json fit = load(est / "fit.json");
  CHECK(fit.contains("schema_version"));
  CHECK(fit["N_hat"].get<long long>() >= 600);
  CHECK(fit["ci"].is_array());
  CHECK(load(est / "violations.json")["recommendation"] == "POINT_ESTIMATE_OK");
  CHECK(fs::exists(est / "manifest.json"));
  CHECK(load(est / "manifest.json")["inputs"].dump().find("sha256") != std::string::npos);

  fs::path eng = scratch("eng");
  CHECK(run("estimate --data " + (kFixtures / "engage_like.csv").string() + " -o " +
            eng.string()) == 3);
  CHECK(load(eng / "violations.json")["recommendation"] == "USE_BOUNDS");
  CHECK(load(eng / "fit.json")["N_hat"].is_number());

  fs::path cen = scratch("cen");
  CHECK(run("estimate --data " + (kFixtures / "all_censored.csv").string() + " -o " +
            cen.string()) == 4);
  CHECK(load(cen / "fit.json")["flags"]["infinite_mle"] == true);

  CHECK(run("estimate --data /nonexistent.csv --coupon-limit 3") == 2);
  CHECK(run("diagnose --data " + (kFixtures / "engage_like.csv").string() + " -o " +
            scratch("diag").string()) == 3);
}

TEST_CASE("bounds writes traces and rejects too few iterations") {
  fs::path sim = simulated("bsim");
  const std::string data = (sim / "dataset.csv").string();
  CHECK(run("bounds --data " + data + " --iterations 10 -o " + scratch("b10").string()) == 2);

  fs::path out = scratch("bounds");
  REQUIRE(run("bounds --data " + data + " --sweeps 2 --seed 3 -o " + out.string()) == 0);
  json b = load(out / "bounds.json");
  CHECK(b.contains("schema_version"));
  CHECK(b["N_min"].get<long long>() <= b["N_max"].get<long long>());
  CHECK(b["N_min"].get<long long>() >= 120);
  std::istringstream csv(slurp(out / "trace.csv"));
  std::string line;
  int lower = 0, upper = 0;
  while (std::getline(csv, line)) {
    lower += line.rfind("lower,", 0) == 0;
    upper += line.rfind("upper,", 0) == 0;
  }
  CHECK(lower == 2 * 120);
  CHECK(upper == 2 * 120);

  fs::path again = scratch("bounds2");
  REQUIRE(run("bounds --data " + data + " --sweeps 2 --seed 3 -o " + again.string()) == 0);
  CHECK(slurp(out / "bounds.json") == slurp(again / "bounds.json"));
  CHECK(slurp(out / "trace.csv") == slurp(again / "trace.csv"));
}

TEST_CASE("config files rank below flags and reject unknown keys") {
  fs::path dir = scratch("cfg");
  fs::create_directories(dir);
  std::ofstream(dir / "run.json") << R"({"simulate": {"N": 900, "n": 90, "rho": 0.03, "seed": 1}})";
  fs::path out = dir / "out";
  CHECK(run("--config " + (dir / "run.json").string() + " simulate --seed 5 -o " + out.string()) ==
        0);
  json m = load(out / "manifest.json");
  CHECK(m["config"]["N"] == 900);
  CHECK(m["config"]["seed"] == 5);

  std::ofstream(dir / "bad.json") << R"({"simulate": {"N": 900, "colour": 3}})";
  CHECK(run("--config " + (dir / "bad.json").string() + " simulate -o " + out.string()) == 2);
}

TEST_CASE("RDS_SIZE_JOBS must be a positive integer") {
  CHECK(run("evaluate --preset table2 --B 2 -o " + scratch("jobs").string(),
            "RDS_SIZE_JOBS=zero") == 2);
}

TEST_CASE("evaluate writes report files") {
  fs::path out = scratch("eval");
  REQUIRE(run("evaluate --preset table2 --B 2 --seed 4 -o " + out.string(), "RDS_SIZE_JOBS=2") ==
          0);
  for (const char* f : {"report.json", "scenarios.csv", "replicates.csv", "report.md",
                        "manifest.json"})
    CHECK(fs::exists(out / f));
  json r = load(out / "report.json");
  CHECK(r.contains("schema_version"));
  CHECK(slurp(out / "report.md").find('|') != std::string::npos);
}
