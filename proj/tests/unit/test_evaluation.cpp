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

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "rds_size/error.hpp"
#include "rds_size/evaluation.hpp"

using namespace rds;

namespace {

SimConfig small() {
  SimConfig c;
  c.N = 1000;
  c.n = 100;
  c.rho = 0.03;
  c.alpha = 0.5;
  return c;
}

EvalOptions opts(int B, int jobs) {
  EvalOptions o;
  o.B = B;
  o.jobs = jobs;
  o.seed = 99;
  return o;
}

}  // namespace

TEST_CASE("parallel_for visits every index once and rethrows") {
  std::vector<std::atomic<int>> hits(257);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
  for (auto& h : hits) CHECK(h.load() == 1);
  CHECK_THROWS_AS(parallel_for(10, 3,
                               [](std::size_t i) {
                                 if (i == 7) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
}

TEST_CASE("RDS_SIZE_JOBS controls the default width") {
  ::setenv("RDS_SIZE_JOBS", "3", 1);
  CHECK(default_jobs() == 3);
  ::setenv("RDS_SIZE_JOBS", "lots", 1);
  CHECK_THROWS_AS(default_jobs(), ConfigError);
  ::unsetenv("RDS_SIZE_JOBS");
  CHECK(default_jobs() >= 1);
}

TEST_CASE("single replicate smoke run") {
  ScenarioResult r = run_scenario(small(), opts(1, 1));
  CHECK(r.row.B == 1);
  CHECK(r.replicates.size() == 1);
  if (r.row.ci_successful == 1) CHECK((r.row.coverage == 0.0 || r.row.coverage == 1.0));
}

TEST_CASE("scenario results do not depend on the worker count") {
  ScenarioResult a = run_scenario(small(), opts(12, 1));
  ScenarioResult b = run_scenario(small(), opts(12, 4));
  CHECK(a.row.RB == b.row.RB);
  CHECK(a.row.RRMSE == b.row.RRMSE);
  CHECK(a.row.coverage == b.row.coverage);
  for (std::size_t k = 0; k < a.replicates.size(); ++k) {
    CHECK(a.replicates[k].N_hat_cont == b.replicates[k].N_hat_cont);
    CHECK(a.replicates[k].status == b.replicates[k].status);
  }
  std::ostringstream ja, jb;
  ja << report_to_json(run_grid("x", {small()}, opts(6, 1)));
  jb << report_to_json(run_grid("x", {small()}, opts(6, 3)));
  CHECK(ja.str() == jb.str());
}

TEST_CASE("scenario accounting") {
  ScenarioResult r = run_scenario(small(), opts(20, 2));
  const ScenarioRow& row = r.row;
  CHECK(row.exclusion_rate * row.B + row.ci_successful == doctest::Approx(row.B));
  CHECK(row.estimates + row.infinite_mle + row.simulation_errors + row.fit_errors ==
        static_cast<std::size_t>(row.B));
  CHECK(row.RRMSE >= std::fabs(row.RB));
  if (row.ci_successful) {
    CHECK(row.coverage >= 0.0);
    CHECK(row.coverage <= 1.0);
  }
  // The latent sample mean is unbiased for the clean model.
  CHECK(std::fabs(row.RB_y) < 0.02);
}

TEST_CASE("every replicate failing is an error") {
  SimConfig c = small();
  c.rho = 1e-7;
  c.alpha = 0.6;
  CHECK_THROWS_AS(run_scenario(c, opts(3, 1)), ModelError);
}

TEST_CASE("preset grids") {
  auto g = table1_grid();
  CHECK(g.size() == 12);
  CHECK(g.front().N == 5000);
  CHECK(g.front().n == 500);
  CHECK(g.front().alpha == 0.25);
  auto cells = table2_cells();
  CHECK(cells.size() == 8);
  CHECK(table2_base().rho == 0.01);
}

TEST_CASE("robustness grid and report writers") {
  SimConfig base = small();
  EvalReport r = run_robustness(base, {0.1, 0.5}, {0.25}, opts(4, 2));
  REQUIRE(r.scenarios.size() == 2);
  CHECK(r.scenarios[1].row.cfg.lambda == 0.5);
  CHECK(r.scenarios[1].row.cfg.eta == 0.25);

  std::ostringstream csv, reps, md;
  write_scenarios_csv(r, csv);
  write_replicates_csv(r, reps);
  write_markdown(r, md);
  CHECK(csv.str().find("RRMSE_pct") != std::string::npos);
  CHECK(md.str().find('|') != std::string::npos);
  int lines = 0;
  for (char ch : reps.str()) lines += ch == '\n';
  CHECK(lines == 1 + 8);
}

TEST_CASE("bounds experiment bookkeeping") {
  SimConfig c;
  c.N = 600;
  c.n = 60;
  c.rho = 0.05;
  AnnealConfig lo = AnnealConfig::lower_defaults(), up = AnnealConfig::upper_defaults();
  lo.sweeps = up.sweeps = 5;
  up.N0 = 6000;
  lo.N0 = 6000;
  BoundsExperiment e = run_bounds_experiment(c, lo, up, 3, 5, 2);
  REQUIRE(e.replicates.size() == 3);
  CHECK(e.successful <= 3);
  for (const auto& r : e.replicates)
    if (r.ok) CHECK(r.N_min <= r.N_max);
  CHECK(e.containment_rate >= 0.0);
  CHECK(e.containment_rate <= 1.0);
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
}
