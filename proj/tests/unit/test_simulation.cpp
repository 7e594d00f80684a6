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

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "rds_size/error.hpp"
#include "rds_size/simulation.hpp"

using namespace rds;

TEST_CASE("empirical quantile is the smallest value reaching the level") {
  CHECK(empirical_quantile({3, 0, 2, 1}, 0.25) == 0);
  CHECK(empirical_quantile({3, 0, 2, 1}, 0.26) == 1);
  CHECK(empirical_quantile({3, 0, 2, 1}, 0.5) == 1);
  CHECK(empirical_quantile({5, 5, 5, 7}, 0.5) == 5);
  CHECK(empirical_quantile({5, 5, 5, 7}, 0.9) == 7);
  CHECK_THROWS_AS(empirical_quantile({}, 0.5), ConfigError);
}

TEST_CASE("simulate_process is reproducible per seed and index") {
  SimConfig cfg;
  cfg.seed = 42;
  SimResult a = simulate_process(cfg, 3), b = simulate_process(cfg, 3), c = simulate_process(cfg, 4);
  CHECK(a.y == b.y);
  CHECK(a.obs.z == b.obs.z);
  CHECK(a.degree == b.degree);
  CHECK(a.recruiter == b.recruiter);
  CHECK(a.y != c.y);
}

TEST_CASE("simulated counts respect their invariants") {
  SimConfig cfg;
  cfg.eta = 0.25;
  cfg.lambda = 0.5;
  cfg.seed = 8;
  SimResult s = simulate_process(cfg);
  REQUIRE(s.y.size() == static_cast<std::size_t>(cfg.n));
  int affected = 0;
  for (int k = 0; k < cfg.n; ++k) {
    CHECK(s.y[k] >= 0);
    CHECK(s.y[k] <= cfg.N - (k + 1));
    CHECK(s.obs.z[k] == std::min(s.y_effective[k], s.coupon_limit));
    affected += s.affected[k];
  }
  CHECK(affected == static_cast<int>(std::ceil(0.25 * cfg.n)));
  CHECK(s.coupon_limit == empirical_quantile(s.y_effective, cfg.alpha));
}

TEST_CASE("full violation halves every count") {
  SimConfig cfg;
  cfg.N = 100;
  cfg.n = 10;
  cfg.rho = 0.5;
  cfg.eta = 1.0;
  cfg.lambda = 0.5;
  cfg.seed = 5;
  SimResult s = simulate_process(cfg);
  for (int k = 0; k < cfg.n; ++k) CHECK(s.y_effective[k] == s.y[k] / 2);
}

TEST_CASE("degenerate coupon limit is rejected") {
  SimConfig cfg;
  cfg.rho = 1e-9;
  cfg.alpha = 0.5;
  CHECK_THROWS_WITH_AS(simulate_process(cfg), doctest::Contains("degenerate coupon limit"),
                       ConfigError);
  cfg.coupon_limit_override = 2;
  CHECK_NOTHROW(simulate_process(cfg));
}

TEST_CASE("configuration validation") {
  SimConfig cfg;
  cfg.n = 5000;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.lambda = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.eta = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.rho = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  nlohmann::json j = {{"N", 800}, {"n", 80}, {"rho", 0.02}, {"seed", 9}};
  SimConfig parsed = sim_config_from_json(j);
  CHECK(parsed.N == 800);
  CHECK(parsed.seed == 9);
  nlohmann::json back = parsed;
  CHECK(sim_config_from_json(back).rho == 0.02);
  CHECK_THROWS_AS(sim_config_from_json({{"M", 3}}), ConfigError);
}

TEST_CASE("latent means converge to (N - i) rho") {
  SimConfig cfg;
  const int R = 400;
  const std::vector<int> probe{1, cfg.n / 2, cfg.n};
  std::vector<double> sum(3, 0.0);
  double censored = 0.0;
  for (int r = 0; r < R; ++r) {
    SimResult s = simulate_process(cfg, r);
    for (int j = 0; j < 3; ++j) sum[j] += s.y[probe[j] - 1];
    censored += 1.0 - static_cast<double>(s.obs.uncensored_count()) / cfg.n;
  }
  for (int j = 0; j < 3; ++j) {
    const double m = static_cast<double>(cfg.N - probe[j]);
    const double mean = m * cfg.rho, sd = std::sqrt(m * cfg.rho * (1 - cfg.rho));
    CHECK(std::fabs(sum[j] / R - mean) <= 4.0 * sd / std::sqrt(R));
  }
  // The quantile rule censors at least 1 - alpha; ties at C add a few percent.
  const double frac = censored / R;
  CHECK(frac >= 1.0 - cfg.alpha - 0.01);
  CHECK(frac <= 1.0 - cfg.alpha + 0.06);
}

TEST_CASE("exported datasets carry the censored observations") {
  SimConfig cfg;
  cfg.N = 1500;
  cfg.n = 200;
  cfg.rho = 0.02;
  cfg.seed = 77;
  SimResult s = simulate_process(cfg);
  RdsDataset ds = to_dataset(s);
  CHECK(ds.n() == 200);
  CHECK(ds.coupon_limit() == s.coupon_limit);
  DerivedObservations d = derive_censored(ds);
  CHECK(d.obs.z == s.obs.z);
  CHECK(d.obs.delta == s.obs.delta);
  for (std::size_t k = 0; k < ds.n(); ++k) CHECK(ds.recruit_count(k) <= s.obs.z[k]);
}

TEST_CASE("graph oracle on a complete graph") {
  SimConfig cfg;
  cfg.N = 3;
  cfg.n = 2;
  cfg.rho = 1.0 - 1e-12;
  cfg.coupon_limit_override = 2;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    cfg.seed = seed;
    SimResult s = simulate_graph_oracle(cfg);
    CHECK(s.y == std::vector<int>{2, 1});
  }
}

TEST_CASE("graph oracle reports chain death with the partial sample") {
  SimConfig cfg;
  cfg.N = 50;
  cfg.n = 10;
  cfg.rho = 0.001;
  cfg.coupon_limit_override = 3;
  int died = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    cfg.seed = seed;
    try {
      simulate_graph_oracle(cfg);
    } catch (const ChainDeathError& e) {
      ++died;
      CHECK(e.partial().y.size() < 10);
    }
  }
  CHECK(died >= 18);
}

TEST_CASE("graph oracle guards its size and is reproducible") {
  SimConfig big;
  big.N = 20001;
  big.n = 10;
  CHECK_THROWS_AS(simulate_graph_oracle(big), ConfigError);

  SimConfig cfg;
  cfg.N = 500;
  cfg.n = 50;
  cfg.rho = 0.05;
  cfg.seed = 3;
  SimResult a = simulate_graph_oracle(cfg, 2), b = simulate_graph_oracle(cfg, 2);
  CHECK(a.y == b.y);
  for (int k = 0; k < cfg.n; ++k) CHECK(a.y[k] <= cfg.N - (k + 1));
  CHECK_FALSE(a.recruiter[0].has_value());
  for (int k = 1; k < cfg.n; ++k) CHECK(*a.recruiter[k] < static_cast<std::size_t>(k));

  cfg.coupon_limit_override = 3;
  RdsDataset ds = to_dataset(simulate_graph_oracle(cfg, 2));
  CHECK(ds.n() == 50);
}
