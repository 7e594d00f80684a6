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

#include <cmath>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "rds_size/error.hpp"
#include "rds_size/estimation.hpp"
#include "rds_size/likelihood.hpp"
#include "rds_size/simulation.hpp"

using namespace rds;

namespace {

struct GridMax {
  long long N = 0;
  double rho = 0.0;
  double ll = -INFINITY;
};

// Exhaustive search over integer N in [lo, hi] and rho on a 1e-4 lattice.
GridMax grid_search(const CensoredObservations& obs, long long lo, long long hi) {
  GridMax best;
  for (long long N = lo; N <= hi; ++N) {
    for (int k = 1; k < 10000; ++k) {
      const double rho = k * 1e-4;
      const double v = loglik_censored({static_cast<double>(N), rho}, obs);
      if (v > best.ll) best = {N, rho, v};
    }
  }
  return best;
}

// Direct-summation form of the variance correction term.
double correction_direct(double N, double rho, int r, int C) {
  auto part = [&](long long M) {
    long double num = 0, den = 0;
    for (int k = 0; k < C && k <= M; ++k) {
      long double c = 1;
      for (int j = 1; j <= k; ++j) c = c * (M - k + j) / j;
      const long double w = c * std::pow((long double)rho, k) * std::pow(1.0L - rho, M - k);
      long double g = 0;
      for (long long j = M - k + 1; j <= M; ++j) g += 1.0L / j;
      num += w * g;
      den += w;
    }
    return num / den;
  };
  const long long Ni = static_cast<long long>(N);
  return static_cast<double>(part(Ni - r - 1) - part(Ni - 1));
}

}  // namespace

TEST_CASE("fit_mle matches exhaustive grid search on a tiny instance") {
  auto obs = CensoredObservations::make({1, 0, 1}, {1, 1, 1}, 2);
  FitOptions opts;
  opts.n_cap = 200;
  ModelFit fit = fit_mle(obs, opts);
  GridMax g = grid_search(obs, 3, 200);
  CHECK(std::llabs(fit.integer_check.N_int - g.N) <= 1);
  if (fit.integer_check.N_int == g.N) CHECK(std::fabs(fit.integer_check.rho_int - g.rho) <= 1e-4);
  CHECK(fit.loglik >= g.ll - 1e-6);
}

TEST_CASE("fit_mle on small simulated instances agrees with brute force") {
  std::mt19937_64 rng(5);
  int checked = 0;
  for (int rep = 0; checked < 12 && rep < 200; ++rep) {
    const int n = 3 + rep % 3, C = 1 + rep % 3;
    const long long N_true = 8 + rep % 40;
    std::vector<int> z(n);
    for (int i = 1; i <= n; ++i)
      z[i - 1] = std::min(C, std::binomial_distribution<int>(N_true - i, 0.12)(rng));
    auto obs = CensoredObservations::make(z, C);
    if (obs.uncensored_count() == 0) continue;
    FitOptions opts;
    opts.n_cap = 50;
    ModelFit fit = fit_mle(obs, opts);
    GridMax g = grid_search(obs, n, 50);
    CHECK(fit.loglik >= g.ll - 1e-6);
    if (!fit.infinite_mle) {
      CHECK(fit.integer_check.ll_at >= fit.integer_check.ll_below - 1e-8);
      CHECK(std::max(fit.integer_check.ll_at, fit.integer_check.ll_above) >= g.ll - 1e-6);
    }
    ++checked;
  }
  CHECK(checked == 12);
}

TEST_CASE("fit_mle invariants on a simulated sample") {
  SimConfig cfg;
  cfg.seed = 3;
  SimResult sim = simulate_process(cfg);
  ModelFit fit = fit_mle(sim.obs);
  CHECK(fit.converged);
  CHECK(fit.N_hat >= static_cast<long long>(cfg.n));
  CHECK(static_cast<double>(fit.N_hat) <= fit.N_hat_cont);
  CHECK(fit.N_hat_cont < fit.N_hat + 1.0);
  CHECK(fit.rho_hat > 0.0);
  CHECK(fit.rho_hat < 1.0);
  CHECK(fit.loglik >= fit.loglik_start - 1e-9);
  if (!fit.infinite_mle) {
    REQUIRE(fit.ci);
    CHECK(fit.ci->low <= fit.N_hat_cont);
    CHECK(fit.ci->high >= fit.N_hat_cont);
    CHECK(fit.integer_check.locally_optimal);
  }
  ModelFit again = fit_mle(sim.obs);
  CHECK(again.N_hat_cont == fit.N_hat_cont);
  CHECK(again.rho_hat == fit.rho_hat);

  nlohmann::json j = fit;
  for (const char* key : {"N_hat", "N_hat_cont", "rho_hat", "loglik", "var_N", "ci", "start",
                          "flags", "integer_check"})
    CHECK(j.contains(key));
}

TEST_CASE("fit_mle flags an infinite MLE when every unit is censored") {
  auto obs = CensoredObservations::make({2, 2, 2, 2}, 2);
  ModelFit fit = fit_mle(obs);
  CHECK(fit.infinite_mle);
  CHECK_FALSE(fit.ci);
  CHECK_FALSE(fit.var_N);
  CHECK_THROWS_AS(starting_values(obs, 400), ModelError);
}

TEST_CASE("fit_mle with known rho") {
  SimConfig cfg;
  cfg.N = 2000;
  cfg.n = 300;
  cfg.rho = 0.02;
  cfg.seed = 11;
  SimResult sim = simulate_process(cfg);
  FitOptions opts;
  opts.known_rho = cfg.rho;
  ModelFit fit = fit_mle(sim.obs, opts);
  CHECK(fit.rho_known);
  CHECK(fit.rho_hat == cfg.rho);
  CHECK(std::fabs(fit.N_hat_cont - 2000.0) < 200.0);
  const double l = loglik_censored({fit.N_hat_cont, cfg.rho}, sim.obs);
  for (double d : {-5.0, -1.0, 1.0, 5.0})
    CHECK(loglik_censored({fit.N_hat_cont + d, cfg.rho}, sim.obs) <= l + 1e-9);

  opts.known_rho = 1.5;
  CHECK_THROWS_AS(fit_mle(sim.obs, opts), ConfigError);
}

TEST_CASE("starting values") {
  auto zeros = CensoredObservations::make({0, 0, 0, 0}, 2);
  StartValues s = starting_values(zeros, 400);
  CHECK(s.at_cap);
  CHECK(s.rho == 0.0);

  auto single = CensoredObservations::make({3}, 5);
  StartValues one = starting_values(single, 100);
  CHECK(one.rho == doctest::Approx(3.0 / (one.N - 1.0)));
}

TEST_CASE("profile start lands near the truth on simulated samples" * doctest::may_fail()) {
  int within = 0;
  const int R = 200;
  for (int rep = 0; rep < R; ++rep) {
    SimConfig cfg;
    cfg.seed = 1000 + rep;
    SimResult sim = simulate_process(cfg);
    StartValues s = starting_values(sim.obs, 100.0 * cfg.n);
    within += s.N >= 2500.0 && s.N <= 10000.0;
  }
  MESSAGE("profile starts within a factor 2 of N: " << within << "/" << R);
  CHECK(within >= 190);
}

TEST_CASE("fit_mle depends only on the ordered counts") {
  auto a = CensoredObservations::make({0, 1, 3, 0, 2, 1, 1, 0, 2, 3}, 3);
  auto b = a;
  ModelFit fa = fit_mle(a), fb = fit_mle(b);
  CHECK(fa.N_hat_cont == fb.N_hat_cont);
  CHECK(fa.rho_hat == fb.rho_hat);
}

TEST_CASE("variance correction") {
  CHECK(variance_correction(5000, 0.01, 375, 1) == 0.0);
  for (int C : {2, 3, 6}) {
    for (double rho : {0.005, 0.01, 0.05}) {
      const double got = variance_correction(5000, rho, 375, C);
      const double want = correction_direct(5000, rho, 375, C);
      CHECK(got == doctest::Approx(want).epsilon(1e-9));
    }
  }
}

TEST_CASE("asymptotic variance reduces to the uncensored form when C = 1") {
  const double N = 3000, rho = 0.02;
  const std::size_t n = 200;
  double s = 0;
  for (std::size_t i = 1; i <= n; ++i) s += rho / ((N - i) * (1 - rho));
  const double a = std::sqrt(N) * s / std::sqrt(N * s);
  CHECK(asymptotic_variance(N, rho, n, 150, 1) == doctest::Approx(1.0 / (a * a)));
  CHECK(asymptotic_variance(5000, 0.01, 500, 375, 9) > 0.0);
  CHECK_THROWS_AS(asymptotic_variance(100, 0.01, 500, 10, 3), ModelError);
  CHECK_THROWS_AS(asymptotic_variance(1000, 0.01, 500, 600, 3), ModelError);
}

TEST_CASE("wald confidence interval") {
  ModelFit fit;
  fit.n = 100;
  fit.N_hat_cont = 500;
  fit.var_N = 0.0;
  Interval z = wald_ci(fit);
  CHECK(z.low == 500.0);
  CHECK(z.high == 500.0);

  fit.var_N = 2500.0;  // se(log N) = 0.1
  Interval ci = wald_ci(fit);
  CHECK(ci.low == doctest::Approx(500 * std::exp(-0.196)));
  CHECK(ci.high == doctest::Approx(500 * std::exp(0.196)));
  Interval ci90 = wald_ci(fit, 0.90);
  CHECK(ci90.high == doctest::Approx(500 * std::exp(0.1 * 1.6448536269514722)));

  fit.var_N = 1e6;
  Interval wide = wald_ci(fit);
  CHECK(wide.truncated);
  CHECK(wide.low == 100.0);

  fit.var_N.reset();
  CHECK_THROWS_AS(wald_ci(fit), ModelError);
  CHECK(normal_quantile_two_sided(0.95) == 1.96);
  CHECK_THROWS_AS(normal_quantile_two_sided(1.0), ConfigError);
}
