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


// Writes the synthetic survey fixtures under a directory:
//   estonia_like.csv   n = 600, C = 3, 6 seeds, 11 waves, 3 A4 and 3 A5 flags
//   engage_like.csv    n = 1179, C = 6, 27 seeds, 41 A4 and 47 A5 flags
//   all_censored.csv   every unit distributed all C coupons
// Each CSV comes with <name>.coupon_limit.json.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "rds_size/dataset.hpp"
#include "rds_size/rng.hpp"

namespace fs = std::filesystem;

namespace {

struct FixtureSpec {
  std::string name;
  long long N;
  int n;
  int seeds;
  int C;
  double rho;         // tuned from the coupon budget
  int a4;
  int a5;
  int waves;
  int wave_slack;     // accepted within +/- wave_slack
  int tournament;     // larger values give shallower trees
  int full;           // units that used every coupon, -1 for any
  std::time_t start;  // first interview, UTC
};

std::string stamp(std::time_t t) {
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  return buf;
}

int binom(rds::Rng& rng, long long m, double p) {
  if (m <= 0) return 0;
  return std::binomial_distribution<int>(static_cast<int>(m), p)(rng);
}

// One attempt; returns false when the coupons run out before n units.
bool build(const FixtureSpec& s, std::uint64_t seed, std::vector<rds::RdsUnit>& units) {
  rds::Rng rng = rds::make_rng(seed, 0x66697874ULL);
  const int n = s.n;
  std::vector<int> y(n), cap(n), recruits(n, 0), rec(n, -1);
  for (int k = 0; k < n; ++k) {
    y[k] = binom(rng, s.N - (k + 1), s.rho);
    cap[k] = std::min(y[k], s.C);
  }
  // Part of the seed budget enters at random early positions; the rest
  // starts new chains whenever no coupon is outstanding.
  std::vector<char> is_seed(n, 0);
  is_seed[0] = 1;
  const int planned = 1 + static_cast<int>(seed % static_cast<std::uint64_t>(s.seeds));
  std::uniform_int_distribution<int> early(1, std::max(1, n / 4));
  for (int placed = 1; placed < planned;) {
    int k = early(rng);
    if (!is_seed[k]) {
      is_seed[k] = 1;
      ++placed;
    }
  }
  std::vector<int> open;  // units with unused coupons
  for (int k = 0; k < n; ++k) {
    if (!is_seed[k] && open.empty()) is_seed[k] = 1;
    if (!is_seed[k]) {
      std::uniform_int_distribution<std::size_t> pick(0, open.size() - 1);
      std::size_t j = pick(rng);
      for (int round = 1; round < s.tournament; ++round) {
        const std::size_t c = pick(rng);
        if (open[c] < open[j]) j = c;
      }
      const int r = open[j];
      rec[k] = r;
      if (++recruits[r] == cap[r]) {
        open[j] = open.back();
        open.pop_back();
      }
    }
    if (cap[k] > 0) open.push_back(k);
  }
  if (std::count(is_seed.begin(), is_seed.end(), 1) != s.seeds) return false;

  // Reported coupons follow the model, C*_i = min(y_i, C). Coupons still
  // outstanding when sampling stops are the A5 flags; the draw is kept when
  // their total stays within the budget.
  const std::vector<int>& cstar = cap;
  long long surplus = 0;
  for (int k = 0; k < n; ++k) surplus += cap[k];
  surplus -= n - s.seeds;
  if (surplus < 0 || surplus > 2 * s.a5) return false;
  int outstanding = 0, full = 0;
  for (int k = 0; k < n; ++k) {
    if (recruits[k] != cstar[k]) ++outstanding;
    if (recruits[k] == s.C) ++full;
  }
  if (outstanding != s.a5) return false;
  if (s.full >= 0 && full != s.full) return false;

  std::vector<int> degree(n);
  for (int k = 0; k < n; ++k) {
    const int earlier = binom(rng, is_seed[k] ? k : k - 1, s.rho);
    degree[k] = is_seed[k] ? std::max(1, y[k] + earlier) : y[k] + 1 + earlier;
  }
  // A4: enough unrecruited contacts to hand out C coupons, fewer handed out.
  auto a4 = [&](int k) { return degree[k] - k >= s.C && cstar[k] < s.C; };
  std::vector<int> a4_pool;
  int natural = 0;
  for (int k = 0; k < n; ++k) {
    if (a4(k)) ++natural;
    else if (!is_seed[k] && cstar[k] < s.C && k < 2 * s.a4 + s.C) a4_pool.push_back(k);
  }
  if (natural > s.a4 || natural + static_cast<int>(a4_pool.size()) < s.a4) return false;
  std::shuffle(a4_pool.begin(), a4_pool.end(), rng);
  for (int j = 0; j < s.a4 - natural; ++j) {
    const int k = a4_pool[j];
    degree[k] = std::max(degree[k], k + s.C);
  }

  units.assign(n, {});
  std::time_t t = s.start;
  std::uniform_int_distribution<int> gap(5, 600);
  for (int k = 0; k < n; ++k) {
    rds::RdsUnit& u = units[k];
    u.id = s.name.substr(0, 2) + std::to_string(1000 + k);
    if (rec[k] >= 0) u.recruiter_id = units[rec[k]].id;
    t += 60 * gap(rng);
    u.time = stamp(t);
    u.degree = degree[k];
    u.coupons_distributed = cstar[k];
  }
  rds::RdsDataset ds = rds::RdsDataset::from_units(units, s.C);
  return std::abs(ds.max_wave() - s.waves) <= s.wave_slack;
}

// rho whose expected coupon total leaves a little over a5 coupons outstanding.
double tune_rho(const FixtureSpec& s) {
  auto expected = [&](double rho) {
    double total = 0.0;
    for (int i = 1; i <= s.n; ++i) {
      const long long m = s.N - i;
      // E[min(Y, C)] = sum_{k < C} P[Y > k]
      double pk = std::pow(1.0 - rho, static_cast<double>(m)), cdf = 0.0;
      for (int k = 0; k < s.C; ++k) {
        cdf += pk;
        total += 1.0 - cdf;
        pk *= static_cast<double>(m - k) / (k + 1) * rho / (1.0 - rho);
      }
    }
    return total;
  };
  const double target = s.n - s.seeds + 1.2 * s.a5;
  double lo = 1e-7, hi = 0.5;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (expected(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path dir = argc > 1 ? fs::path(argv[1]) : fs::path("data/fixtures");
  fs::create_directories(dir);
  const std::vector<FixtureSpec> specs = {
      {"estonia_like", 744, 600, 6, 3, 0.0, 3, 3, 11, 0, 3, -1, 1262304000},
      {"engage_like", 6683, 1179, 27, 6, 0.0, 41, 47, 20, 8, 3, -1, 1470009600},
  };
  for (FixtureSpec s : specs) {
    s.rho = tune_rho(s);
    std::vector<rds::RdsUnit> units;
    std::uint64_t seed = 1;
    while (!build(s, seed, units)) {
      if (++seed > 20000000) {
        std::cerr << "no valid draw for " << s.name << '\n';
        return 1;
      }
    }
    rds::RdsDataset ds = rds::RdsDataset::from_units(units, s.C);
    rds::export_csv(ds, dir / (s.name + ".csv"));
    rds::write_coupon_limit_sidecar(dir / (s.name + ".coupon_limit.json"), s.C);
    rds::ViolationReport v = rds::diagnose_violations(ds);
    std::cout << s.name << ": n=" << ds.n() << " seeds=" << ds.seed_count()
              << " waves=" << ds.max_wave() << " A4=" << v.a4_violations.size()
              << " A5=" << v.a5_violations.size() << " draw=" << seed << '\n';
  }

  // Every unit is censored: all C = 2 coupons handed out and redeemed.
  std::vector<rds::RdsUnit> all;
  const int n = 7;
  for (int k = 0; k < n; ++k) {
    rds::RdsUnit u;
    u.id = "c" + std::to_string(k + 1);
    if (k > 0) u.recruiter_id = "c" + std::to_string((k - 1) / 2 + 1);
    u.time = std::to_string(k + 1);
    u.degree = 12;
    u.coupons_distributed = 2;
    all.push_back(u);
  }
  rds::RdsDataset ds = rds::RdsDataset::from_units(all, 2);
  rds::export_csv(ds, dir / "all_censored.csv");
  rds::write_coupon_limit_sidecar(dir / "all_censored.coupon_limit.json", 2);
  std::cout << "all_censored: n=" << ds.n() << '\n';
  return 0;
}
