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
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "rds_size/bounds.hpp"
#include "rds_size/error.hpp"
#include "rds_size/likelihood.hpp"

using namespace rds;

namespace {

// Complete-data log-likelihood at rho = Y / sum(N - i).
double complete_profile(const std::vector<int>& y, double N) {
  double Y = 0, M = 0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    Y += y[k];
    M += N - static_cast<double>(k + 1);
  }
  const double rho = Y / M;
  double v = 0;
  for (std::size_t k = 0; k < y.size(); ++k) v += log_pmf(N - static_cast<double>(k + 1), y[k], rho);
  return v;
}

double grid_argmax(const std::vector<int>& y, double lo, double hi, double step) {
  double best = -INFINITY, arg = lo;
  for (double N = lo; N <= hi + 1e-12; N += step) {
    const double v = complete_profile(y, N);
    if (v > best) {
      best = v;
      arg = N;
    }
  }
  return arg;
}

double floor_of(const std::vector<int>& y) {
  double lo = static_cast<double>(y.size());
  for (std::size_t k = 0; k < y.size(); ++k) lo = std::max(lo, static_cast<double>(k + 1 + y[k]));
  return lo;
}

void enumerate(const ConcordantData& box, const std::function<void(const std::vector<int>&)>& f) {
  std::vector<int> y = box.lower;
  while (true) {
    f(y);
    std::size_t k = 0;
    while (k < y.size() && y[k] == box.upper[k]) {
      y[k] = box.lower[k];
      ++k;
    }
    if (k == y.size()) return;
    ++y[k];
  }
}

AnnealConfig quick(Direction d, long long T, std::uint64_t seed) {
  AnnealConfig c = d == Direction::kLower ? AnnealConfig::lower_defaults()
                                          : AnnealConfig::upper_defaults();
  c.iterations = T;
  c.N0 = 400;
  c.seed = seed;
  return c;
}

RdsUnit unit(std::string id, std::optional<std::string> rec, int t, int degree, int cstar) {
  return {std::move(id), std::move(rec), std::to_string(t), degree, cstar};
}

}  // namespace

TEST_CASE("concordancy box from degrees and coupons") {
  std::vector<RdsUnit> units{unit("s", std::nullopt, 1, 6, 2), unit("a", "s", 2, 9, 1),
                             unit("b", "s", 3, 3, 0), unit("c", "a", 4, 2, 0)};
  RdsDataset ds = RdsDataset::from_units(units, 3);
  ConcordantData box = concordancy_box(ds);
  CHECK(box.upper == std::vector<int>{6, 8, 2, 1});
  CHECK(box.lower == std::vector<int>{6, 8, 1, 0});
  CHECK(box.y_tilde == box.lower);
  CHECK(box.valid());

  BoundsOptions hyp;
  hyp.hypothetical_mode = true;
  ConcordantData relaxed = concordancy_box(ds, hyp);
  CHECK(relaxed.lower == std::vector<int>{2, 1, 0, 0});
}

TEST_CASE("inconsistent coupons are reported per unit") {
  std::vector<RdsUnit> units{unit("s", std::nullopt, 1, 4, 1), unit("bad", "s", 2, 2, 3)};
  RdsDataset ds = RdsDataset::from_units(units, 3);
  CHECK_THROWS_WITH_AS(concordancy_box(ds), doctest::Contains("bad"), InputError);
  CHECK_THROWS_AS(identification_region(ds, AnnealConfig::lower_defaults(),
                                        AnnealConfig::upper_defaults()),
                  InputError);
}

TEST_CASE("proposal branches") {
  Rng rng(1);
  ConcordantData d = ConcordantData::make({2}, {5});
  CHECK(propose(d, rng) == 0);
  CHECK(d.y_tilde[0] == 3);
  d.y_tilde[0] = 5;
  CHECK(propose(d, rng) == 0);
  CHECK(d.y_tilde[0] == 4);

  ConcordantData fixed = ConcordantData::make({1, 4, 0}, {1, 4, 0});
  for (int t = 0; t < 100; ++t) {
    CHECK(propose(fixed, rng) == fixed.n());
    CHECK(fixed.y_tilde == fixed.lower);
  }
}

TEST_CASE("interior proposals are symmetric") {
  Rng rng(2);
  int up = 0, down = 0, stay = 0;
  for (int t = 0; t < 30000; ++t) {
    ConcordantData d = ConcordantData::make({0}, {4});
    d.y_tilde[0] = 2;
    propose(d, rng);
    up += d.y_tilde[0] == 3;
    down += d.y_tilde[0] == 1;
    stay += d.y_tilde[0] == 2;
  }
  CHECK(std::abs(up - down) < 600);
  CHECK(std::abs(stay - 10000) < 600);
}

TEST_CASE("random proposals never leave the box") {
  Rng rng(3);
  ConcordantData d = ConcordantData::make({0, 3, 1, 5, 0}, {2, 3, 4, 9, 1});
  for (int t = 0; t < 20000; ++t) {
    propose(d, rng);
    REQUIRE(d.valid());
  }
}

TEST_CASE("complete-data estimate matches a grid search") {
  const std::vector<int> y{2, 1, 1};
  CompleteDataFit f = point_estimate_for_concordant(y, 200);
  const double g = grid_argmax(y, floor_of(y), 200, 0.01);
  CHECK(std::fabs(f.N - g) <= 0.01);
  CHECK(f.rho == doctest::Approx(4.0 / (3 * f.N - 6)));

  const std::vector<int> trend{9, 9, 8, 7, 7, 6, 5, 5, 4, 3};
  CompleteDataFit t = point_estimate_for_concordant(trend, 1000);
  CHECK_FALSE(t.at_cap);
  CHECK(std::fabs(t.N - grid_argmax(trend, floor_of(trend), 1000, 0.01)) <= 0.01);
}

TEST_CASE("complete-data estimate special cases") {
  const std::vector<int> flat{3, 3, 3, 3, 3, 3};
  MomentEstimate m = moment_estimate(flat);
  CHECK(m.N_tilde == doctest::Approx(3 + 3.5));
  CompleteDataFit f = point_estimate_for_concordant(flat, 1000);
  CHECK_FALSE(f.at_cap);
  CHECK(f.N >= floor_of(flat));
  CHECK(f.N < 3 * m.N_tilde);

  const std::vector<int> wild{0, 0, 9, 0, 0, 0, 0, 9};
  CHECK_FALSE(moment_estimate(wild).finite);
  CHECK(point_estimate_for_concordant(wild, 5000).at_cap);

  const std::vector<int> zeros{0, 0, 0};
  CHECK(point_estimate_for_concordant(zeros, 100).at_floor);
  CHECK_THROWS_AS(point_estimate_for_concordant({50}, 10), ModelError);
}

TEST_CASE("anneal configuration") {
  AnnealConfig c = AnnealConfig::lower_defaults();
  CHECK(c.epsilon == 2.2);
  CHECK(c.nu == 1.5);
  CHECK(c.total_iterations(500) == 50000);
  c.iterations = 10;
  CHECK_THROWS_AS(c.validate(500), ConfigError);
  c.iterations = 11;
  CHECK_NOTHROW(c.validate(500));
  c.nu = 0.9;
  CHECK_THROWS_AS(c.validate(500), ConfigError);

  AnnealConfig u = AnnealConfig::upper_defaults();
  CHECK(u.epsilon == 1.2);
  CHECK(u.nu == 0.5);
  CHECK(u.N0 == 1e5);
  u.N0 = 400;
  CHECK_THROWS_AS(u.validate(500), ConfigError);
  u.N0 = 1e5;
  u.nu = 0.4;
  CHECK_THROWS_AS(u.validate(500), ConfigError);
}

TEST_CASE("anneal objectives") {
  AnnealConfig lo = AnnealConfig::lower_defaults();
  CHECK(anneal_objective(600, 100, lo) == doctest::Approx(1.0 / (2.2 + 500.0 / 1000.0)));
  AnnealConfig up = AnnealConfig::upper_defaults();
  CHECK(anneal_objective(6e4, 100, up) == doctest::Approx(1.0 / (1.2 + 4e4 / std::sqrt(1e5))));
  CHECK(anneal_objective(700, 100, lo) < anneal_objective(600, 100, lo));
  CHECK(anneal_objective(7e4, 100, up) > anneal_objective(6e4, 100, up));
}

TEST_CASE("greedy annealing never accepts a worse state") {
  ConcordantData box = ConcordantData::make({9, 8, 7, 7, 6, 5, 5, 4, 3, 3},
                                            {11, 10, 9, 9, 8, 7, 7, 6, 5, 5});
  AnnealConfig c = quick(Direction::kLower, 3000, 4);
  c.objective_scale = 1e9;
  AnnealResult r = anneal(box, c);
  for (std::size_t t = 1; t < r.trace.size(); ++t) CHECK(r.trace[t].N <= r.trace[t - 1].N + 1e-9);
  CHECK(r.extreme == r.minimum);
  CHECK(r.minimum <= point_estimate_for_concordant(box.lower, c.N0).N);
}

TEST_CASE("annealing is reproducible and stays concordant") {
  ConcordantData box = ConcordantData::make({9, 8, 7, 7, 6, 5, 5, 4, 3, 3},
                                            {11, 10, 9, 9, 8, 7, 7, 6, 5, 5});
  AnnealConfig c = quick(Direction::kUpper, 2000, 5);
  AnnealResult a = anneal(box, c), b = anneal(box, c);
  REQUIRE(a.trace.size() == 2000);
  for (std::size_t t = 0; t < a.trace.size(); ++t) CHECK(a.trace[t].N == b.trace[t].N);
  ConcordantData best = box;
  best.y_tilde = a.best_state;
  CHECK(best.valid());
  CHECK(point_estimate_for_concordant(a.best_state, c.N0).N == doctest::Approx(a.extreme));
  CHECK(a.extreme == a.maximum);
}

TEST_CASE("singleton space gives a degenerate region") {
  const std::vector<int> y{9, 8, 8, 7, 6, 6, 5, 4, 4, 3};
  ConcordantData box = ConcordantData::make(y, y);
  BoundsResult r = identification_region(box, quick(Direction::kLower, 50, 1),
                                         quick(Direction::kUpper, 50, 2));
  const long long p = static_cast<long long>(std::floor(point_estimate_for_concordant(y, 400).N));
  CHECK(r.N_min == p);
  CHECK(r.N_max == p);
}

TEST_CASE("region matches exhaustive enumeration and grows with the box") {
  const std::vector<std::pair<std::vector<int>, std::vector<int>>> boxes = {
      {{8, 7, 7, 6, 5, 5}, {8, 8, 8, 7, 6, 5}},
      {{7, 7, 6, 6, 5, 4}, {9, 8, 8, 7, 7, 6}},
      {{6, 6, 6, 5, 4, 4}, {9, 9, 8, 7, 7, 6}},
  };
  long long prev_min = 0, prev_max = 0;
  for (std::size_t b = 0; b < boxes.size(); ++b) {
    ConcordantData box = ConcordantData::make(boxes[b].first, boxes[b].second);
    double bmin = INFINITY, bmax = -INFINITY;
    enumerate(box, [&](const std::vector<int>& y) {
      const double N = point_estimate_for_concordant(y, 400).N;
      bmin = std::min(bmin, N);
      bmax = std::max(bmax, N);
    });
    BoundsResult r = identification_region(box, quick(Direction::kLower, 20000, 10 + b),
                                           quick(Direction::kUpper, 20000, 20 + b), false);
    CHECK(r.N_min == static_cast<long long>(std::floor(bmin)));
    CHECK(r.N_max == static_cast<long long>(std::floor(bmax)));
    CHECK(r.N_min <= r.N_max);
    if (b > 0) {
      CHECK(r.N_min <= prev_min);
      CHECK(r.N_max >= prev_max);
    }
    prev_min = r.N_min;
    prev_max = r.N_max;
  }
}

TEST_CASE("parallel and sequential regions agree; outputs are well formed") {
  ConcordantData box = ConcordantData::make({9, 8, 7, 7, 6, 5, 5, 4, 3, 3},
                                            {11, 10, 9, 9, 8, 7, 7, 6, 5, 5});
  AnnealConfig lo = quick(Direction::kLower, 500, 7), up = quick(Direction::kUpper, 500, 8);
  BoundsResult p = identification_region(box, lo, up, true);
  BoundsResult s = identification_region(box, lo, up, false);
  CHECK(p.N_min == s.N_min);
  CHECK(p.N_max == s.N_max);
  CHECK(p.N_min >= 10);
  CHECK(p.N_max <= 400);

  std::ostringstream csv;
  write_trace_csv(p, csv);
  std::istringstream in(csv.str());
  std::string line;
  int rows = 0;
  std::getline(in, line);
  CHECK(line == "direction,t,N_value,accepted");
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 1000);

  nlohmann::json j = bounds_to_json(p);
  CHECK(j.contains("N_min"));
  CHECK(j.contains("N_max"));
  CHECK(j["lower"].contains("trace"));
  CHECK_FALSE(bounds_to_json(p, false)["lower"].contains("trace"));
}
