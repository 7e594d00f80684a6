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


#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rds_size/dataset.hpp"
#include "rds_size/rng.hpp"

namespace rds {

/// A hypothetical complete count vector together with its per-unit box.
struct ConcordantData {
  std::vector<int> y_tilde;
  std::vector<int> lower;
  std::vector<int> upper;

  /// Throws InputError listing every unit with lower > upper.
  static ConcordantData make(std::vector<int> lower, std::vector<int> upper,
                             const std::vector<std::string>& ids = {});
  std::size_t n() const { return lower.size(); }
  bool valid() const;
};

struct BoundsOptions {
  /// Relax the lower limit from max(d_i - i + 1, C*_i) to C*_i.
  bool hypothetical_mode = false;
  CensorOptions censor;  // C*_i fallback to recruit counts
};

/// Per-unit limits l_i = max(d_i - i + 1, C*_i) and u_i = d_i - 1 (seeds have
/// no recruiter tie, so u_i = d_i).
ConcordantData concordancy_box(const RdsDataset& ds, const BoundsOptions& opts = {});

/// One Metropolis move: picks a unit uniformly and steps it inside its box.
/// Returns the changed coordinate (n() when nothing moved).
std::size_t propose(ConcordantData& state, Rng& rng);

struct CompleteDataFit {
  double N = 0.0;
  double rho = 0.0;
  bool at_cap = false;     // profile still increasing at the cap
  bool at_floor = false;   // maximum on the smallest feasible N
  double loglik = 0.0;     // profile value, up to a constant
  int iterations = 0;
};

/// Maximizer over real N of prod_i P[Binomial(N - i, rho) = y_i] with rho
/// profiled out. Without `warm` a grid scan locates the mode; with it a local
/// search from `warm` is compared against the value at the cap.
CompleteDataFit point_estimate_for_concordant(const std::vector<int>& y, double n_cap,
                                              double warm = 0.0);

enum class Direction { kLower, kUpper };
std::string to_string(Direction d);

struct AnnealConfig {
  Direction direction = Direction::kLower;
  double epsilon = 2.2;
  double nu = 1.5;
  double N0 = 1e5;
  /// Number of single-coordinate moves; 0 means sweeps * n.
  long long iterations = 0;
  int sweeps = 100;
  std::uint64_t seed = 1;
  /// Constant of the cooling schedule; 0 means epsilon.
  double schedule_epsilon = 0.0;
  /// R(N) = objective_scale * exp(S(N)).
  double objective_scale = 1.0;

  static AnnealConfig lower_defaults();
  static AnnealConfig upper_defaults();
  void validate(std::size_t n) const;
  long long total_iterations(std::size_t n) const;
};

struct TracePoint {
  long long t = 0;
  double N = 0.0;
  bool accepted = false;
};

struct AnnealResult {
  Direction direction = Direction::kLower;
  double extreme = 0.0;   // best N over visited states
  double minimum = 0.0;   // smallest N visited
  double maximum = 0.0;   // largest N visited
  std::vector<int> best_state;
  std::vector<TracePoint> trace;
  long long accepted = 0;
  long long skipped = 0;  // non-finite objective
  long long cap_hits = 0;
};

/// Objective S(N) for the direction.
double anneal_objective(double N, std::size_t n, const AnnealConfig& cfg);

AnnealResult anneal(const ConcordantData& box, const AnnealConfig& cfg);

struct BoundsResult {
  long long N_min = 0;
  long long N_max = 0;
  double point_lower_start = 0.0;  // N at y_tilde = lower
  double point_upper_start = 0.0;  // N at y_tilde = upper
  AnnealResult lower;
  AnnealResult upper;
  ConcordantData box;
  bool hypothetical_mode = false;
};

BoundsResult identification_region(const ConcordantData& box, const AnnealConfig& lower,
                                   const AnnealConfig& upper, bool parallel = true);
BoundsResult identification_region(const RdsDataset& ds, const AnnealConfig& lower,
                                   const AnnealConfig& upper, const BoundsOptions& opts = {},
                                   bool parallel = true);

void to_json(nlohmann::json& j, const AnnealConfig& cfg);
/// Summary plus both traces when `with_traces`.
nlohmann::json bounds_to_json(const BoundsResult& r, bool with_traces = true);
/// `direction,t,N_value,accepted`
void write_trace_csv(const BoundsResult& r, std::ostream& out);

}  // namespace rds
