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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rds_size/dataset.hpp"
#include "rds_size/error.hpp"
#include "rds_size/rng.hpp"

namespace rds {

struct SimConfig {
  long long N = 5000;
  int n = 500;
  double rho = 0.01;
  double alpha = 0.25;
  std::optional<int> coupon_limit_override;
  double lambda = 0.0;  // share of unrecruited neighbours unavailable
  double eta = 0.0;     // share of recruiters affected by lambda
  std::uint64_t seed = 1;
  /// When false the affected recruiters are drawn from a stream that depends
  /// on `seed` only, so every replicate index sees the same set.
  bool resample_affected = true;

  /// Throws ConfigError.
  void validate() const;
};

SimConfig sim_config_from_json(const nlohmann::json& j, SimConfig base = {});
void to_json(nlohmann::json& j, const SimConfig& cfg);

struct SimResult {
  std::vector<int> y;            // latent Y_i
  std::vector<int> y_effective;  // after the availability reduction
  std::vector<char> affected;
  CensoredObservations obs;
  int coupon_limit = 0;
  long long N = 0;
  double rho = 0.0;

  // Recruitment forest and reported degrees, used for CSV export.
  std::vector<std::optional<std::size_t>> recruiter;
  std::vector<int> degree;
};

/// Raised by the graph oracle when no coupon reaches an unsampled unit
/// before n recruits; `partial` holds the units sampled so far.
class ChainDeathError : public ModelError {
 public:
  ChainDeathError(const std::string& what, SimResult partial)
      : ModelError(what), partial_(std::move(partial)) {}
  const SimResult& partial() const { return partial_; }

 private:
  SimResult partial_;
};

/// Smallest integer q with empirical P[Y <= q] >= alpha.
int empirical_quantile(const std::vector<int>& y, double alpha);

/// Independent binomial draws for i = 1..n. `index` selects the replicate
/// stream of cfg.seed.
SimResult simulate_process(const SimConfig& cfg, std::uint64_t index = 0);

/// Explicit G(N, rho) graph with coupon-driven recruitment. N <= 20000.
SimResult simulate_graph_oracle(const SimConfig& cfg, std::uint64_t index = 0);

/// Observed columns only: ids "u1".."un", integer times, degrees, and
/// C*_i = min(y_effective, C).
RdsDataset to_dataset(const SimResult& sim);

/// Sidecar with the latent counts (`id,y,y_effective,affected`).
void write_latent_sidecar(const SimResult& sim, const std::filesystem::path& path);

}  // namespace rds
