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
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rds_size/bounds.hpp"
#include "rds_size/estimation.hpp"
#include "rds_size/simulation.hpp"

namespace rds {

/// Runs body(0..count-1) on up to `jobs` threads. Exceptions from the body
/// are rethrown (the first one by index) after all workers finish.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& body);

/// Worker count from RDS_SIZE_JOBS, else the hardware concurrency.
int default_jobs();

enum class ReplicateStatus { kOk, kInfiniteMle, kVarianceFailure, kSimulationError, kFitError };
std::string to_string(ReplicateStatus s);

struct ReplicateRecord {
  std::size_t index = 0;
  ReplicateStatus status = ReplicateStatus::kOk;
  int coupon_limit = 0;
  int uncensored = 0;
  double y_mean = 0.0;     // mean of the latent counts
  double y_expected = 0.0; // mean of (N - i) rho
  long long N_hat = 0;
  double N_hat_cont = 0.0;
  double rho_hat = 0.0;
  std::optional<double> var_N;
  std::optional<Interval> ci;
  bool covered = false;
  std::string message;
};

struct ScenarioRow {
  SimConfig cfg;
  int B = 0;
  double RB = 0.0;     // relative bias of N_hat
  double RRMSE = 0.0;  // relative root mean squared error (fraction)
  double coverage = 0.0;
  double RLCI = 0.0;
  std::size_t estimates = 0;     // replicates with a finite N_hat
  std::size_t ci_successful = 0;
  std::size_t infinite_mle = 0;
  std::size_t variance_failures = 0;
  std::size_t simulation_errors = 0;
  std::size_t fit_errors = 0;
  double exclusion_rate = 0.0;   // (B - ci_successful) / B
  double mean_N_hat = 0.0;
  double RB_y = 0.0;             // relative bias of the latent sample mean
  double exact_hit_rate = 0.0;   // share of replicates with N_hat == N
};

struct ScenarioResult {
  ScenarioRow row;
  std::vector<ReplicateRecord> replicates;
};

struct EvalOptions {
  int B = 1000;
  std::uint64_t seed = 20240101;
  int jobs = 0;         // 0: default_jobs()
  FitOptions fit;
  bool known_rho = false;  // fit with rho fixed at its true value
};

/// Replicate b of scenario s draws from derive_seed(seed, s, b).
ScenarioResult run_scenario(const SimConfig& cfg, const EvalOptions& opts,
                            std::uint64_t scenario_index = 0);

struct EvalReport {
  std::string name;
  std::vector<ScenarioResult> scenarios;
  EvalOptions options;
};

EvalReport run_grid(const std::string& name, const std::vector<SimConfig>& grid,
                    const EvalOptions& opts);
EvalReport run_robustness(const SimConfig& base, const std::vector<double>& lambdas,
                          const std::vector<double>& etas, const EvalOptions& opts);

struct BoundsReplicate {
  std::size_t index = 0;
  bool ok = false;
  long long N_min = 0;
  long long N_max = 0;
  bool contains_truth = false;
  double N_hat = 0.0;  // censored MLE on the same sample
  std::string message;
};

struct BoundsExperiment {
  SimConfig cfg;
  AnnealConfig lower;
  AnnealConfig upper;
  std::vector<BoundsReplicate> replicates;
  double median_N_min = 0.0;
  double median_N_max = 0.0;
  double containment_rate = 0.0;
  std::size_t successful = 0;
};

BoundsExperiment run_bounds_experiment(const SimConfig& cfg, const AnnealConfig& lower,
                                       const AnnealConfig& upper, int replicates,
                                       std::uint64_t seed, int jobs = 0);

/// Preset scenario grids for evaluate.
std::vector<SimConfig> table1_grid();
std::vector<std::pair<double, double>> table2_cells();  // (eta, lambda)
SimConfig table2_base();

void write_scenarios_csv(const EvalReport& r, std::ostream& out);
void write_replicates_csv(const EvalReport& r, std::ostream& out);
nlohmann::json report_to_json(const EvalReport& r, bool with_replicates = true);
void write_markdown(const EvalReport& r, std::ostream& out);

nlohmann::json bounds_experiment_to_json(const BoundsExperiment& e);
void write_bounds_experiment_csv(const BoundsExperiment& e, std::ostream& out);
void write_bounds_markdown(const BoundsExperiment& e, std::ostream& out);

double median(std::vector<double> v);

}  // namespace rds
