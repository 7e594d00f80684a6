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

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rds_size/dataset.hpp"
#include "rds_size/likelihood.hpp"
#include "rds_size/nelder_mead.hpp"

namespace rds {

struct FitOptions {
  /// Upper search limit for N; defaults to cap_factor * n. Reaching it marks
  /// the MLE as infinite.
  std::optional<double> n_cap;
  double cap_factor = 100.0;
  /// Fix rho and maximize over N only.
  std::optional<double> known_rho;
  /// Skip the profile-likelihood start.
  std::optional<Params> start;
  NelderMeadOptions simplex{1e-8, 2000, 0.1};
  double level = 0.95;
};

struct StartValues {
  double N = 0.0;
  double rho = 0.0;
  bool at_cap = false;
};

/// Discrete optimality check around the floored optimum. Each value is the
/// censored log-likelihood maximized over rho at that integer N.
struct IntegerCheck {
  double ll_below = 0.0;  // at N_hat - 1
  double ll_at = 0.0;     // at N_hat
  double ll_above = 0.0;  // at N_hat + 1
  long long N_int = 0;    // integer maximizer of the profile
  double rho_int = 0.0;
  bool locally_optimal = false;  // N_int beats both of its neighbours
};

struct Interval {
  double low = 0.0;
  double high = 0.0;
  bool truncated = false;  // low was raised to n
};

struct ModelFit {
  long long N_hat = 0;
  double N_hat_cont = 0.0;
  double rho_hat = 0.0;
  double loglik = 0.0;
  std::optional<double> var_N;
  std::optional<Interval> ci;
  double level = 0.95;
  StartValues start;
  double loglik_start = 0.0;
  bool converged = false;
  int iterations = 0;
  int restarts = 0;
  bool infinite_mle = false;
  bool rho_known = false;
  double n_cap = 0.0;
  IntegerCheck integer_check;
  std::size_t n = 0;
  int coupon_limit = 0;
  int uncensored = 0;
  std::vector<std::string> warnings;
};

/// Smallest N with nonzero likelihood: every uncensored z_i <= N - i and every
/// censored unit has N - i >= C.
double feasible_min_N(const CensoredObservations& obs);

/// Maximizes the single-argument profile likelihood over log(N - n) on
/// [n + 1, n_cap]. Throws ModelError when every unit is censored.
StartValues starting_values(const CensoredObservations& obs, double n_cap);

struct RhoProfile {
  double loglik = 0.0;
  double rho = 0.0;
};

/// max over rho of loglik_censored at fixed N. A hint restricts the search to
/// a bracket of +/- 0.5 on the logit scale around it.
RhoProfile profile_over_rho(double N, const CensoredObservations& obs,
                            std::optional<double> rho_hint = std::nullopt);

ModelFit fit_mle(const CensoredObservations& obs, const FitOptions& opts = {});

/// Large-sample variance of N-hat, 1 / A^2 with
/// A = [sum_i sqrt(N) rho / ((N-i)(1-rho)) - Q(N, rho)] / sqrt(sum_i N rho / ((N-i)(1-rho))).
/// Throws ModelError when A <= 0 or is not finite.
double asymptotic_variance(double N, double rho, std::size_t n, int r, int coupon_limit);

/// The censoring correction Q(N, rho) of the variance formula.
double variance_correction(double N, double rho, int r, int coupon_limit);

/// exp(log N-hat +/- z * sqrt(var) / N-hat), low truncated at n. Throws
/// ModelError when the fit has no variance.
Interval wald_ci(const ModelFit& fit, double level = 0.95);

/// Two-sided standard normal quantile for `level` (1.96 at 0.95).
double normal_quantile_two_sided(double level);

void to_json(nlohmann::json& j, const ModelFit& fit);

}  // namespace rds
