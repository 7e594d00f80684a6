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

#include <span>
#include <vector>

#include "rds_size/dataset.hpp"

namespace rds {

/// Model parameters on the natural scale. N is continuous during
/// optimization; binomial coefficients are generalized through log-gamma.
struct Params {
  double N = 0.0;
  double rho = 0.0;
};

/// log P[Binomial(m, rho) = k]; -inf when k < 0 or k > m.
double log_pmf(double m, int k, double rho);

/// log P[Binomial(m, rho) < c] = log sum_{k<c} pmf; 0 when c > m.
double log_cdf_below(double m, int c, double rho);

/// log P[Binomial(m, rho) >= c]; -inf when c > m.
double log_tail_geq(double m, int c, double rho);

/// Censored log-likelihood: sum over units of delta_i log P[Y_i = z_i] +
/// (1 - delta_i) log P[Y_i >= C], with Y_i ~ Binomial(N - i, rho).
double loglik_censored(const Params& p, const CensoredObservations& obs);

/// d/d rho of loglik_censored at fixed N.
double dloglik_censored_drho(const Params& p, const CensoredObservations& obs);

/// Likelihood of the uncensored counts conditional on being below C:
/// sum_i [log P[X_i = x_i] - log P[X_i < C]], X_i ~ Binomial(N - index_i, rho).
/// `index` holds 1-based recruitment indices; when empty, x is indexed 1..r.
double loglik_conditional(const Params& p, std::span<const int> x, int coupon_limit,
                          std::span<const int> index = {});

/// Conditional likelihood of the uncensored units of `obs`, each at its own
/// recruitment index.
double loglik_conditional(const Params& p, const CensoredObservations& obs);

struct ProfileValue {
  double value = 0.0;
  double rho = 0.0;
};

/// Single-argument likelihood used for starting values: censored units enter
/// as zero counts and rho is plugged in as sum(delta*z) / sum(N - i).
/// Throws ModelError when every unit is censored.
ProfileValue profile_loglik_N(double N, const CensoredObservations& obs);

struct MomentEstimate {
  double N_tilde = 0.0;  // +inf when !finite
  double rho_tilde = 0.0;
  bool finite = false;
};

/// Method-of-moments estimate from complete counts y_1..y_n (recruitment
/// order): rho = 1 - S^2 / Ybar, N = Ybar / rho + (n + 1) / 2.
/// Throws ModelError when Ybar = 0.
MomentEstimate moment_estimate(std::span<const int> y);

}  // namespace rds
