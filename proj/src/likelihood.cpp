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

#include "rds_size/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/special_functions/beta.hpp>

#include "rds_size/error.hpp"
#include "rds_size/special.hpp"

namespace rds {

namespace {

double log_pmf_lgamma(double m, int k, double rho) {
  return std::lgamma(m + 1.0) - std::lgamma(k + 1.0) - std::lgamma(m - k + 1.0) +
         k * std::log(rho) + (m - k) * std::log1p(-rho);
}

}  // namespace

double log_pmf(double m, int k, double rho) {
  if (k < 0 || static_cast<double>(k) > m) return kNegInf;
  // x^(a-1) (1-x)^(b-1) / B(a, b) with a = k+1, b = m-k+1 is (m+1) * pmf; boost
  // evaluates it without forming the large log-gamma terms.
  double d = boost::math::ibeta_derivative(k + 1.0, m - k + 1.0, rho);
  if (d > 1e-290 && std::isfinite(d)) return std::log(d) - std::log1p(m);
  return clamp_log(log_pmf_lgamma(m, k, rho));
}

double log_cdf_below(double m, int c, double rho) {
  if (c <= 0) return kNegInf;
  if (static_cast<double>(c) > m) return 0.0;
  const int top = c - 1;
  const int mode = static_cast<int>(std::floor((m + 1.0) * rho));
  const int ref = std::clamp(mode, 0, top);
  const double log_ref = log_pmf(m, ref, rho);
  if (!std::isfinite(log_ref)) return log_ref;
  const double odds = rho / (1.0 - rho);
  double sum = 1.0;
  double t = 1.0;
  for (int k = ref; k > 0; --k) {  // pmf(k-1) / pmf(k)
    t *= k / ((m - k + 1.0) * odds);
    sum += t;
    if (t < 1e-18 * sum) break;
  }
  t = 1.0;
  for (int k = ref; k < top; ++k) {  // pmf(k+1) / pmf(k)
    t *= (m - k) / (k + 1.0) * odds;
    sum += t;
    if (t < 1e-18 * sum) break;
  }
  return std::min(0.0, log_ref + std::log(sum));
}

double log_tail_geq(double m, int c, double rho) {
  if (c <= 0) return 0.0;
  if (static_cast<double>(c) > m) return kNegInf;
  const double lower = log_cdf_below(m, c, rho);
  if (lower < -std::log(2.0)) return std::log1p(-std::exp(lower));
  // Upper tail below one half: use the regularized incomplete beta identity
  // P[X >= c] = I_rho(c, m - c + 1) to avoid cancellation in 1 - cdf.
  double tail = boost::math::ibeta(static_cast<double>(c), m - c + 1.0, rho);
  if (!(tail > 0.0)) return kNegInf;
  return clamp_log(std::log(tail));
}

double loglik_censored(const Params& p, const CensoredObservations& obs) {
  const int C = obs.coupon_limit;
  double ll = 0.0;
  for (std::size_t k = 0; k < obs.n(); ++k) {
    const double m = p.N - static_cast<double>(k + 1);
    double term = obs.delta[k] ? log_pmf(m, obs.z[k], p.rho) : log_tail_geq(m, C, p.rho);
    if (!std::isfinite(term)) return kNegInf;
    ll += term;
  }
  return ll;
}

double dloglik_censored_drho(const Params& p, const CensoredObservations& obs) {
  const int C = obs.coupon_limit;
  const double rho = p.rho;
  double g = 0.0;
  for (std::size_t k = 0; k < obs.n(); ++k) {
    const double m = p.N - static_cast<double>(k + 1);
    if (obs.delta[k]) {
      g += obs.z[k] / rho - (m - obs.z[k]) / (1.0 - rho);
    } else {
      // d/d rho P[X >= C] = m * P[Binomial(m - 1, rho) = C - 1]
      double lt = log_tail_geq(m, C, rho);
      g += std::exp(std::log(m) + log_pmf(m - 1.0, C - 1, rho) - lt);
    }
  }
  return g;
}

double loglik_conditional(const Params& p, std::span<const int> x, int coupon_limit,
                          std::span<const int> index) {
  if (!index.empty() && index.size() != x.size())
    throw ModelError("loglik_conditional: index length differs from x");
  double ll = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (x[k] >= coupon_limit) throw ModelError("loglik_conditional: x_i must be below C");
    const double i = index.empty() ? static_cast<double>(k + 1) : index[k];
    const double m = p.N - i;
    double term = log_pmf(m, x[k], p.rho);
    if (!std::isfinite(term)) return kNegInf;
    ll += term - log_cdf_below(m, coupon_limit, p.rho);
  }
  return ll;
}

double loglik_conditional(const Params& p, const CensoredObservations& obs) {
  std::vector<int> x, idx;
  for (std::size_t k = 0; k < obs.n(); ++k) {
    if (obs.delta[k]) {
      x.push_back(obs.z[k]);
      idx.push_back(static_cast<int>(k + 1));
    }
  }
  return loglik_conditional(p, x, obs.coupon_limit, idx);
}

ProfileValue profile_loglik_N(double N, const CensoredObservations& obs) {
  if (obs.uncensored_count() == 0)
    throw ModelError("profile undefined: every observation is censored; supply explicit start");
  const std::size_t n = obs.n();
  double sy = 0.0, sm = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    sy += obs.delta[k] * obs.z[k];
    sm += N - static_cast<double>(k + 1);
  }
  ProfileValue out;
  out.rho = sm > 0.0 ? sy / sm : 0.0;
  const double lr = out.rho > 0.0 ? std::log(out.rho) : 0.0;
  const double l1r = std::log1p(-out.rho);
  double v = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double m = N - static_cast<double>(k + 1);
    const int y = obs.delta[k] * obs.z[k];
    if (y > m) {
      out.value = kNegInf;
      return out;
    }
    v += std::lgamma(m + 1.0) - std::lgamma(y + 1.0) - std::lgamma(m - y + 1.0) + y * lr +
         (m - y) * l1r;
  }
  out.value = v;
  return out;
}

MomentEstimate moment_estimate(std::span<const int> y) {
  if (y.empty()) throw ModelError("moment estimate needs at least one count");
  const double n = static_cast<double>(y.size());
  double mean = 0.0;
  for (int v : y) mean += v;
  mean /= n;
  if (mean <= 0.0) throw ModelError("moment estimate undefined: mean count is zero");
  double s2 = 0.0;
  for (int v : y) s2 += (v - mean) * (v - mean);
  s2 /= n;
  MomentEstimate out;
  out.rho_tilde = 1.0 - s2 / mean;
  out.finite = out.rho_tilde > 0.0;
  out.N_tilde = out.finite ? mean / out.rho_tilde + (n + 1.0) / 2.0
                           : std::numeric_limits<double>::infinity();
  return out;
}

}  // namespace rds
