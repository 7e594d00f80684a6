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

#include "rds_size/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/normal.hpp>
#include <nlohmann/json.hpp>

#include "rds_size/error.hpp"
#include "rds_size/special.hpp"

namespace rds {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double logit(double p) { return std::log(p) - std::log1p(-p); }
double expit(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

double cap_for(const CensoredObservations& obs, const FitOptions& opts) {
  double cap = opts.n_cap.value_or(opts.cap_factor * static_cast<double>(obs.n()));
  if (!(cap > static_cast<double>(obs.n()) + 1.0))
    throw ConfigError("N cap must exceed n + 1");
  return cap;
}

bool near_cap(double N, double cap) { return N >= cap * (1.0 - 1e-4); }

// The censored log-likelihood maximized over N on [lo, cap] for fixed rho.
double maximize_over_N(const CensoredObservations& obs, double rho, double lo, double cap) {
  const double n = static_cast<double>(obs.n());
  auto f = [&](double t) { return loglik_censored({n - 1.0 + std::exp(t), rho}, obs); };
  double t = grid_golden_maximize(f, std::log(lo - n + 1.0), std::log(cap - n + 1.0), 96, 1e-12);
  return n - 1.0 + std::exp(t);
}

}  // namespace

double feasible_min_N(const CensoredObservations& obs) {
  double lo = static_cast<double>(obs.n());
  for (std::size_t k = 0; k < obs.n(); ++k) {
    const double i = static_cast<double>(k + 1);
    lo = std::max(lo, i + (obs.delta[k] ? obs.z[k] : obs.coupon_limit));
  }
  return lo;
}

StartValues starting_values(const CensoredObservations& obs, double n_cap) {
  if (obs.uncensored_count() == 0)
    throw ModelError("profile undefined: every observation is censored; supply explicit start");
  const double n = static_cast<double>(obs.n());
  double lo = n + 1.0;
  for (std::size_t k = 0; k < obs.n(); ++k)
    if (obs.delta[k]) lo = std::max(lo, static_cast<double>(k + 1) + obs.z[k]);
  if (lo >= n_cap) throw ModelError("N cap below the smallest feasible N");
  double events = 0.0;
  for (std::size_t k = 0; k < obs.n(); ++k) events += obs.delta[k] * obs.z[k];
  if (events == 0.0) return {n_cap, 0.0, true};  // the plug-in rate is zero for every N
  auto f = [&](double u) { return profile_loglik_N(n + std::exp(u), obs).value; };
  double u = grid_golden_maximize(f, std::log(lo - n), std::log(n_cap - n), 128, 1e-12);
  StartValues s;
  s.N = n + std::exp(u);
  s.rho = profile_loglik_N(s.N, obs).rho;
  s.at_cap = near_cap(s.N, n_cap);
  return s;
}

RhoProfile profile_over_rho(double N, const CensoredObservations& obs,
                            std::optional<double> rho_hint) {
  auto f = [&](double t) { return loglik_censored({N, expit(t)}, obs); };
  double t;
  if (rho_hint && *rho_hint > 0.0 && *rho_hint < 1.0) {
    const double c = logit(*rho_hint);
    t = grid_golden_maximize(f, c - 0.5, c + 0.5, 8, 1e-10);
  } else {
    t = grid_golden_maximize(f, -40.0, 40.0, 160, 1e-13);
  }
  return {f(t), expit(t)};
}

double variance_correction(double N, double rho, int r, int coupon_limit) {
  // Weighted mean of G(M; M-k) = sum_{j=M-k+1}^{M} 1/j over k < C with
  // weights P[Binomial(M, rho) = k].
  auto part = [&](double M) {
    std::vector<double> lw, g;
    for (int k = 0; k < coupon_limit; ++k) {
      double w = log_pmf(M, k, rho);
      if (!std::isfinite(w)) continue;
      lw.push_back(w);
      g.push_back(harmonic_range(M - k + 1.0, M));
    }
    if (lw.empty()) throw ModelError("variance correction has no support below C");
    double top = *std::max_element(lw.begin(), lw.end());
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < lw.size(); ++k) {
      double w = std::exp(lw[k] - top);
      num += w * g[k];
      den += w;
    }
    return num / den;
  };
  return part(N - r - 1.0) - part(N - 1.0);
}

double asymptotic_variance(double N, double rho, std::size_t n, int r, int coupon_limit) {
  if (!(N > static_cast<double>(n)) || !(rho > 0.0 && rho < 1.0))
    throw ModelError("variance formula inapplicable at these parameters: need N > n, 0 < rho < 1");
  if (r < 0 || static_cast<std::size_t>(r) > n)
    throw ModelError("variance formula inapplicable: r outside [0, n]");
  double s = 0.0;
  for (std::size_t i = 1; i <= n; ++i) s += rho / ((N - static_cast<double>(i)) * (1.0 - rho));
  const double q = variance_correction(N, rho, r, coupon_limit);
  const double a = (std::sqrt(N) * s - q) / std::sqrt(N * s);
  if (!std::isfinite(a) || a <= 0.0)
    throw ModelError("variance formula inapplicable at these parameters (A <= 0)");
  return 1.0 / (a * a);
}

double normal_quantile_two_sided(double level) {
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in (0, 1)");
  if (std::fabs(level - 0.95) < 1e-12) return 1.96;
  boost::math::normal nd;
  return boost::math::quantile(nd, 0.5 + level / 2.0);
}

Interval wald_ci(const ModelFit& fit, double level) {
  if (!fit.var_N || !std::isfinite(*fit.var_N) || *fit.var_N < 0.0)
    throw ModelError("confidence interval unavailable: no finite variance");
  const double z = normal_quantile_two_sided(level);
  const double center = fit.N_hat_cont;
  const double se_log = std::sqrt(*fit.var_N) / center;
  Interval ci{center * std::exp(-z * se_log), center * std::exp(z * se_log), false};
  if (ci.low < static_cast<double>(fit.n)) {
    ci.low = static_cast<double>(fit.n);
    ci.truncated = true;
  }
  return ci;
}

ModelFit fit_mle(const CensoredObservations& obs, const FitOptions& opts) {
  ModelFit fit;
  fit.n = obs.n();
  fit.coupon_limit = obs.coupon_limit;
  fit.uncensored = obs.uncensored_count();
  fit.level = opts.level;
  fit.n_cap = cap_for(obs, opts);
  fit.rho_known = opts.known_rho.has_value();
  const double n = static_cast<double>(obs.n());
  const double cap = fit.n_cap;
  const double lo = feasible_min_N(obs);

  if (fit.uncensored == 0) {
    fit.infinite_mle = true;
    fit.N_hat_cont = cap;
    fit.N_hat = static_cast<long long>(std::floor(cap));
    fit.rho_hat = opts.known_rho.value_or(kNaN);
    fit.loglik = kNaN;
    fit.warnings.push_back("every observation is censored: the MLE of N is infinite");
    return fit;
  }
  if (lo >= cap) throw ModelError("N cap below the smallest feasible N");

  if (opts.known_rho) {
    const double rho = *opts.known_rho;
    if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("known rho must lie in (0, 1)");
    fit.N_hat_cont = maximize_over_N(obs, rho, lo, cap);
    fit.rho_hat = rho;
    fit.start = {fit.N_hat_cont, rho, false};
    fit.loglik = loglik_censored({fit.N_hat_cont, rho}, obs);
    fit.loglik_start = fit.loglik;
    fit.converged = std::isfinite(fit.loglik);
  } else {
    StartValues start;
    if (opts.start) {
      start = {opts.start->N, opts.start->rho, false};
    } else {
      start = starting_values(obs, cap);
    }
    fit.start = start;
    double N0 = std::clamp(start.N, std::min(lo + 1.0, cap), cap);
    double rho0 = std::clamp(start.rho, 1e-10, 1.0 - 1e-10);
    fit.loglik_start = loglik_censored({start.N, std::clamp(start.rho, 1e-300, 1.0 - 1e-16)}, obs);

    auto objective = [&](const std::vector<double>& th) {
      if (th[0] < 0.0) return kInf;
      const double N = n - 1.0 + std::exp(th[0]);
      if (N > cap || N < lo) return kInf;
      const double v = loglik_censored({N, expit(th[1])}, obs);
      return std::isfinite(v) ? -v : kInf;
    };
    // A simplex seeded on the cap collapses there, so the start is kept at
    // least one unit of log(N - n + 1) inside it; rho keeps N * rho fixed.
    const double theta_cap = std::log(cap - n + 1.0);
    auto inward = [&](double theta, double N_from, double rho_from) {
      theta = std::min(theta, theta_cap - 1.0);
      const double N_to = std::max(n - 1.0 + std::exp(theta), lo + 1e-6);
      const double r = std::clamp(rho_from * N_from / N_to, 1e-10, 1.0 - 1e-10);
      return std::vector<double>{std::log(N_to - n + 1.0), logit(r)};
    };
    std::vector<double> x0 = inward(std::log(N0 - n + 1.0), N0, rho0);
    auto res = nelder_mead(objective, x0, opts.simplex);
    fit.iterations = res.iterations;
    if (!res.converged || near_cap(n - 1.0 + std::exp(res.x[0]), cap)) {
      const double N_r = n - 1.0 + std::exp(res.x[0]);
      std::vector<double> x1 = inward(res.x[0] - 1.0, N_r, expit(res.x[1]));
      if (!std::isfinite(objective(x1))) x1 = res.x;
      auto again = nelder_mead(objective, x1, opts.simplex);
      fit.restarts = 1;
      fit.iterations += again.iterations;
      if (again.fx <= res.fx) res = again;
      else res.converged = res.converged || again.converged;
    }
    fit.converged = res.converged && std::isfinite(res.fx);
    fit.N_hat_cont = n - 1.0 + std::exp(res.x[0]);
    fit.rho_hat = expit(res.x[1]);
    fit.loglik = -res.fx;
    if (!fit.converged) fit.warnings.push_back("simplex did not converge within the iteration limit");
  }

  fit.infinite_mle = near_cap(fit.N_hat_cont, cap);
  fit.N_hat = static_cast<long long>(std::floor(fit.N_hat_cont));

  // Integer refinement: the integer maximizer sits at floor or ceil of the
  // continuous optimum for a unimodal profile.
  auto prof = [&](double N) -> RhoProfile {
    if (N < lo || N > cap) return {kNegInf, kNaN};
    if (fit.rho_known) return {loglik_censored({N, fit.rho_hat}, obs), fit.rho_hat};
    return profile_over_rho(N, obs, fit.rho_hat * fit.N_hat_cont / N);
  };
  const double base = static_cast<double>(fit.N_hat);
  RhoProfile pb = prof(base - 1.0), pa = prof(base), pu = prof(base + 1.0);
  fit.integer_check.ll_below = pb.loglik;
  fit.integer_check.ll_at = pa.loglik;
  fit.integer_check.ll_above = pu.loglik;
  if (pu.loglik > pa.loglik) {
    RhoProfile pu2 = prof(base + 2.0);
    fit.integer_check.N_int = fit.N_hat + 1;
    fit.integer_check.rho_int = pu.rho;
    fit.integer_check.locally_optimal = pu.loglik + 1e-8 >= pa.loglik && pu.loglik + 1e-8 >= pu2.loglik;
  } else {
    fit.integer_check.N_int = fit.N_hat;
    fit.integer_check.rho_int = pa.rho;
    fit.integer_check.locally_optimal = pa.loglik + 1e-8 >= pb.loglik && pa.loglik + 1e-8 >= pu.loglik;
  }

  if (fit.infinite_mle) {
    fit.warnings.push_back("estimate reached the N cap: the MLE of N is treated as infinite");
    return fit;
  }
  if (!fit.converged) return fit;
  try {
    fit.var_N = asymptotic_variance(fit.N_hat_cont, fit.rho_hat, obs.n(), fit.uncensored,
                                    obs.coupon_limit);
    fit.ci = wald_ci(fit, opts.level);
    if (fit.ci->truncated) fit.warnings.push_back("confidence interval lower limit truncated at n");
  } catch (const ModelError& e) {
    fit.var_N.reset();
    fit.ci.reset();
    fit.warnings.push_back(e.what());
  }
  return fit;
}

namespace {

nlohmann::json num_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace

void to_json(nlohmann::json& j, const ModelFit& fit) {
  j = nlohmann::json::object();
  j["N_hat"] = fit.N_hat;
  j["N_hat_cont"] = num_or_null(fit.N_hat_cont);
  j["rho_hat"] = num_or_null(fit.rho_hat);
  j["loglik"] = num_or_null(fit.loglik);
  j["var_N"] = fit.var_N ? num_or_null(*fit.var_N) : nlohmann::json(nullptr);
  j["ci"] = fit.ci ? nlohmann::json::array({fit.ci->low, fit.ci->high}) : nlohmann::json(nullptr);
  j["level"] = fit.level;
  j["start"] = {{"N", num_or_null(fit.start.N)},
                {"rho", num_or_null(fit.start.rho)},
                {"at_cap", fit.start.at_cap},
                {"loglik", num_or_null(fit.loglik_start)}};
  j["flags"] = {{"converged", fit.converged},
                {"infinite_mle", fit.infinite_mle},
                {"rho_known", fit.rho_known},
                {"ci_truncated", fit.ci ? fit.ci->truncated : false}};
  j["optimizer"] = {{"method", fit.rho_known ? "golden_section" : "nelder_mead"},
                    {"iterations", fit.iterations},
                    {"restarts", fit.restarts},
                    {"n_cap", fit.n_cap}};
  j["integer_check"] = {{"N_int", fit.integer_check.N_int},
                        {"rho_int", num_or_null(fit.integer_check.rho_int)},
                        {"ll_below", num_or_null(fit.integer_check.ll_below)},
                        {"ll_at", num_or_null(fit.integer_check.ll_at)},
                        {"ll_above", num_or_null(fit.integer_check.ll_above)},
                        {"locally_optimal", fit.integer_check.locally_optimal}};
  j["variance_method"] = "plug-in at (N_hat_cont, rho_hat) of the known-rho asymptotic formula";
  j["data"] = {{"n", fit.n}, {"coupon_limit", fit.coupon_limit}, {"uncensored", fit.uncensored}};
  j["warnings"] = fit.warnings;
}

}  // namespace rds
