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


#include "rds_size/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <cstdio>
#include <ostream>
#include <stdexcept>

#include <boost/math/special_functions/trigamma.hpp>
#include <nlohmann/json.hpp>

#include "rds_size/error.hpp"
#include "rds_size/likelihood.hpp"
#include "rds_size/special.hpp"

namespace rds {

namespace {

constexpr std::uint64_t kStreamLower = 0x6c6f77ULL;
constexpr std::uint64_t kStreamUpper = 0x757070ULL;

struct Score {
  double g = 0.0;
  double dg = 0.0;
};

// Derivative of the rho-profiled complete-data log-likelihood in N.
Score complete_score(const std::vector<int>& y, double N, double Y) {
  const double n = static_cast<double>(y.size());
  const double M = n * N - n * (n + 1.0) / 2.0;
  if (!(M - Y > 0.0)) return {-std::numeric_limits<double>::infinity(), 0.0};
  Score s;
  for (std::size_t k = 0; k < y.size(); ++k) {
    const double m = N - static_cast<double>(k + 1);
    const int yk = y[k];
    if (yk <= 32) {
      for (int j = 0; j < yk; ++j) {
        const double x = 1.0 / (m - j);
        s.g += x;
        s.dg -= x * x;
      }
    } else {
      s.g += digamma_diff(m + 1.0, m - yk + 1.0);
      s.dg += boost::math::trigamma(m + 1.0) - boost::math::trigamma(m - yk + 1.0);
    }
  }
  s.g += n * std::log1p(-Y / M);
  s.dg += n * n * Y / (M * (M - Y));
  return s;
}

}  // namespace

ConcordantData ConcordantData::make(std::vector<int> lower, std::vector<int> upper,
                                    const std::vector<std::string>& ids) {
  if (lower.size() != upper.size()) throw InputError("concordancy limits differ in length");
  std::string bad;
  std::size_t count = 0;
  for (std::size_t k = 0; k < lower.size(); ++k) {
    if (lower[k] > upper[k]) {
      if (count < 20) {
        if (!bad.empty()) bad += ", ";
        bad += k < ids.size() ? ids[k] : std::to_string(k + 1);
      }
      ++count;
    }
  }
  if (count > 0)
    throw InputError("reported coupons exceed the degree limit for " + std::to_string(count) +
                     " unit(s): " + bad + (count > 20 ? ", ..." : ""));
  ConcordantData d;
  d.y_tilde = lower;
  d.lower = std::move(lower);
  d.upper = std::move(upper);
  return d;
}

bool ConcordantData::valid() const {
  if (y_tilde.size() != lower.size() || upper.size() != lower.size()) return false;
  for (std::size_t k = 0; k < lower.size(); ++k)
    if (y_tilde[k] < lower[k] || y_tilde[k] > upper[k]) return false;
  return true;
}

ConcordantData concordancy_box(const RdsDataset& ds, const BoundsOptions& opts) {
  const std::vector<int> cstar = effective_coupons(ds, opts.censor);
  const std::size_t n = ds.n();
  std::vector<int> lo(n), hi(n);
  std::vector<std::string> ids(n);
  for (std::size_t k = 0; k < n; ++k) {
    const RdsUnit& u = ds.unit(k);
    const int i = static_cast<int>(k + 1);
    hi[k] = u.is_seed() ? u.degree : u.degree - 1;
    lo[k] = opts.hypothetical_mode ? cstar[k] : std::max(u.degree - i + 1, cstar[k]);
    lo[k] = std::max(lo[k], 0);
    ids[k] = u.id;
  }
  return ConcordantData::make(std::move(lo), std::move(hi), ids);
}

std::size_t propose(ConcordantData& s, Rng& rng) {
  const std::size_t n = s.n();
  if (n == 0) return 0;
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  const std::size_t k = pick(rng);
  if (s.lower[k] == s.upper[k]) return n;
  int& v = s.y_tilde[k];
  if (v == s.lower[k]) {
    ++v;
  } else if (v == s.upper[k]) {
    --v;
  } else {
    std::uniform_int_distribution<int> step(-1, 1);
    const int a = step(rng);
    if (a == 0) return n;
    v += a;
  }
  return k;
}

namespace {

struct Problem {
  const std::vector<int>& y;
  double n, Y, lo, cap;

  // Profile log-likelihood up to a constant in N.
  double value(double N) const {
    const double M = n * N - n * (n + 1.0) / 2.0;
    if (!(M - Y > 0.0)) return kNegInf;
    double v = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) {
      const double m = N - static_cast<double>(k + 1);
      v += std::lgamma(m + 1.0) - std::lgamma(m - y[k] + 1.0);
    }
    const double r = Y / M;
    return v + Y * std::log(r) + (M - Y) * std::log1p(-r);
  }
};

// Safeguarded Newton on the score from x0; ends at a stationary point or
// at an end of [lo, cap].
double local_max(const Problem& p, double x0, int& iterations) {
  double a = p.lo, b = p.cap;
  bool a_known = false, b_known = false;
  double x = std::clamp(x0, p.lo, p.cap);
  for (int it = 0; it < 200; ++it) {
    ++iterations;
    const Score s = complete_score(p.y, x, p.Y);
    if (s.g == 0.0) break;
    if (s.g > 0.0) {
      a = x;
      a_known = true;
      if (x >= p.cap) break;
    } else {
      b = x;
      b_known = true;
      if (x <= p.lo) break;
    }
    double next = (s.dg < 0.0 && std::isfinite(s.g)) ? x - s.g / s.dg
                                                     : std::numeric_limits<double>::quiet_NaN();
    if (!std::isfinite(next) || next >= b) next = b_known ? 0.5 * (x + b) : b;
    if (next <= a) next = a_known ? 0.5 * (x + a) : a;
    if (std::fabs(next - x) <= 1e-11 * std::max(1.0, x)) {
      x = next;
      break;
    }
    x = next;
  }
  return x;
}

}  // namespace

CompleteDataFit point_estimate_for_concordant(const std::vector<int>& y, double n_cap,
                                              double warm) {
  CompleteDataFit fit;
  if (y.empty()) throw ModelError("empty concordant data");
  const double n = static_cast<double>(y.size());
  double lo = n, Y = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    lo = std::max(lo, static_cast<double>(k + 1) + y[k]);
    Y += y[k];
  }
  if (lo > n_cap) throw ModelError("N cap below the smallest feasible N");
  if (Y == 0.0) {
    fit.N = lo;
    fit.at_floor = true;
    return fit;
  }
  const Problem p{y, n, Y, lo, n_cap};

  // The profile need not be unimodal: besides an interior mode it can rise
  // again towards the Poisson limit. Candidates are compared by value.
  std::vector<double> starts;
  if (warm > 0.0) {
    starts.push_back(warm);
  } else {
    constexpr int kGrid = 48;
    const double l0 = std::log(lo - n + 1.0), l1 = std::log(n_cap - n + 1.0);
    double best = kNegInf, best_x = lo;
    for (int g = 0; g <= kGrid; ++g) {
      const double x = n - 1.0 + std::exp(l0 + (l1 - l0) * g / kGrid);
      const double v = p.value(x);
      if (v > best) {
        best = v;
        best_x = x;
      }
    }
    starts.push_back(best_x);
    try {
      MomentEstimate m = moment_estimate(y);
      if (m.finite && std::isfinite(m.N_tilde) && m.N_tilde > lo && m.N_tilde < n_cap)
        starts.push_back(m.N_tilde);
    } catch (const ModelError&) {
    }
  }

  double best_x = n_cap, best_v = p.value(n_cap);
  for (double s0 : starts) {
    const double x = local_max(p, s0, fit.iterations);
    const double v = p.value(x);
    if (v > best_v) {
      best_v = v;
      best_x = x;
    }
  }
  if (best_x <= lo) {
    const double v = p.value(lo);
    if (v >= best_v) best_x = lo;
  }
  fit.N = best_x;
  fit.rho = Y / (n * best_x - n * (n + 1.0) / 2.0);
  fit.at_cap = best_x >= n_cap * (1.0 - 1e-9);
  fit.at_floor = best_x <= lo;
  fit.loglik = best_v;
  return fit;
}

std::string to_string(Direction d) { return d == Direction::kLower ? "lower" : "upper"; }

AnnealConfig AnnealConfig::lower_defaults() {
  AnnealConfig c;
  c.direction = Direction::kLower;
  c.epsilon = 2.2;
  c.nu = 1.5;
  return c;
}

AnnealConfig AnnealConfig::upper_defaults() {
  AnnealConfig c;
  c.direction = Direction::kUpper;
  c.epsilon = 1.2;
  c.nu = 0.5;
  c.seed = 2;
  return c;
}

long long AnnealConfig::total_iterations(std::size_t n) const {
  return iterations > 0 ? iterations : static_cast<long long>(sweeps) * static_cast<long long>(n);
}

void AnnealConfig::validate(std::size_t n) const {
  if (!(epsilon > 0.0)) throw ConfigError("anneal epsilon must be > 0");
  if (schedule_epsilon < 0.0) throw ConfigError("schedule epsilon must be >= 0");
  if (!(objective_scale > 0.0)) throw ConfigError("objective scale must be > 0");
  if (direction == Direction::kLower && nu < 1.0) throw ConfigError("lower-bound nu must be >= 1");
  if (direction == Direction::kUpper && nu < 0.5)
    throw ConfigError("upper-bound nu must be >= 1/2");
  if (!(N0 > static_cast<double>(n))) throw ConfigError("N0 must exceed n");
  if (iterations < 0 || sweeps < 0) throw ConfigError("iteration counts must be non-negative");
  if (total_iterations(n) <= 10) throw ConfigError("anneal needs more than 10 iterations");
}

double anneal_objective(double N, std::size_t n, const AnnealConfig& cfg) {
  const double nn = static_cast<double>(n);
  if (cfg.direction == Direction::kLower)
    return 1.0 / (cfg.epsilon + (N - nn) / std::pow(nn, cfg.nu));
  return 1.0 / (cfg.epsilon + (cfg.N0 - N) / std::pow(cfg.N0, cfg.nu));
}

AnnealResult anneal(const ConcordantData& box, const AnnealConfig& cfg) {
  const std::size_t n = box.n();
  cfg.validate(n);
  if (!box.valid()) throw ModelError("initial concordant state is outside its box");
  const double eps_sched = cfg.schedule_epsilon > 0.0 ? cfg.schedule_epsilon : cfg.epsilon;
  Rng rng(cfg.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  ConcordantData state = box;
  state.y_tilde = cfg.direction == Direction::kLower ? box.lower : box.upper;

  AnnealResult out;
  out.direction = cfg.direction;
  CompleteDataFit cur = point_estimate_for_concordant(state.y_tilde, cfg.N0);
  double R_cur = cfg.objective_scale * std::exp(anneal_objective(cur.N, n, cfg));
  out.minimum = out.maximum = out.extreme = cur.N;
  out.best_state = state.y_tilde;
  if (cur.at_cap) ++out.cap_hits;

  const long long T = cfg.total_iterations(n);
  out.trace.reserve(static_cast<std::size_t>(T));
  for (long long t = 1; t <= T; ++t) {
    const std::size_t k = propose(state, rng);
    bool accepted = true;
    if (k < n) {
      if (state.y_tilde[k] < state.lower[k] || state.y_tilde[k] > state.upper[k])
        throw std::logic_error("proposal left the concordancy box");
      const int old = state.y_tilde[k];
      CompleteDataFit next;
      double R_new = std::numeric_limits<double>::quiet_NaN();
      try {
        next = point_estimate_for_concordant(state.y_tilde, cfg.N0, cur.N);
        R_new = cfg.objective_scale * std::exp(anneal_objective(next.N, n, cfg));
      } catch (const ModelError&) {
      }
      if (!std::isfinite(R_new) || !std::isfinite(next.N)) {
        ++out.skipped;
        accepted = false;
      } else {
        const double log_beta = (R_new - R_cur) * eps_sched * std::log(static_cast<double>(t) + 1.0);
        accepted = log_beta >= 0.0 || unif(rng) < std::exp(log_beta);
      }
      if (accepted) {
        cur = next;
        R_cur = R_new;
        if (cur.at_cap) ++out.cap_hits;
        out.minimum = std::min(out.minimum, cur.N);
        out.maximum = std::max(out.maximum, cur.N);
        const bool better = cfg.direction == Direction::kLower ? cur.N < out.extreme
                                                               : cur.N > out.extreme;
        if (better) {
          out.extreme = cur.N;
          out.best_state = state.y_tilde;
        }
      } else {
        // Undo the move; the proposal changed exactly one coordinate.
        state.y_tilde[k] = old;
      }
    }
    if (accepted) ++out.accepted;
    out.trace.push_back({t, cur.N, accepted});
  }
  return out;
}

BoundsResult identification_region(const ConcordantData& box, const AnnealConfig& lower,
                                   const AnnealConfig& upper, bool parallel) {
  AnnealConfig lo_cfg = lower, hi_cfg = upper;
  lo_cfg.direction = Direction::kLower;
  hi_cfg.direction = Direction::kUpper;
  lo_cfg.validate(box.n());
  hi_cfg.validate(box.n());
  lo_cfg.seed = derive_seed(lower.seed, kStreamLower, 0);
  hi_cfg.seed = derive_seed(upper.seed, kStreamUpper, 0);

  BoundsResult r;
  r.box = box;
  if (parallel) {
    auto fut = std::async(std::launch::async, [&] { return anneal(box, hi_cfg); });
    r.lower = anneal(box, lo_cfg);
    r.upper = fut.get();
  } else {
    r.lower = anneal(box, lo_cfg);
    r.upper = anneal(box, hi_cfg);
  }
  r.point_lower_start = point_estimate_for_concordant(box.lower, lo_cfg.N0).N;
  r.point_upper_start = point_estimate_for_concordant(box.upper, hi_cfg.N0).N;

  // Every visited state is concordant, so the extremes over both chains are
  // attained points of the region.
  const double n = static_cast<double>(box.n());
  const double mn = std::min(r.lower.minimum, r.upper.minimum);
  const double mx = std::max(r.lower.maximum, r.upper.maximum);
  r.N_min = static_cast<long long>(std::floor(std::max(mn, n)));
  r.N_max = static_cast<long long>(std::floor(std::min(mx, std::max(lo_cfg.N0, hi_cfg.N0))));
  r.N_max = std::max(r.N_max, r.N_min);
  return r;
}

BoundsResult identification_region(const RdsDataset& ds, const AnnealConfig& lower,
                                   const AnnealConfig& upper, const BoundsOptions& opts,
                                   bool parallel) {
  BoundsResult r = identification_region(concordancy_box(ds, opts), lower, upper, parallel);
  r.hypothetical_mode = opts.hypothetical_mode;
  return r;
}

void to_json(nlohmann::json& j, const AnnealConfig& cfg) {
  j = {{"direction", to_string(cfg.direction)},
       {"epsilon", cfg.epsilon},
       {"nu", cfg.nu},
       {"N0", cfg.N0},
       {"iterations", cfg.iterations},
       {"sweeps", cfg.sweeps},
       {"seed", cfg.seed},
       {"schedule_epsilon", cfg.schedule_epsilon > 0.0 ? cfg.schedule_epsilon : cfg.epsilon},
       {"objective_scale", cfg.objective_scale}};
}

namespace {

nlohmann::json run_to_json(const AnnealResult& a, bool with_trace) {
  nlohmann::json j = {{"extreme", a.extreme},
                      {"min_visited", a.minimum},
                      {"max_visited", a.maximum},
                      {"accepted", a.accepted},
                      {"skipped", a.skipped},
                      {"cap_hits", a.cap_hits},
                      {"iterations", a.trace.size()},
                      {"best_state", a.best_state}};
  if (with_trace) {
    nlohmann::json t = nlohmann::json::array();
    for (const auto& p : a.trace) t.push_back({p.t, p.N, p.accepted});
    j["trace"] = std::move(t);
    j["trace_columns"] = {"t", "N_value", "accepted"};
  }
  return j;
}

}  // namespace

nlohmann::json bounds_to_json(const BoundsResult& r, bool with_traces) {
  nlohmann::json j;
  j["N_min"] = r.N_min;
  j["N_max"] = r.N_max;
  j["hypothetical_mode"] = r.hypothetical_mode;
  j["n"] = r.box.n();
  j["N_at_lower_limits"] = r.point_lower_start;
  j["N_at_upper_limits"] = r.point_upper_start;
  j["box"] = {{"lower", r.box.lower}, {"upper", r.box.upper}};
  j["lower"] = run_to_json(r.lower, with_traces);
  j["upper"] = run_to_json(r.upper, with_traces);
  return j;
}

void write_trace_csv(const BoundsResult& r, std::ostream& out) {
  out << "direction,t,N_value,accepted\n";
  char buf[64];
  for (const AnnealResult* a : {&r.lower, &r.upper}) {
    const std::string d = to_string(a->direction);
    for (const auto& p : a->trace) {
      std::snprintf(buf, sizeof buf, "%.10g", p.N);
      out << d << ',' << p.t << ',' << buf << ',' << (p.accepted ? 1 : 0) << '\n';
    }
  }
}

}  // namespace rds
