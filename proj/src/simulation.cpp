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


#include "rds_size/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "rds_size/csv.hpp"

namespace rds {

namespace {

constexpr std::uint64_t kStreamProcess = 0x70726f63ULL;
constexpr std::uint64_t kStreamGraph = 0x67726170ULL;
constexpr std::uint64_t kStreamAffected = 0x61666663ULL;

int binom(Rng& rng, long long m, double p) {
  if (m <= 0) return 0;
  std::binomial_distribution<int> d(static_cast<int>(m), p);
  return d(rng);
}

// Marks ceil(eta * n) of the n positions, chosen uniformly.
std::vector<char> pick_affected(int n, double eta, Rng& rng) {
  std::vector<char> out(n, 0);
  const int k = std::min(n, static_cast<int>(std::ceil(eta * n - 1e-9)));
  if (k <= 0) return out;
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (int j = 0; j < k; ++j) {
    std::uniform_int_distribution<int> u(j, n - 1);
    std::swap(idx[j], idx[u(rng)]);
    out[idx[j]] = 1;
  }
  return out;
}

std::vector<char> affected_for(const SimConfig& cfg, std::uint64_t index, Rng& rng) {
  if (cfg.resample_affected) return pick_affected(cfg.n, cfg.eta, rng);
  Rng fixed = make_rng(cfg.seed, kStreamAffected, 0);
  (void)index;
  return pick_affected(cfg.n, cfg.eta, fixed);
}

int reduce(int y, double lambda) {
  return static_cast<int>(std::floor((1.0 - lambda) * y + 1e-12));
}

int coupon_limit_for(const SimConfig& cfg, const std::vector<int>& eff) {
  int C = cfg.coupon_limit_override ? *cfg.coupon_limit_override
                                    : empirical_quantile(eff, cfg.alpha);
  if (C <= 0)
    throw ConfigError("degenerate coupon limit C = 0: every observation would be censored at 0; "
                      "use a larger alpha or an explicit coupon limit");
  return C;
}

void censor(SimResult& out) {
  std::vector<int> z(out.y_effective.size());
  for (std::size_t k = 0; k < z.size(); ++k) z[k] = std::min(out.y_effective[k], out.coupon_limit);
  out.obs = CensoredObservations::make(std::move(z), out.coupon_limit);
}

}  // namespace

void SimConfig::validate() const {
  if (N < 2) throw ConfigError("N must be at least 2");
  if (n < 1 || static_cast<long long>(n) >= N) throw ConfigError("need 1 <= n < N");
  if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("rho must lie in (0, 1)");
  if (!coupon_limit_override && !(alpha > 0.0 && alpha < 1.0))
    throw ConfigError("alpha must lie in (0, 1)");
  if (coupon_limit_override && *coupon_limit_override < 1)
    throw ConfigError("coupon limit must be >= 1");
  if (!(lambda >= 0.0 && lambda < 1.0)) throw ConfigError("lambda must lie in [0, 1)");
  if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("eta must lie in [0, 1]");
}

SimConfig sim_config_from_json(const nlohmann::json& j, SimConfig cfg) {
  if (!j.is_object()) throw ConfigError("simulation config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "N") cfg.N = v.get<long long>();
      else if (key == "n") cfg.n = v.get<int>();
      else if (key == "rho") cfg.rho = v.get<double>();
      else if (key == "alpha") cfg.alpha = v.get<double>();
      else if (key == "coupon_limit") {
        if (v.is_null()) cfg.coupon_limit_override.reset();
        else cfg.coupon_limit_override = v.get<int>();
      } else if (key == "lambda") cfg.lambda = v.get<double>();
      else if (key == "eta") cfg.eta = v.get<double>();
      else if (key == "seed") cfg.seed = v.get<std::uint64_t>();
      else if (key == "resample_affected") cfg.resample_affected = v.get<bool>();
      else throw ConfigError("unknown simulation key '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("simulation key '" + key + "': " + e.what());
    }
  }
  return cfg;
}

void to_json(nlohmann::json& j, const SimConfig& cfg) {
  j = {{"N", cfg.N},         {"n", cfg.n},         {"rho", cfg.rho},
       {"alpha", cfg.alpha}, {"lambda", cfg.lambda}, {"eta", cfg.eta},
       {"seed", cfg.seed},   {"resample_affected", cfg.resample_affected}};
  j["coupon_limit"] = cfg.coupon_limit_override ? nlohmann::json(*cfg.coupon_limit_override)
                                                : nlohmann::json(nullptr);
}

int empirical_quantile(const std::vector<int>& y, double alpha) {
  if (y.empty()) throw ConfigError("quantile of an empty sample");
  std::vector<int> s(y);
  std::sort(s.begin(), s.end());
  const double target = alpha * static_cast<double>(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (k + 1 < s.size() && s[k + 1] == s[k]) continue;
    if (static_cast<double>(k + 1) >= target - 1e-9) return s[k];
  }
  return s.back();
}

SimResult simulate_process(const SimConfig& cfg, std::uint64_t index) {
  cfg.validate();
  Rng rng = make_rng(cfg.seed, kStreamProcess, index);
  SimResult out;
  out.N = cfg.N;
  out.rho = cfg.rho;
  const int n = cfg.n;
  out.y.resize(n);
  for (int k = 0; k < n; ++k) out.y[k] = binom(rng, cfg.N - (k + 1), cfg.rho);

  out.affected = cfg.eta > 0.0 ? affected_for(cfg, index, rng) : std::vector<char>(n, 0);
  out.y_effective = out.y;
  for (int k = 0; k < n; ++k)
    if (out.affected[k]) out.y_effective[k] = reduce(out.y[k], cfg.lambda);

  out.coupon_limit = coupon_limit_for(cfg, out.y_effective);
  censor(out);

  // Recruitment forest: coupons are redeemed first-in first-out; an empty
  // queue starts a new seed.
  out.recruiter.assign(n, std::nullopt);
  out.degree.resize(n);
  std::deque<std::size_t> queue;
  for (int k = 0; k < n; ++k) {
    if (!queue.empty()) {
      out.recruiter[k] = queue.front();
      queue.pop_front();
    }
    const int earlier = binom(rng, out.recruiter[k] ? k - 1 : k, cfg.rho);
    out.degree[k] = out.recruiter[k] ? out.y[k] + 1 + earlier : std::max(1, out.y[k] + earlier);
    for (int c = 0; c < out.obs.z[k]; ++c) queue.push_back(static_cast<std::size_t>(k));
  }
  return out;
}

SimResult simulate_graph_oracle(const SimConfig& cfg, std::uint64_t index) {
  cfg.validate();
  if (cfg.N > 20000) throw ConfigError("graph oracle requires N <= 20000");
  Rng rng = make_rng(cfg.seed, kStreamGraph, index);
  const int N = static_cast<int>(cfg.N);
  const int n = cfg.n;

  // G(N, rho) by geometric skipping over the pairs (v, w), w < v.
  std::vector<std::vector<int>> adj(N);
  {
    const double lq = std::log1p(-cfg.rho);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    long long v = 1, w = -1;
    while (v < N) {
      const double r = 1.0 - unif(rng);
      w += 1 + static_cast<long long>(std::floor(std::log(r) / lq));
      while (w >= v && v < N) {
        w -= v;
        ++v;
      }
      if (v < N) {
        adj[v].push_back(static_cast<int>(w));
        adj[w].push_back(static_cast<int>(v));
      }
    }
  }

  SimResult out;
  out.N = cfg.N;
  out.rho = cfg.rho;
  out.affected = cfg.eta > 0.0 ? affected_for(cfg, index, rng) : std::vector<char>(n, 0);
  const long long limit = cfg.coupon_limit_override ? *cfg.coupon_limit_override
                                                    : std::numeric_limits<long long>::max();

  std::vector<char> sampled(N, 0);
  std::vector<std::size_t> position(N, 0);
  struct Coupon {
    std::size_t holder;
    int target;
  };
  std::vector<Coupon> frontier;
  std::vector<int> order;

  auto admit = [&](int v, std::optional<std::size_t> recruiter) {
    const std::size_t k = order.size();
    sampled[v] = 1;
    position[v] = k;
    order.push_back(v);
    out.recruiter.push_back(recruiter);
    out.degree.push_back(std::max<int>(1, static_cast<int>(adj[v].size())));
    std::vector<int> open;
    for (int u : adj[v])
      if (!sampled[u]) open.push_back(u);
    const int y = static_cast<int>(open.size());
    const int eff = out.affected[k] ? reduce(y, cfg.lambda) : y;
    out.y.push_back(y);
    out.y_effective.push_back(eff);
    // The available neighbours are a uniform subset of size eff; coupons go
    // to min(eff, limit) of them.
    const long long give = std::min<long long>(eff, limit);
    for (long long j = 0; j < give; ++j) {
      std::uniform_int_distribution<std::size_t> u(static_cast<std::size_t>(j), open.size() - 1);
      std::swap(open[j], open[u(rng)]);
      frontier.push_back({k, open[j]});
    }
  };

  std::uniform_int_distribution<int> pick_vertex(0, N - 1);
  admit(pick_vertex(rng), std::nullopt);
  while (static_cast<int>(order.size()) < n) {
    bool found = false;
    while (!frontier.empty()) {
      std::uniform_int_distribution<std::size_t> u(0, frontier.size() - 1);
      const std::size_t j = u(rng);
      const Coupon c = frontier[j];
      frontier[j] = frontier.back();
      frontier.pop_back();
      if (sampled[c.target]) continue;
      admit(c.target, c.holder);
      found = true;
      break;
    }
    if (!found) {
      out.affected.resize(order.size());
      if (!out.y_effective.empty()) {
        try {
          out.coupon_limit = coupon_limit_for(cfg, out.y_effective);
          censor(out);
        } catch (const ConfigError&) {
        }
      }
      throw ChainDeathError("recruitment chain died after " + std::to_string(order.size()) +
                                " of " + std::to_string(n) + " units; retry with another seed",
                            std::move(out));
    }
  }

  out.coupon_limit = coupon_limit_for(cfg, out.y_effective);
  censor(out);
  return out;
}

RdsDataset to_dataset(const SimResult& sim) {
  const std::size_t n = sim.obs.n();
  if (sim.recruiter.size() != n || sim.degree.size() != n)
    throw ConfigError("simulation result has no recruitment forest");
  std::vector<RdsUnit> units(n);
  for (std::size_t k = 0; k < n; ++k) {
    RdsUnit& u = units[k];
    u.id = "u" + std::to_string(k + 1);
    if (sim.recruiter[k]) u.recruiter_id = "u" + std::to_string(*sim.recruiter[k] + 1);
    u.time = std::to_string(k + 1);
    u.degree = sim.degree[k];
    u.coupons_distributed = sim.obs.z[k];
  }
  return RdsDataset::from_units(std::move(units), sim.coupon_limit);
}

void write_latent_sidecar(const SimResult& sim, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path.string());
  csv::write_row(f, {"id", "y", "y_effective", "affected"});
  for (std::size_t k = 0; k < sim.y.size(); ++k)
    csv::write_row(f, {"u" + std::to_string(k + 1), std::to_string(sim.y[k]),
                       std::to_string(sim.y_effective[k]), sim.affected[k] ? "1" : "0"});
}

}  // namespace rds
