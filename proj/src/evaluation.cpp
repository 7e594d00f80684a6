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


#include "rds_size/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numeric>
#include <ostream>
#include <thread>

#include <nlohmann/json.hpp>

#include "rds_size/csv.hpp"
#include "rds_size/error.hpp"

namespace rds {

namespace {

constexpr std::uint64_t kStreamBounds = 0x626e6473ULL;

std::string fmt(double v, const char* spec = "%.6g") {
  if (!std::isfinite(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

}  // namespace

int default_jobs() {
  if (const char* env = std::getenv("RDS_SIZE_JOBS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
    throw ConfigError("RDS_SIZE_JOBS must be a positive integer");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& body) {
  if (jobs <= 0) jobs = default_jobs();
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), count);
  std::vector<std::exception_ptr> errors(count);
  if (workers <= 1) {
    for (std::size_t k = 0; k < count; ++k) {
      try {
        body(k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t k = next++; k < count; k = next++) {
          try {
            body(k);
          } catch (...) {
            errors[k] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::string to_string(ReplicateStatus s) {
  switch (s) {
    case ReplicateStatus::kOk: return "ok";
    case ReplicateStatus::kInfiniteMle: return "infinite_mle";
    case ReplicateStatus::kVarianceFailure: return "variance_failure";
    case ReplicateStatus::kSimulationError: return "simulation_error";
    case ReplicateStatus::kFitError: return "fit_error";
  }
  return "unknown";
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

ScenarioResult run_scenario(const SimConfig& cfg, const EvalOptions& opts,
                            std::uint64_t scenario_index) {
  cfg.validate();
  if (opts.B < 1) throw ConfigError("B must be >= 1");
  ScenarioResult out;
  out.replicates.resize(static_cast<std::size_t>(opts.B));
  SimConfig base = cfg;
  base.seed = derive_seed(opts.seed, scenario_index, 0);
  const double N = static_cast<double>(cfg.N);

  parallel_for(out.replicates.size(), opts.jobs, [&](std::size_t b) {
    ReplicateRecord& rec = out.replicates[b];
    rec.index = b;
    SimResult sim;
    try {
      sim = simulate_process(base, b);
    } catch (const ConfigError& e) {
      rec.status = ReplicateStatus::kSimulationError;
      rec.message = e.what();
      return;
    }
    rec.coupon_limit = sim.coupon_limit;
    rec.uncensored = sim.obs.uncensored_count();
    double ys = 0.0, es = 0.0;
    for (std::size_t k = 0; k < sim.y.size(); ++k) {
      ys += sim.y[k];
      es += (N - static_cast<double>(k + 1)) * cfg.rho;
    }
    rec.y_mean = ys / static_cast<double>(sim.y.size());
    rec.y_expected = es / static_cast<double>(sim.y.size());
    FitOptions fo = opts.fit;
    if (opts.known_rho) fo.known_rho = cfg.rho;
    try {
      ModelFit fit = fit_mle(sim.obs, fo);
      rec.N_hat = fit.N_hat;
      rec.N_hat_cont = fit.N_hat_cont;
      rec.rho_hat = fit.rho_hat;
      rec.var_N = fit.var_N;
      rec.ci = fit.ci;
      if (fit.infinite_mle) {
        rec.status = ReplicateStatus::kInfiniteMle;
      } else if (!fit.ci) {
        rec.status = ReplicateStatus::kVarianceFailure;
        rec.message = fit.warnings.empty() ? "no interval" : fit.warnings.back();
      } else {
        rec.covered = fit.ci->low <= N && N <= fit.ci->high;
      }
    } catch (const Error& e) {
      rec.status = ReplicateStatus::kFitError;
      rec.message = e.what();
    }
  });

  ScenarioRow& row = out.row;
  row.cfg = cfg;
  row.B = opts.B;
  double sum = 0.0, sq = 0.0, len = 0.0, yrel = 0.0;
  std::size_t covered = 0, hits = 0, ysim = 0;
  for (const auto& r : out.replicates) {
    switch (r.status) {
      case ReplicateStatus::kSimulationError: ++row.simulation_errors; continue;
      case ReplicateStatus::kFitError: ++row.fit_errors; continue;
      case ReplicateStatus::kInfiniteMle: ++row.infinite_mle; break;
      case ReplicateStatus::kVarianceFailure: ++row.variance_failures; break;
      case ReplicateStatus::kOk: break;
    }
    ++ysim;
    yrel += (r.y_mean - r.y_expected) / r.y_expected;
    if (r.status == ReplicateStatus::kInfiniteMle) continue;
    ++row.estimates;
    const double e = static_cast<double>(r.N_hat);
    sum += e;
    sq += (e - N) * (e - N);
    if (r.N_hat == cfg.N) ++hits;
    if (r.status == ReplicateStatus::kOk) {
      ++row.ci_successful;
      len += r.ci->high - r.ci->low;
      if (r.covered) ++covered;
    }
  }
  if (row.estimates == 0)
    throw ModelError("every replicate failed for scenario N=" + std::to_string(cfg.N) +
                     " n=" + std::to_string(cfg.n));
  const double m = static_cast<double>(row.estimates);
  row.mean_N_hat = sum / m;
  row.RB = (row.mean_N_hat - N) / N;
  row.RRMSE = std::sqrt(sq / m) / N;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  row.coverage = row.ci_successful ? static_cast<double>(covered) / row.ci_successful : nan;
  row.RLCI = row.ci_successful ? len / row.ci_successful / N : nan;
  row.exclusion_rate = static_cast<double>(opts.B - row.ci_successful) / opts.B;
  row.RB_y = ysim ? yrel / static_cast<double>(ysim) : nan;
  row.exact_hit_rate = static_cast<double>(hits) / opts.B;
  return out;
}

EvalReport run_grid(const std::string& name, const std::vector<SimConfig>& grid,
                    const EvalOptions& opts) {
  if (grid.empty()) throw ConfigError("evaluation grid is empty");
  EvalReport rep;
  rep.name = name;
  rep.options = opts;
  for (std::size_t s = 0; s < grid.size(); ++s) rep.scenarios.push_back(run_scenario(grid[s], opts, s));
  return rep;
}

EvalReport run_robustness(const SimConfig& base, const std::vector<double>& lambdas,
                          const std::vector<double>& etas, const EvalOptions& opts) {
  std::vector<SimConfig> grid;
  for (double eta : etas) {
    for (double lambda : lambdas) {
      SimConfig c = base;
      c.eta = eta;
      c.lambda = lambda;
      c.validate();
      grid.push_back(c);
    }
  }
  return run_grid("robustness", grid, opts);
}

BoundsExperiment run_bounds_experiment(const SimConfig& cfg, const AnnealConfig& lower,
                                       const AnnealConfig& upper, int replicates,
                                       std::uint64_t seed, int jobs) {
  cfg.validate();
  if (replicates < 1) throw ConfigError("replicates must be >= 1");
  BoundsExperiment ex;
  ex.cfg = cfg;
  ex.lower = lower;
  ex.upper = upper;
  ex.replicates.resize(static_cast<std::size_t>(replicates));
  SimConfig base = cfg;
  base.seed = derive_seed(seed, kStreamBounds, 0);

  parallel_for(ex.replicates.size(), jobs, [&](std::size_t b) {
    BoundsReplicate& rec = ex.replicates[b];
    rec.index = b;
    try {
      SimResult sim = simulate_process(base, b);
      RdsDataset ds = to_dataset(sim);
      AnnealConfig lo = lower, hi = upper;
      lo.seed = derive_seed(seed, kStreamBounds + 1, b);
      hi.seed = derive_seed(seed, kStreamBounds + 2, b);
      BoundsResult r = identification_region(ds, lo, hi, {}, false);
      rec.N_min = r.N_min;
      rec.N_max = r.N_max;
      rec.contains_truth = r.N_min <= cfg.N && cfg.N <= r.N_max;
      try {
        rec.N_hat = fit_mle(sim.obs).N_hat_cont;
      } catch (const Error&) {
        rec.N_hat = std::numeric_limits<double>::quiet_NaN();
      }
      rec.ok = true;
    } catch (const Error& e) {
      rec.message = e.what();
    }
  });

  std::vector<double> lows, highs;
  std::size_t inside = 0;
  for (const auto& r : ex.replicates) {
    if (!r.ok) continue;
    ++ex.successful;
    lows.push_back(static_cast<double>(r.N_min));
    highs.push_back(static_cast<double>(r.N_max));
    if (r.contains_truth) ++inside;
  }
  if (ex.successful == 0) throw ModelError("every bounds replicate failed");
  ex.median_N_min = median(lows);
  ex.median_N_max = median(highs);
  ex.containment_rate = static_cast<double>(inside) / static_cast<double>(ex.successful);
  return ex;
}

std::vector<SimConfig> table1_grid() {
  std::vector<SimConfig> g;
  for (long long N : {5000LL, 10000LL})
    for (int n : {500, 1000})
      for (double alpha : {0.25, 0.50, 0.75}) {
        SimConfig c;
        c.N = N;
        c.n = n;
        c.rho = 0.01;
        c.alpha = alpha;
        g.push_back(c);
      }
  return g;
}

std::vector<std::pair<double, double>> table2_cells() {
  std::vector<std::pair<double, double>> cells;
  for (double eta : {0.10, 0.25})
    for (double lambda : {0.05, 0.10, 0.25, 0.50}) cells.emplace_back(eta, lambda);
  return cells;
}

SimConfig table2_base() {
  SimConfig c;
  c.N = 5000;
  c.n = 500;
  c.rho = 0.01;
  c.alpha = 0.25;
  return c;
}

void write_scenarios_csv(const EvalReport& r, std::ostream& out) {
  csv::write_row(out, {"N", "n", "rho", "alpha", "lambda", "eta", "B", "RB", "RRMSE_pct",
                       "coverage", "RLCI", "estimates", "ci_successful", "infinite_mle",
                       "variance_failures", "simulation_errors", "fit_errors", "exclusion_rate",
                       "mean_N_hat", "RB_ybar", "exact_hit_rate"});
  for (const auto& s : r.scenarios) {
    const ScenarioRow& w = s.row;
    csv::write_row(out, {std::to_string(w.cfg.N), std::to_string(w.cfg.n), fmt(w.cfg.rho),
                         fmt(w.cfg.alpha), fmt(w.cfg.lambda), fmt(w.cfg.eta), std::to_string(w.B),
                         fmt(w.RB), fmt(100.0 * w.RRMSE), fmt(w.coverage), fmt(w.RLCI),
                         std::to_string(w.estimates), std::to_string(w.ci_successful),
                         std::to_string(w.infinite_mle), std::to_string(w.variance_failures),
                         std::to_string(w.simulation_errors), std::to_string(w.fit_errors),
                         fmt(w.exclusion_rate), fmt(w.mean_N_hat), fmt(w.RB_y),
                         fmt(w.exact_hit_rate)});
  }
}

void write_replicates_csv(const EvalReport& r, std::ostream& out) {
  csv::write_row(out, {"scenario", "replicate", "status", "C", "uncensored", "N_hat",
                       "N_hat_cont", "rho_hat", "var_N", "ci_low", "ci_high", "covered"});
  for (std::size_t s = 0; s < r.scenarios.size(); ++s) {
    for (const auto& p : r.scenarios[s].replicates) {
      csv::write_row(out, {std::to_string(s), std::to_string(p.index), to_string(p.status),
                           std::to_string(p.coupon_limit), std::to_string(p.uncensored),
                           std::to_string(p.N_hat), fmt(p.N_hat_cont, "%.10g"),
                           fmt(p.rho_hat, "%.10g"), p.var_N ? fmt(*p.var_N, "%.10g") : "NA",
                           p.ci ? fmt(p.ci->low, "%.10g") : "NA",
                           p.ci ? fmt(p.ci->high, "%.10g") : "NA", p.covered ? "1" : "0"});
    }
  }
}

nlohmann::json report_to_json(const EvalReport& r, bool with_replicates) {
  nlohmann::json j;
  j["name"] = r.name;
  j["B"] = r.options.B;
  j["seed"] = r.options.seed;
  j["known_rho"] = r.options.known_rho;
  j["conventions"] = {
      {"RB_RRMSE", "computed over replicates with a finite MLE"},
      {"coverage_RLCI", "computed over replicates with a finite MLE and a confidence interval"},
      {"RRMSE_units", "fraction of N (CSV and markdown report percent)"}};
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& s : r.scenarios) {
    const ScenarioRow& w = s.row;
    nlohmann::json cfg;
    to_json(cfg, w.cfg);
    nlohmann::json row = {{"config", cfg},
                          {"RB", num(w.RB)},
                          {"RRMSE", num(w.RRMSE)},
                          {"coverage", num(w.coverage)},
                          {"RLCI", num(w.RLCI)},
                          {"estimates", w.estimates},
                          {"ci_successful", w.ci_successful},
                          {"infinite_mle", w.infinite_mle},
                          {"variance_failures", w.variance_failures},
                          {"simulation_errors", w.simulation_errors},
                          {"fit_errors", w.fit_errors},
                          {"exclusion_rate", w.exclusion_rate},
                          {"mean_N_hat", num(w.mean_N_hat)},
                          {"RB_ybar", num(w.RB_y)},
                          {"exact_hit_rate", w.exact_hit_rate}};
    if (with_replicates) {
      nlohmann::json reps = nlohmann::json::array();
      for (const auto& p : s.replicates) {
        reps.push_back({{"replicate", p.index},
                        {"status", to_string(p.status)},
                        {"C", p.coupon_limit},
                        {"uncensored", p.uncensored},
                        {"N_hat", p.N_hat},
                        {"N_hat_cont", num(p.N_hat_cont)},
                        {"rho_hat", num(p.rho_hat)},
                        {"var_N", p.var_N ? num(*p.var_N) : nlohmann::json()},
                        {"ci", p.ci ? nlohmann::json::array({p.ci->low, p.ci->high})
                                    : nlohmann::json()},
                        {"covered", p.covered},
                        {"message", p.message}});
      }
      row["replicates"] = std::move(reps);
    }
    rows.push_back(std::move(row));
  }
  j["scenarios"] = std::move(rows);
  return j;
}

void write_markdown(const EvalReport& r, std::ostream& out) {
  out << "## " << r.name << " (B = " << r.options.B << ", seed = " << r.options.seed << ")\n\n";
  out << "RB and RRMSE use replicates with a finite MLE. Coverage and RLCI use replicates "
         "that also produced a confidence interval. RRMSE is in percent.\n\n";
  out << "| N | n | alpha | eta | lambda | RB | RRMSE | 95% Cov. | RLCI | excluded |\n";
  out << "|---|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& s : r.scenarios) {
    const ScenarioRow& w = s.row;
    out << "| " << w.cfg.N << " | " << w.cfg.n << " | " << fmt(100 * w.cfg.alpha, "%.0f") << "% | "
        << fmt(100 * w.cfg.eta, "%.0f") << "% | " << fmt(100 * w.cfg.lambda, "%.0f") << "% | "
        << fmt(w.RB, "%.2f") << " | " << fmt(100 * w.RRMSE, "%.2f") << " | "
        << fmt(w.coverage, "%.2f") << " | " << fmt(w.RLCI, "%.2f") << " | "
        << (w.B - w.ci_successful) << " |\n";
  }
}

nlohmann::json bounds_experiment_to_json(const BoundsExperiment& e) {
  nlohmann::json cfg, lo, hi;
  to_json(cfg, e.cfg);
  to_json(lo, e.lower);
  to_json(hi, e.upper);
  nlohmann::json reps = nlohmann::json::array();
  for (const auto& r : e.replicates)
    reps.push_back({{"replicate", r.index},
                    {"ok", r.ok},
                    {"N_min", r.N_min},
                    {"N_max", r.N_max},
                    {"contains_truth", r.contains_truth},
                    {"N_hat", num(r.N_hat)},
                    {"message", r.message}});
  return {{"config", cfg},
          {"lower", lo},
          {"upper", hi},
          {"median_N_min", num(e.median_N_min)},
          {"median_N_max", num(e.median_N_max)},
          {"containment_rate", e.containment_rate},
          {"successful", e.successful},
          {"replicates", reps}};
}

void write_bounds_experiment_csv(const BoundsExperiment& e, std::ostream& out) {
  csv::write_row(out, {"replicate", "ok", "N_min", "N_max", "contains_truth", "N_hat"});
  for (const auto& r : e.replicates)
    csv::write_row(out, {std::to_string(r.index), r.ok ? "1" : "0", std::to_string(r.N_min),
                         std::to_string(r.N_max), r.contains_truth ? "1" : "0",
                         fmt(r.N_hat, "%.10g")});
}

void write_bounds_markdown(const BoundsExperiment& e, std::ostream& out) {
  out << "## Identification region (N = " << e.cfg.N << ", n = " << e.cfg.n
      << ", rho = " << fmt(e.cfg.rho) << ", " << e.replicates.size() << " runs)\n\n";
  out << "| statistic | value |\n|---|---|\n";
  out << "| median N_min | " << fmt(e.median_N_min, "%.0f") << " |\n";
  out << "| median N_max | " << fmt(e.median_N_max, "%.0f") << " |\n";
  out << "| contains N | " << fmt(e.containment_rate, "%.2f") << " |\n";
  out << "| successful runs | " << e.successful << " |\n";
}

}  // namespace rds
