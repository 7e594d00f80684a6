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


// rds_size: population size estimation from respondent-driven samples.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "manifest.hpp"
#include "rds_size/bounds.hpp"
#include "rds_size/dataset.hpp"
#include "rds_size/error.hpp"
#include "rds_size/estimation.hpp"
#include "rds_size/evaluation.hpp"
#include "rds_size/simulation.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitUseBounds = 3;
constexpr int kExitInfinite = 4;
constexpr int kExitInternal = 5;
constexpr int kSchemaVersion = 1;

// A flag that can also come from the config file. Flags win over the file,
// the file over built-in defaults.
struct Param {
  std::string key;
  CLI::App* owner = nullptr;
  CLI::Option* opt = nullptr;
  std::function<void(const json&)> set;
  std::function<json()> get;
};

class Params {
 public:
  template <class T>
  CLI::Option* add(CLI::App* app, const std::string& name, T& var, const std::string& desc,
                   const std::string& short_name = "") {
    const std::string flags = short_name.empty() ? "--" + name : short_name + ",--" + name;
    CLI::Option* o = app->add_option(flags, var, desc);
    push(app, name, o, var);
    return o;
  }
  CLI::Option* flag(CLI::App* app, const std::string& name, bool& var, const std::string& desc) {
    CLI::Option* o = app->add_flag("--" + name, var, desc);
    push(app, name, o, var);
    return o;
  }

  /// Entries owned by `app`, for the config file and the manifest.
  std::vector<Param*> of(const CLI::App* app) {
    std::vector<Param*> out;
    for (auto& p : params_)
      if (p.owner == app) out.push_back(&p);
    return out;
  }

 private:
  static std::string key_of(const std::string& name) {
    std::string k = name;
    for (char& c : k)
      if (c == '-') c = '_';
    return k;
  }

  template <class T>
  void push(CLI::App* app, const std::string& name, CLI::Option* o, T& var) {
    Param p;
    p.key = key_of(name);
    p.owner = app;
    p.opt = o;
    p.set = [&var](const json& v) {
      if constexpr (requires { typename T::value_type; } && !std::is_same_v<T, std::string>) {
        if (v.is_null()) var.reset();
        else var = v.get<typename T::value_type>();
      } else {
        var = v.get<T>();
      }
    };
    p.get = [&var]() -> json {
      if constexpr (requires { typename T::value_type; } && !std::is_same_v<T, std::string>) {
        return var ? json(*var) : json(nullptr);
      } else {
        return json(var);
      }
    };
    params_.push_back(std::move(p));
  }

  std::vector<Param> params_;
};

json resolved(Params& ps, const CLI::App* global, const CLI::App* sub) {
  json j = json::object();
  for (Param* p : ps.of(global)) j[p->key] = p->get();
  for (Param* p : ps.of(sub)) j[p->key] = p->get();
  return j;
}

void apply_config(const fs::path& path, Params& ps, const CLI::App* global, const CLI::App* sub) {
  std::ifstream in(path);
  if (!in) throw rds::InputError("cannot open config file " + path.string());
  json cfg;
  try {
    in >> cfg;
  } catch (const json::exception& e) {
    throw rds::ConfigError("config file " + path.string() + ": " + e.what());
  }
  if (!cfg.is_object()) throw rds::ConfigError("config file must hold a JSON object");
  auto apply = [&](const json& section, const std::vector<Param*>& params, bool allow_sections) {
    for (const auto& [key, value] : section.items()) {
      if (allow_sections && value.is_object()) continue;  // another subcommand's section
      Param* hit = nullptr;
      for (Param* p : params)
        if (p->key == key) hit = p;
      if (!hit) {
        if (allow_sections) {
          bool elsewhere = false;
          for (Param* p : ps.of(sub))
            if (p->key == key) elsewhere = true;
          if (elsewhere) continue;
          if (key == "scenarios") continue;
        }
        throw rds::ConfigError("unknown config key '" + key + "'");
      }
      if (hit->opt->count() > 0) continue;
      try {
        hit->set(value);
      } catch (const json::exception& e) {
        throw rds::ConfigError("config key '" + key + "': " + e.what());
      }
    }
  };
  // Top-level keys may name global options or options of the active
  // subcommand; a section named after the subcommand is applied last.
  std::vector<Param*> top = ps.of(global);
  for (Param* p : ps.of(sub)) top.push_back(p);
  apply(cfg, top, true);
  if (cfg.contains(sub->get_name())) {
    const json& s = cfg[sub->get_name()];
    if (!s.is_object()) throw rds::ConfigError("config section must be an object");
    json plain = json::object();
    for (const auto& [k, v] : s.items())
      if (k != "scenarios") plain[k] = v;
    apply(plain, ps.of(sub), false);
  }
}

json load_config_scenarios(const fs::path& path, const std::string& sub) {
  std::ifstream in(path);
  json cfg;
  in >> cfg;
  if (cfg.contains(sub) && cfg[sub].contains("scenarios")) return cfg[sub]["scenarios"];
  if (cfg.contains("scenarios")) return cfg["scenarios"];
  return json();
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw rds::InputError("cannot write " + path.string());
  f << j.dump(2) << '\n';
}

fs::path prepare_dir(const std::string& out) {
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw rds::InputError("cannot create output directory " + out + ": " + ec.message());
  return dir;
}

struct DataArgs {
  std::string data;
  std::optional<int> coupon_limit;
  std::string coupon_limit_file;
  bool allow_degree_deficit = false;
  bool fallback_recruit_count = false;
};

void add_data_args(Params& ps, CLI::App* app, DataArgs& a) {
  ps.add(app, "data", a.data, "survey CSV (id,recruiter_id,time,degree,coupons_distributed)");
  ps.add(app, "coupon-limit", a.coupon_limit, "coupon limit C (else read from the sidecar)");
  ps.add(app, "coupon-limit-file", a.coupon_limit_file,
         "JSON sidecar with coupon_limit (default: <data>.coupon_limit.json)");
  ps.flag(app, "allow-degree-deficit", a.allow_degree_deficit,
          "warn instead of failing when a degree is below the recruit count");
  ps.flag(app, "fallback-recruit-count", a.fallback_recruit_count,
          "use the observed recruit count where coupons_distributed is missing");
}

rds::RdsDataset load_data(const DataArgs& a, rds::cli::Manifest* m, int& C) {
  if (a.data.empty()) throw rds::ConfigError("--data is required");
  const fs::path data(a.data);
  if (a.coupon_limit) {
    C = *a.coupon_limit;
  } else {
    fs::path side = a.coupon_limit_file.empty() ? fs::path(data).replace_extension(".coupon_limit.json")
                                                : fs::path(a.coupon_limit_file);
    if (!fs::exists(side))
      throw rds::ConfigError("no coupon limit: pass --coupon-limit or provide " + side.string());
    C = rds::read_coupon_limit_sidecar(side);
    if (m) m->add_input(side);
  }
  rds::IngestOptions io;
  io.allow_degree_deficit = a.allow_degree_deficit;
  rds::RdsDataset ds = rds::ingest(data, C, io);
  if (m) m->add_input(data);
  for (const auto& w : ds.warnings()) std::cerr << "warning: " << w << '\n';
  return ds;
}

json dataset_summary(const rds::RdsDataset& ds) {
  return {{"n", ds.n()},
          {"coupon_limit", ds.coupon_limit()},
          {"seeds", ds.seed_count()},
          {"recruiter_links", ds.recruiter_link_count()},
          {"max_wave", ds.max_wave()},
          {"warnings", ds.warnings()}};
}

struct AnnealArgs {
  long long iterations = 0;
  int sweeps = 100;
  double lower_epsilon = 2.2;
  double lower_nu = 1.5;
  double upper_epsilon = 1.2;
  double upper_nu = 0.5;
  double N0 = 1e5;
  double schedule_epsilon = 0.0;
  double objective_scale = 1.0;
};

void add_anneal_args(Params& ps, CLI::App* app, AnnealArgs& a) {
  ps.add(app, "iterations", a.iterations, "moves per direction (overrides --sweeps)");
  ps.add(app, "sweeps", a.sweeps, "sweeps of n moves per direction");
  ps.add(app, "lower-epsilon", a.lower_epsilon, "objective offset for the lower bound");
  ps.add(app, "lower-nu", a.lower_nu, "exponent for the lower bound (>= 1)");
  ps.add(app, "upper-epsilon", a.upper_epsilon, "objective offset for the upper bound");
  ps.add(app, "upper-nu", a.upper_nu, "exponent for the upper bound (>= 1/2)");
  ps.add(app, "N0", a.N0, "largest admissible N");
  ps.add(app, "schedule-epsilon", a.schedule_epsilon, "cooling constant (0: the epsilon)");
  ps.add(app, "objective-scale", a.objective_scale, "R(N) = scale * exp(S(N))");
}

std::pair<rds::AnnealConfig, rds::AnnealConfig> anneal_configs(const AnnealArgs& a,
                                                               std::uint64_t seed) {
  rds::AnnealConfig lo = rds::AnnealConfig::lower_defaults();
  rds::AnnealConfig hi = rds::AnnealConfig::upper_defaults();
  for (rds::AnnealConfig* c : {&lo, &hi}) {
    c->iterations = a.iterations;
    c->sweeps = a.sweeps;
    c->N0 = a.N0;
    c->schedule_epsilon = a.schedule_epsilon;
    c->objective_scale = a.objective_scale;
    c->seed = seed;
  }
  lo.epsilon = a.lower_epsilon;
  lo.nu = a.lower_nu;
  hi.epsilon = a.upper_epsilon;
  hi.nu = a.upper_nu;
  return {lo, hi};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Population size estimation from respondent-driven samples"};
  app.set_version_flag("--version", RDS_SIZE_VERSION);
  app.require_subcommand(1);
  app.fallthrough();
  Params ps;

  std::string config_path;
  int jobs = 0;
  app.add_option("--config", config_path, "JSON config file (flags take precedence)");
  ps.add(&app, "jobs", jobs, "worker threads (default: RDS_SIZE_JOBS or all cores)");

  // simulate
  CLI::App* sim = app.add_subcommand("simulate", "draw a synthetic survey");
  std::optional<long long> simN;
  rds::SimConfig sc;
  bool oracle = false, fixed_affected = false;
  std::string sim_out;
  std::optional<int> sim_C;
  ps.add(sim, "N", simN, "population size");
  ps.add(sim, "n", sc.n, "sample size");
  ps.add(sim, "rho", sc.rho, "edge probability");
  ps.add(sim, "alpha", sc.alpha, "quantile level that sets the coupon limit");
  ps.add(sim, "coupon-limit", sim_C, "explicit coupon limit");
  ps.add(sim, "lambda", sc.lambda, "share of unrecruited neighbours unavailable");
  ps.add(sim, "eta", sc.eta, "share of recruiters affected by lambda");
  ps.add(sim, "seed", sc.seed, "random seed");
  ps.flag(sim, "oracle", oracle, "use the explicit random-graph simulator (N <= 20000)");
  ps.flag(sim, "fixed-affected", fixed_affected, "draw the affected recruiters from the seed only");
  ps.add(sim, "out", sim_out, "output directory", "-o");

  // estimate / diagnose
  CLI::App* est = app.add_subcommand("estimate", "fit the censored-binomial MLE");
  DataArgs est_data;
  std::optional<double> known_rho;
  double cap_factor = 100.0, level = 0.95, threshold = 0.02;
  std::string est_out;
  add_data_args(ps, est, est_data);
  ps.add(est, "known-rho", known_rho, "fix rho at this value");
  ps.add(est, "cap-factor", cap_factor, "search limit for N as a multiple of n");
  ps.add(est, "level", level, "confidence level");
  ps.add(est, "threshold", threshold, "violation share that triggers USE_BOUNDS");
  ps.add(est, "out", est_out, "output directory (default: print to stdout)", "-o");

  CLI::App* dia = app.add_subcommand("diagnose", "check the coupon-policy assumptions");
  DataArgs dia_data;
  double dia_threshold = 0.02;
  std::string dia_out;
  add_data_args(ps, dia, dia_data);
  ps.add(dia, "threshold", dia_threshold, "violation share that triggers USE_BOUNDS");
  ps.add(dia, "out", dia_out, "output directory (default: print to stdout)", "-o");

  // bounds
  CLI::App* bnd = app.add_subcommand("bounds", "identification region by simulated annealing");
  DataArgs bnd_data;
  AnnealArgs bnd_anneal;
  bool hypothetical = false, no_trace_json = false;
  std::uint64_t bnd_seed = 1;
  std::string bnd_out;
  add_data_args(ps, bnd, bnd_data);
  add_anneal_args(ps, bnd, bnd_anneal);
  ps.flag(bnd, "hypothetical", hypothetical, "relax the lower limits to the reported coupons");
  ps.flag(bnd, "no-trace-json", no_trace_json, "omit traces from bounds.json (CSV still written)");
  ps.add(bnd, "seed", bnd_seed, "random seed");
  ps.add(bnd, "out", bnd_out, "output directory", "-o");

  // evaluate
  CLI::App* ev = app.add_subcommand("evaluate", "Monte Carlo evaluation");
  std::string preset = "table1";
  int B = 1000, runs = 10;
  bool quick = false, ev_known_rho = false;
  std::uint64_t ev_seed = 20240101;
  std::string ev_out;
  AnnealArgs ev_anneal;
  ps.add(ev, "preset", preset, "table1, table2, figure2 or custom (scenarios from --config)")
      ->check(CLI::IsMember({"table1", "table2", "figure2", "custom"}));
  ps.add(ev, "B", B, "replicates per scenario");
  ps.add(ev, "runs", runs, "annealing runs for figure2");
  ps.flag(ev, "quick", quick, "B = 100 (figure2: 3 runs)");
  ps.flag(ev, "known-rho", ev_known_rho, "fit with rho fixed at its true value");
  ps.add(ev, "seed", ev_seed, "master seed");
  ps.add(ev, "out", ev_out, "output directory", "-o");
  add_anneal_args(ps, ev, ev_anneal);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  CLI::App* active = app.get_subcommands().front();
  std::vector<std::string> args(argv, argv + argc);
  rds::cli::Manifest manifest(active->get_name(), args);

  try {
    if (!config_path.empty()) {
      apply_config(config_path, ps, &app, active);
      manifest.add_input(config_path);
    }
    if (jobs < 0) throw rds::ConfigError("--jobs must be positive");
    if (jobs == 0) jobs = rds::default_jobs();
    manifest.set_config(resolved(ps, &app, active));

    if (active == sim) {
      if (!simN) throw rds::ConfigError("--N is required");
      if (sim_out.empty()) throw rds::ConfigError("--out is required");
      sc.N = *simN;
      sc.coupon_limit_override = sim_C;
      sc.resample_affected = !fixed_affected;
      rds::SimResult r = oracle ? rds::simulate_graph_oracle(sc) : rds::simulate_process(sc);
      const fs::path dir = prepare_dir(sim_out);
      rds::RdsDataset ds = rds::to_dataset(r);
      rds::export_csv(ds, dir / "dataset.csv");
      rds::write_coupon_limit_sidecar(dir / "dataset.coupon_limit.json", r.coupon_limit);
      rds::write_latent_sidecar(r, dir / "latent.csv");
      json cfg;
      rds::to_json(cfg, sc);
      write_json(dir / "simulation.json",
                 {{"schema_version", kSchemaVersion},
                  {"generator", oracle ? "graph_oracle" : "process"},
                  {"config", cfg},
                  {"coupon_limit", r.coupon_limit},
                  {"n", r.obs.n()},
                  {"uncensored", r.obs.uncensored_count()},
                  {"affected", std::count(r.affected.begin(), r.affected.end(), 1)}});
      manifest.add_seed("seed", sc.seed);
      manifest.write(dir);
      std::cout << "wrote " << r.obs.n() << " units (C = " << r.coupon_limit << ", "
                << r.obs.uncensored_count() << " uncensored) to " << dir.string() << '\n';
      return kExitOk;
    }

    if (active == est || active == dia) {
      const bool is_est = active == est;
      const DataArgs& da = is_est ? est_data : dia_data;
      int C = 0;
      rds::RdsDataset ds = load_data(da, &manifest, C);
      rds::DiagnoseOptions dopt;
      dopt.threshold = is_est ? threshold : dia_threshold;
      dopt.censor.fallback_recruit_count = da.fallback_recruit_count;
      rds::ViolationReport vr = rds::diagnose_violations(ds, dopt);
      json vj;
      rds::to_json(vj, vr);
      vj["schema_version"] = kSchemaVersion;
      vj["dataset"] = dataset_summary(ds);
      const std::string& out = is_est ? est_out : dia_out;
      int code = vr.recommendation == rds::Recommendation::kUseBounds ? kExitUseBounds : kExitOk;

      json fj;
      if (is_est) {
        rds::DerivedObservations d = rds::derive_censored(ds, dopt.censor);
        rds::FitOptions fo;
        fo.cap_factor = cap_factor;
        fo.known_rho = known_rho;
        fo.level = level;
        rds::ModelFit fit = rds::fit_mle(d.obs, fo);
        rds::to_json(fj, fit);
        fj["schema_version"] = kSchemaVersion;
        fj["dataset"] = dataset_summary(ds);
        fj["fallback_units"] = d.fallback_units;
        fj["recommendation"] = rds::to_string(vr.recommendation);
        if (fit.infinite_mle) code = kExitInfinite;
        std::cerr << "N_hat = " << fit.N_hat;
        if (fit.ci) std::cerr << ", " << 100 * level << "% CI [" << fit.ci->low << ", " << fit.ci->high << "]";
        if (fit.infinite_mle) std::cerr << " (infinite MLE)";
        std::cerr << "; " << rds::to_string(vr.recommendation) << '\n';
      } else {
        std::cerr << vr.a4_violations.size() << " A4 and " << vr.a5_violations.size()
                  << " A5 violations; " << rds::to_string(vr.recommendation) << '\n';
      }

      if (out.empty()) {
        std::cout << (is_est ? json{{"fit", fj}, {"violations", vj}} : vj).dump(2) << '\n';
      } else {
        const fs::path dir = prepare_dir(out);
        if (is_est) write_json(dir / "fit.json", fj);
        write_json(dir / "violations.json", vj);
        manifest.write(dir);
      }
      return code;
    }

    if (active == bnd) {
      if (bnd_out.empty()) throw rds::ConfigError("--out is required");
      int C = 0;
      rds::RdsDataset ds = load_data(bnd_data, &manifest, C);
      auto [lo, hi] = anneal_configs(bnd_anneal, bnd_seed);
      rds::BoundsOptions bo;
      bo.hypothetical_mode = hypothetical;
      bo.censor.fallback_recruit_count = bnd_data.fallback_recruit_count;
      lo.validate(ds.n());
      hi.validate(ds.n());
      rds::BoundsResult r = rds::identification_region(ds, lo, hi, bo, jobs != 1);
      const fs::path dir = prepare_dir(bnd_out);
      json j = rds::bounds_to_json(r, !no_trace_json);
      j["schema_version"] = kSchemaVersion;
      json lj, hj;
      rds::to_json(lj, lo);
      rds::to_json(hj, hi);
      j["config"] = {{"lower", lj}, {"upper", hj}};
      j["dataset"] = dataset_summary(ds);
      write_json(dir / "bounds.json", j);
      std::ofstream tf(dir / "trace.csv");
      rds::write_trace_csv(r, tf);
      tf.close();
      manifest.add_seed("seed", bnd_seed);
      manifest.write(dir);
      std::cout << "identification region [" << r.N_min << ", " << r.N_max << "]\n";
      return kExitOk;
    }

    if (active == ev) {
      if (ev_out.empty()) throw rds::ConfigError("--out is required");
      if (quick && ev->get_option("--B")->count() == 0) B = 100;
      if (quick && ev->get_option("--runs")->count() == 0) runs = 3;
      rds::EvalOptions eo;
      eo.B = B;
      eo.seed = ev_seed;
      eo.jobs = jobs;
      eo.known_rho = ev_known_rho;
      const fs::path dir = prepare_dir(ev_out);
      manifest.add_seed("seed", ev_seed);

      if (preset == "figure2") {
        rds::SimConfig cfg = rds::table2_base();
        auto [lo, hi] = anneal_configs(ev_anneal, ev_seed);
        rds::BoundsExperiment ex = rds::run_bounds_experiment(cfg, lo, hi, runs, ev_seed, jobs);
        json j = rds::bounds_experiment_to_json(ex);
        j["schema_version"] = kSchemaVersion;
        write_json(dir / "report.json", j);
        std::ofstream c(dir / "runs.csv");
        rds::write_bounds_experiment_csv(ex, c);
        c.close();
        std::ofstream md(dir / "report.md");
        rds::write_bounds_markdown(ex, md);
        md.close();
        rds::write_bounds_markdown(ex, std::cout);
      } else {
        rds::EvalReport rep;
        if (preset == "table1") {
          rep = rds::run_grid("table1", rds::table1_grid(), eo);
        } else if (preset == "table2") {
          std::vector<rds::SimConfig> grid;
          for (auto [eta, lambda] : rds::table2_cells()) {
            rds::SimConfig c = rds::table2_base();
            c.eta = eta;
            c.lambda = lambda;
            grid.push_back(c);
          }
          rep = rds::run_grid("table2", grid, eo);
        } else {
          if (config_path.empty()) throw rds::ConfigError("preset custom needs --config with scenarios");
          json list = load_config_scenarios(config_path, "evaluate");
          if (!list.is_array() || list.empty())
            throw rds::ConfigError("config must hold a non-empty 'scenarios' array");
          std::vector<rds::SimConfig> grid;
          for (const auto& s : list) grid.push_back(rds::sim_config_from_json(s));
          rep = rds::run_grid("custom", grid, eo);
        }
        json j = rds::report_to_json(rep, true);
        j["schema_version"] = kSchemaVersion;
        write_json(dir / "report.json", j);
        std::ofstream c(dir / "scenarios.csv");
        rds::write_scenarios_csv(rep, c);
        c.close();
        std::ofstream rc(dir / "replicates.csv");
        rds::write_replicates_csv(rep, rc);
        rc.close();
        std::ofstream md(dir / "report.md");
        rds::write_markdown(rep, md);
        md.close();
        rds::write_markdown(rep, std::cout);
      }
      manifest.write(dir);
      return kExitOk;
    }
  } catch (const rds::InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const rds::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}
