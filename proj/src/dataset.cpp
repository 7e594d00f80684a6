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

#include "rds_size/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rds_size/csv.hpp"
#include "rds_size/error.hpp"

namespace rds {

namespace {

std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<long long> parse_int(const std::string& s) {
  if (s.empty()) return std::nullopt;
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string line_prefix(const std::vector<std::size_t>& lines, std::size_t k) {
  if (lines.empty()) return {};
  return "line " + std::to_string(lines[k]) + ": ";
}

}  // namespace

namespace detail {

RdsDataset build_dataset(std::vector<RdsUnit> units, int coupon_limit,
                         const IngestOptions& opts,
                         std::vector<std::size_t> lines) {
  if (coupon_limit < 1) throw InputError("coupon limit must be a positive integer");
  if (units.empty()) throw InputError("dataset has no units");
  const std::size_t n = units.size();

  RdsDataset ds;
  {
    std::unordered_map<std::string, std::size_t> seen;
    for (std::size_t k = 0; k < n; ++k) {
      const auto& u = units[k];
      if (u.id.empty()) throw InputError(line_prefix(lines, k) + "empty unit id");
      if (!seen.emplace(u.id, k).second)
        throw InputError(line_prefix(lines, k) + "duplicate id '" + u.id + "'");
      if (u.degree < 1)
        throw InputError(line_prefix(lines, k) + "unit '" + u.id +
                         "' has nonpositive degree " + std::to_string(u.degree));
      if (u.coupons_distributed) {
        int c = *u.coupons_distributed;
        if (c < 0 || c > coupon_limit)
          throw InputError(line_prefix(lines, k) + "unit '" + u.id +
                           "' reports " + std::to_string(c) +
                           " distributed coupons outside [0, C=" +
                           std::to_string(coupon_limit) + "]");
      }
    }
  }

  // Order by time; numeric when every timestamp parses as a number.
  std::vector<std::optional<double>> tnum(n);
  bool numeric = true;
  for (std::size_t k = 0; k < n; ++k) {
    tnum[k] = parse_double(units[k].time);
    if (!tnum[k]) numeric = false;
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  auto less = [&](std::size_t a, std::size_t b) {
    return numeric ? *tnum[a] < *tnum[b] : units[a].time < units[b].time;
  };
  std::stable_sort(perm.begin(), perm.end(), less);

  for (std::size_t k = 1; k < n; ++k) {
    if (!less(perm[k - 1], perm[k]))
      ds.warnings_.push_back("tied recruitment time '" + units[perm[k]].time +
                             "' for units '" + units[perm[k - 1]].id + "' and '" +
                             units[perm[k]].id + "'; broken by file order");
  }
  std::vector<RdsUnit> sorted;
  std::vector<std::size_t> sorted_lines;
  sorted.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    sorted.push_back(std::move(units[perm[k]]));
    if (!lines.empty()) sorted_lines.push_back(lines[perm[k]]);
  }

  ds.units_ = std::move(sorted);
  ds.coupon_limit_ = coupon_limit;
  ds.numeric_time_ = numeric;
  for (std::size_t k = 0; k < n; ++k) ds.index_.emplace(ds.units_[k].id, k);

  ds.recruiter_.assign(n, std::nullopt);
  ds.recruits_.assign(n, 0);
  ds.waves_.assign(n, 0);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& u = ds.units_[k];
    if (u.is_seed()) continue;
    auto it = ds.index_.find(*u.recruiter_id);
    if (it == ds.index_.end())
      throw InputError(line_prefix(sorted_lines, k) + "recruiter id '" +
                       *u.recruiter_id + "' of unit '" + u.id + "' not found");
    if (it->second >= k)
      throw InputError(line_prefix(sorted_lines, k) +
                       "temporal order violated: recruiter '" + *u.recruiter_id +
                       "' recruited at or after its recruit '" + u.id + "'");
    ds.recruiter_[k] = it->second;
    ds.recruits_[it->second] += 1;
    ds.waves_[k] = ds.waves_[it->second] + 1;
  }
  for (std::size_t k = 0; k < n; ++k) {
    const auto& u = ds.units_[k];
    if (ds.recruits_[k] > coupon_limit)
      throw InputError(line_prefix(sorted_lines, k) + "unit '" + u.id +
                       "' has " + std::to_string(ds.recruits_[k]) +
                       " recruits, exceeding the coupon limit " +
                       std::to_string(coupon_limit));
    int needed = ds.recruits_[k] + (u.is_seed() ? 0 : 1);
    if (u.degree < needed) {
      std::string msg = "unit '" + u.id + "' reports degree " +
                        std::to_string(u.degree) + " but has " +
                        std::to_string(needed) + " observed ties";
      if (!opts.allow_degree_deficit)
        throw InputError(line_prefix(sorted_lines, k) + msg);
      ds.warnings_.push_back(msg);
    }
  }
  return ds;
}

}  // namespace detail

RdsDataset RdsDataset::from_units(std::vector<RdsUnit> units, int coupon_limit,
                                  const IngestOptions& opts) {
  return detail::build_dataset(std::move(units), coupon_limit, opts, {});
}

int RdsDataset::max_wave() const {
  return waves_.empty() ? 0 : *std::max_element(waves_.begin(), waves_.end());
}

std::size_t RdsDataset::seed_count() const {
  return static_cast<std::size_t>(std::count_if(
      units_.begin(), units_.end(), [](const RdsUnit& u) { return u.is_seed(); }));
}

bool RdsDataset::has_all_coupons() const {
  return std::all_of(units_.begin(), units_.end(), [](const RdsUnit& u) {
    return u.coupons_distributed.has_value();
  });
}

std::optional<std::size_t> RdsDataset::find(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

RdsDataset ingest(std::istream& in, int coupon_limit, const IngestOptions& opts) {
  csv::Table t = csv::parse(in);
  auto col = [&](const std::string& name) -> std::optional<std::size_t> {
    auto it = std::find(t.header.begin(), t.header.end(), name);
    if (it == t.header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - t.header.begin());
  };
  auto c_id = col("id"), c_rec = col("recruiter_id"), c_time = col("time"),
       c_deg = col("degree"), c_cpn = col("coupons_distributed");
  for (auto [name, c] : {std::pair{"id", c_id}, {"recruiter_id", c_rec},
                         {"time", c_time}, {"degree", c_deg}}) {
    if (!c) throw InputError(std::string("missing required column '") + name + "'", 1);
  }

  std::vector<RdsUnit> units;
  units.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::size_t line = t.lines[r];
    if (row.size() != t.header.size())
      throw InputError("malformed row: expected " + std::to_string(t.header.size()) +
                           " fields, found " + std::to_string(row.size()),
                       line);
    RdsUnit u;
    u.id = row[*c_id];
    if (!row[*c_rec].empty()) u.recruiter_id = row[*c_rec];
    u.time = row[*c_time];
    if (u.time.empty()) throw InputError("malformed row: empty time", line);
    auto d = parse_int(row[*c_deg]);
    if (!d) throw InputError("malformed row: degree '" + row[*c_deg] + "' is not an integer", line);
    if (*d < 1) throw InputError("nonpositive degree " + row[*c_deg] + " for unit '" + u.id + "'", line);
    u.degree = static_cast<int>(*d);
    if (c_cpn && !row[*c_cpn].empty()) {
      auto c = parse_int(row[*c_cpn]);
      if (!c)
        throw InputError("malformed row: coupons_distributed '" + row[*c_cpn] +
                             "' is not an integer",
                         line);
      u.coupons_distributed = static_cast<int>(*c);
    }
    units.push_back(std::move(u));
  }
  return detail::build_dataset(std::move(units), coupon_limit, opts, t.lines);
}

RdsDataset ingest(const std::filesystem::path& path, int coupon_limit,
                  const IngestOptions& opts) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  return ingest(in, coupon_limit, opts);
}

int read_coupon_limit_sidecar(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open sidecar '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("sidecar '" + path.string() + "': " + e.what());
  }
  if (!j.contains("coupon_limit") || !j["coupon_limit"].is_number_integer())
    throw InputError("sidecar '" + path.string() + "' lacks integer 'coupon_limit'");
  return j["coupon_limit"].get<int>();
}

void write_coupon_limit_sidecar(const std::filesystem::path& path, int coupon_limit) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << nlohmann::json{{"coupon_limit", coupon_limit}}.dump(2) << '\n';
}

void export_csv(const RdsDataset& ds, std::ostream& out) {
  csv::write_row(out, {"id", "recruiter_id", "time", "degree", "coupons_distributed"});
  for (const auto& u : ds.units()) {
    csv::write_row(out, {u.id, u.recruiter_id.value_or(""), u.time,
                         std::to_string(u.degree),
                         u.coupons_distributed ? std::to_string(*u.coupons_distributed)
                                               : std::string()});
  }
}

void export_csv(const RdsDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  export_csv(ds, out);
}

CensoredObservations CensoredObservations::make(std::vector<int> z, int coupon_limit) {
  std::vector<int> delta(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) delta[k] = z[k] < coupon_limit ? 1 : 0;
  return make(std::move(z), std::move(delta), coupon_limit);
}

CensoredObservations CensoredObservations::make(std::vector<int> z,
                                                std::vector<int> delta,
                                                int coupon_limit) {
  if (coupon_limit < 1) throw InputError("coupon limit must be positive");
  if (z.size() != delta.size()) throw InputError("z and delta lengths differ");
  for (std::size_t k = 0; k < z.size(); ++k) {
    if (z[k] < 0 || z[k] > coupon_limit)
      throw InputError("z[" + std::to_string(k) + "] outside [0, C]");
    if (delta[k] != (z[k] < coupon_limit ? 1 : 0))
      throw InputError("delta[" + std::to_string(k) + "] inconsistent with z");
  }
  CensoredObservations o;
  o.z = std::move(z);
  o.delta = std::move(delta);
  o.coupon_limit = coupon_limit;
  return o;
}

int CensoredObservations::uncensored_count() const {
  return std::accumulate(delta.begin(), delta.end(), 0);
}

std::vector<int> effective_coupons(const RdsDataset& ds, const CensorOptions& opts) {
  std::vector<int> c(ds.n());
  for (std::size_t k = 0; k < ds.n(); ++k) {
    const auto& u = ds.unit(k);
    if (u.coupons_distributed) {
      c[k] = *u.coupons_distributed;
    } else if (opts.fallback_recruit_count) {
      c[k] = ds.recruit_count(k);
    } else {
      throw InputError("unit '" + u.id +
                       "' has no coupons_distributed; enable the recruit-count "
                       "fallback to use d^T_i");
    }
  }
  return c;
}

DerivedObservations derive_censored(const RdsDataset& ds, const CensorOptions& opts) {
  DerivedObservations out;
  std::vector<int> c = effective_coupons(ds, opts);
  for (std::size_t k = 0; k < ds.n(); ++k)
    if (!ds.unit(k).coupons_distributed) ++out.fallback_units;
  out.used_fallback = out.fallback_units > 0;
  const int C = ds.coupon_limit();
  std::vector<int> z(ds.n());
  for (std::size_t k = 0; k < ds.n(); ++k) z[k] = std::min(c[k], C);
  out.obs = CensoredObservations::make(std::move(z), C);
  return out;
}

std::string to_string(Recommendation r) {
  return r == Recommendation::kUseBounds ? "USE_BOUNDS" : "POINT_ESTIMATE_OK";
}

ViolationReport diagnose_violations(const RdsDataset& ds, const DiagnoseOptions& opts) {
  ViolationReport rep;
  rep.threshold = opts.threshold;
  const long long C = ds.coupon_limit();
  for (std::size_t k = 0; k < ds.n(); ++k) {
    const auto& u = ds.unit(k);
    const long long i = static_cast<long long>(k) + 1;
    std::optional<int> cstar = u.coupons_distributed;
    if (!cstar && opts.censor.fallback_recruit_count) cstar = ds.recruit_count(k);
    if (cstar) {
      ++rep.a4_assessable;
      if (u.degree - (i - 1) >= C && *cstar < C) rep.a4_violations.push_back(u.id);
    }
    if (u.coupons_distributed) {
      ++rep.a5_assessable;
      if (ds.recruit_count(k) != *u.coupons_distributed) rep.a5_violations.push_back(u.id);
    }
  }
  const double n = static_cast<double>(ds.n());
  rep.a4_fraction = static_cast<double>(rep.a4_violations.size()) / n;
  rep.a5_fraction = static_cast<double>(rep.a5_violations.size()) / n;
  rep.recommendation = (rep.a4_fraction > opts.threshold || rep.a5_fraction > opts.threshold)
                           ? Recommendation::kUseBounds
                           : Recommendation::kPointEstimateOk;
  return rep;
}

void to_json(nlohmann::json& j, const ViolationReport& r) {
  j = {{"a4_violations", r.a4_violations},
       {"a5_violations", r.a5_violations},
       {"a4_count", r.a4_violations.size()},
       {"a5_count", r.a5_violations.size()},
       {"a4_fraction", r.a4_fraction},
       {"a5_fraction", r.a5_fraction},
       {"a4_assessable", r.a4_assessable},
       {"a5_assessable", r.a5_assessable},
       {"threshold", r.threshold},
       {"recommendation", to_string(r.recommendation)}};
}

}  // namespace rds
