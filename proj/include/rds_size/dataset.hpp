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

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace rds {

/// One surveyed participant as reported in the data file.
struct RdsUnit {
  std::string id;
  std::optional<std::string> recruiter_id;  // absent for seeds
  std::string time;                         // raw timestamp text
  int degree = 0;                           // self-reported population degree
  std::optional<int> coupons_distributed;   // C*_i, when reported

  bool is_seed() const { return !recruiter_id.has_value(); }
  bool operator==(const RdsUnit&) const = default;
};

struct IngestOptions {
  /// Downgrade "degree smaller than recruits (+1 for the recruiter)" from an
  /// error to a warning.
  bool allow_degree_deficit = false;
};

class RdsDataset;

namespace detail {
RdsDataset build_dataset(std::vector<RdsUnit> units, int coupon_limit,
                         const IngestOptions& opts,
                         std::vector<std::size_t> lines);
}  // namespace detail

/// A validated survey. Units are stored in recruitment order; position k
/// (0-based) is recruitment index i = k + 1.
class RdsDataset {
 public:
  /// Sorts by time (stable on ties, which are reported as warnings) and
  /// validates every invariant. Throws InputError.
  static RdsDataset from_units(std::vector<RdsUnit> units, int coupon_limit,
                               const IngestOptions& opts = {});

  const std::vector<RdsUnit>& units() const { return units_; }
  const RdsUnit& unit(std::size_t k) const { return units_[k]; }
  std::size_t n() const { return units_.size(); }
  int coupon_limit() const { return coupon_limit_; }

  /// 0-based position of the recruiter of unit k; nullopt for seeds.
  std::optional<std::size_t> recruiter_index(std::size_t k) const {
    return recruiter_[k];
  }
  /// d^T_i: number of observed recruits of unit k.
  int recruit_count(std::size_t k) const { return recruits_[k]; }
  /// Depth in the recruitment forest; seeds are wave 0.
  int wave(std::size_t k) const { return waves_[k]; }
  int max_wave() const;
  std::size_t seed_count() const;
  std::size_t recruiter_link_count() const { return n() - seed_count(); }
  bool has_all_coupons() const;
  bool numeric_time() const { return numeric_time_; }

  std::optional<std::size_t> find(const std::string& id) const;
  const std::vector<std::string>& warnings() const { return warnings_; }

  bool operator==(const RdsDataset& o) const {
    return units_ == o.units_ && coupon_limit_ == o.coupon_limit_;
  }

 private:
  friend RdsDataset detail::build_dataset(std::vector<RdsUnit>, int,
                                          const IngestOptions&,
                                          std::vector<std::size_t>);

  std::vector<RdsUnit> units_;
  int coupon_limit_ = 0;
  bool numeric_time_ = true;
  std::vector<std::optional<std::size_t>> recruiter_;
  std::vector<int> recruits_;
  std::vector<int> waves_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::string> warnings_;
};

/// Reads the survey CSV (`id,recruiter_id,time,degree,coupons_distributed`).
RdsDataset ingest(std::istream& in, int coupon_limit,
                  const IngestOptions& opts = {});
RdsDataset ingest(const std::filesystem::path& path, int coupon_limit,
                  const IngestOptions& opts = {});

/// Reads `{ "coupon_limit": <int> }`.
int read_coupon_limit_sidecar(const std::filesystem::path& path);
void write_coupon_limit_sidecar(const std::filesystem::path& path,
                                int coupon_limit);

/// Writes the canonical CSV in recruitment order.
void export_csv(const RdsDataset& ds, std::ostream& out);
void export_csv(const RdsDataset& ds, const std::filesystem::path& path);

/// Right-censored counts z_i = min(Y_i, C) and indicators delta_i = [Y_i < C],
/// in recruitment order.
struct CensoredObservations {
  std::vector<int> z;
  std::vector<int> delta;
  int coupon_limit = 0;

  /// Validates 0 <= z_i <= C and delta_i = [z_i < C]. Throws InputError.
  static CensoredObservations make(std::vector<int> z, int coupon_limit);
  /// As make(), but takes delta explicitly and checks consistency.
  static CensoredObservations make(std::vector<int> z, std::vector<int> delta,
                                   int coupon_limit);

  std::size_t n() const { return z.size(); }
  int uncensored_count() const;
};

struct CensorOptions {
  /// Use the observed recruit count d^T_i where C*_i is not reported.
  bool fallback_recruit_count = false;
};

struct DerivedObservations {
  CensoredObservations obs;
  bool used_fallback = false;
  std::size_t fallback_units = 0;
};

/// Applies the coupon-distribution rule: C*_i < C gives an exact count,
/// C*_i = C a right-censored one.
DerivedObservations derive_censored(const RdsDataset& ds,
                                    const CensorOptions& opts = {});

/// C*_i as used downstream: the reported value, or d^T_i under the fallback.
std::vector<int> effective_coupons(const RdsDataset& ds,
                                   const CensorOptions& opts);

enum class Recommendation { kPointEstimateOk, kUseBounds };

std::string to_string(Recommendation r);

struct ViolationReport {
  std::vector<std::string> a4_violations;  // d_i - (i-1) >= C and C*_i < C
  std::vector<std::string> a5_violations;  // C*_i reported and d^T_i != C*_i
  double a4_fraction = 0.0;
  double a5_fraction = 0.0;
  std::size_t a4_assessable = 0;
  std::size_t a5_assessable = 0;
  double threshold = 0.02;
  Recommendation recommendation = Recommendation::kPointEstimateOk;
};

struct DiagnoseOptions {
  double threshold = 0.02;
  CensorOptions censor;  // lets A4 use the recruit-count fallback
};

ViolationReport diagnose_violations(const RdsDataset& ds,
                                    const DiagnoseOptions& opts = {});

void to_json(nlohmann::json& j, const ViolationReport& r);

}  // namespace rds
