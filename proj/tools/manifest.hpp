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
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace rds::cli {

std::string sha256_file(const std::filesystem::path& path);
std::string utc_timestamp();

/// Collects the provenance of one run and writes `manifest.json`.
class Manifest {
 public:
  Manifest(std::string subcommand, std::vector<std::string> argv);

  void set_config(nlohmann::json config) { config_ = std::move(config); }
  void add_seed(const std::string& name, std::uint64_t value) { seeds_[name] = value; }
  void add_input(const std::filesystem::path& path);
  /// Hashes every regular file already in `dir` except the manifest itself.
  void write(const std::filesystem::path& dir) const;

 private:
  std::string subcommand_;
  std::vector<std::string> argv_;
  std::string started_;
  nlohmann::json config_ = nlohmann::json::object();
  nlohmann::json seeds_ = nlohmann::json::object();
  nlohmann::json inputs_ = nlohmann::json::array();
};

}  // namespace rds::cli
