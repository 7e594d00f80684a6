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


#include "manifest.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <boost/version.hpp>
#include <openssl/evp.h>

#include "rds_size/error.hpp"

#ifndef RDS_SIZE_VERSION
#define RDS_SIZE_VERSION "0.0.0"
#endif

namespace rds::cli {

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int k = 0; k < len; ++k)
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[k]);
  return hex.str();
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Manifest::Manifest(std::string subcommand, std::vector<std::string> argv)
    : subcommand_(std::move(subcommand)), argv_(std::move(argv)), started_(utc_timestamp()) {}

void Manifest::add_input(const std::filesystem::path& path) {
  inputs_.push_back({{"path", path.string()},
                     {"bytes", std::filesystem::file_size(path)},
                     {"sha256", sha256_file(path)}});
}

void Manifest::write(const std::filesystem::path& dir) const {
  nlohmann::json outputs = nlohmann::json::array();
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files)
    outputs.push_back({{"path", f.filename().string()},
                       {"bytes", std::filesystem::file_size(f)},
                       {"sha256", sha256_file(f)}});
  nlohmann::json m = {{"schema_version", 1},
                      {"tool", "rds_size"},
                      {"version", RDS_SIZE_VERSION},
                      {"subcommand", subcommand_},
                      {"argv", argv_},
                      {"config", config_},
                      {"seeds", seeds_},
                      {"inputs", inputs_},
                      {"outputs", outputs},
                      {"libraries",
                       {{"boost", BOOST_LIB_VERSION},
                        {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                              std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                              std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}},
                      {"started_at", started_},
                      {"finished_at", utc_timestamp()}};
  std::ofstream f(dir / "manifest.json");
  if (!f) throw InputError("cannot write manifest in " + dir.string());
  f << m.dump(2) << '\n';
}

}  // namespace rds::cli
