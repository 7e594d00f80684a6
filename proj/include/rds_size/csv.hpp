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

#include <iosfwd>
#include <string>
#include <vector>

namespace rds::csv {

using Row = std::vector<std::string>;

/// A parsed table. `lines[k]` is the 1-based source line of `rows[k]`.
struct Table {
  Row header;
  std::vector<Row> rows;
  std::vector<std::size_t> lines;
};

/// Parses comma-separated text with optional double-quoted fields. Blank lines
/// are skipped; a trailing '\r' is stripped.
Table parse(std::istream& in);

std::string escape(const std::string& field);
void write_row(std::ostream& out, const Row& row);

std::string trim(const std::string& s);

}  // namespace rds::csv
