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

#include "rds_size/special.hpp"

#include <algorithm>

namespace rds {

double log_sum_exp(std::span<const double> v) {
  double m = kNegInf;
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

namespace {

// Asymptotic expansion of psi(x) - psi(y) for x, y >= kShift. The leading
// log term goes through log1p so close arguments keep full relative accuracy.
constexpr double kShift = 20.0;

double digamma_diff_asymptotic(double x, double y) {
  const double d = x - y;
  double out = std::log1p(d / y);
  out += d / (2.0 * x * y);  // -1/(2x) + 1/(2y)
  // -sum B_{2k}/(2k) (x^{-2k} - y^{-2k})
  static constexpr double kCoef[] = {1.0 / 12.0, -1.0 / 120.0, 1.0 / 252.0,
                                     -1.0 / 240.0, 1.0 / 132.0, -691.0 / 32760.0};
  const double ix2 = 1.0 / (x * x), iy2 = 1.0 / (y * y);
  double px = ix2, py = iy2;
  for (double c : kCoef) {
    out -= c * (px - py);
    px *= ix2;
    py *= iy2;
  }
  return out;
}

}  // namespace

double digamma_diff(double x, double y) {
  if (x == y) return 0.0;
  if (x < y) return -digamma_diff(y, x);
  // psi(t) = psi(t + 1) - 1/t, applied until both arguments are large.
  double acc = 0.0;
  while (y < kShift) {
    acc += 1.0 / y;
    y += 1.0;
  }
  while (x < kShift) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  return acc + digamma_diff_asymptotic(x, y);
}

double harmonic_range(double a, double b) {
  if (b < a) return 0.0;
  return digamma_diff(b + 1.0, a);
}

}  // namespace rds
