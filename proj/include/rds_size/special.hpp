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

#include <cmath>
#include <limits>
#include <span>

namespace rds {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Log-probabilities below this are treated as exactly zero.
inline constexpr double kLogFloor = -745.0;

inline double clamp_log(double v) { return v < kLogFloor ? kNegInf : v; }

double log_sum_exp(std::span<const double> v);

/// psi(x) - psi(y) for x >= y > 0, without cancellation when x - y is small
/// relative to y.
double digamma_diff(double x, double y);

/// sum_{j=a}^{b} 1/j for 0 < a, b >= a - 1 (empty when b = a - 1). Arguments
/// may be real; the sum runs over a, a+1, ..., b.
double harmonic_range(double a, double b);

/// Golden-section search for the maximum of a unimodal f on [lo, hi].
template <class F>
double golden_section_maximize(F&& f, double lo, double hi, double tol = 1e-9,
                               int max_iter = 200) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < max_iter && (b - a) > tol * (1.0 + std::fabs(a) + std::fabs(b)); ++it) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return fc >= fd ? c : d;
}

/// Coarse grid scan followed by golden-section refinement inside the
/// bracketing cells of the best grid point. Robust to mild multimodality and
/// to -inf regions near the edges.
template <class F>
double grid_golden_maximize(F&& f, double lo, double hi, int grid = 64,
                            double tol = 1e-10) {
  double best_x = lo, best_f = -std::numeric_limits<double>::infinity();
  int best_k = 0;
  const double h = (hi - lo) / grid;
  for (int k = 0; k <= grid; ++k) {
    double x = lo + h * k;
    double v = f(x);
    if (v > best_f) {
      best_f = v;
      best_x = x;
      best_k = k;
    }
  }
  if (!std::isfinite(best_f)) return best_x;
  double a = lo + h * std::max(best_k - 1, 0);
  double b = lo + h * std::min(best_k + 1, grid);
  double x = golden_section_maximize(f, a, b, tol);
  return f(x) >= best_f ? x : best_x;
}

}  // namespace rds
