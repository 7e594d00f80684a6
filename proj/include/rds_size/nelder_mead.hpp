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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace rds {

struct NelderMeadOptions {
  double tolerance = 1e-8;  // simplex diameter (max-norm) in parameter space
  int max_iterations = 2000;
  double initial_step = 0.1;
};

struct NelderMeadResult {
  std::vector<double> x;
  double fx = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Derivative-free simplex minimization with the standard reflection (1),
/// expansion (2), contraction (1/2) and shrink (1/2) coefficients. `f` may
/// return +inf to mark infeasible points.
template <class F>
NelderMeadResult nelder_mead(F&& f, std::vector<double> x0, const NelderMeadOptions& opts = {}) {
  const std::size_t d = x0.size();
  std::vector<std::vector<double>> s(d + 1, x0);
  std::vector<double> fs(d + 1);
  for (std::size_t j = 0; j < d; ++j) s[j + 1][j] += opts.initial_step;
  for (std::size_t j = 0; j <= d; ++j) fs[j] = f(s[j]);

  std::vector<std::size_t> order(d + 1);
  auto point = [&](const std::vector<double>& c, const std::vector<double>& w, double t) {
    std::vector<double> p(d);
    for (std::size_t k = 0; k < d; ++k) p[k] = c[k] + t * (w[k] - c[k]);
    return p;
  };

  NelderMeadResult res;
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return fs[a] < fs[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[d - 1];

    double diam = 0.0;
    for (std::size_t j = 0; j <= d; ++j)
      for (std::size_t k = 0; k < d; ++k)
        diam = std::max(diam, std::fabs(s[j][k] - s[best][k]));
    if (diam < opts.tolerance) {
      res.converged = true;
      break;
    }

    std::vector<double> c(d, 0.0);
    for (std::size_t j = 0; j <= d; ++j)
      if (j != worst)
        for (std::size_t k = 0; k < d; ++k) c[k] += s[j][k] / static_cast<double>(d);

    auto xr = point(c, s[worst], -1.0);
    double fr = f(xr);
    if (fr < fs[best]) {
      auto xe = point(c, s[worst], -2.0);
      double fe = f(xe);
      if (fe < fr) {
        s[worst] = std::move(xe);
        fs[worst] = fe;
      } else {
        s[worst] = std::move(xr);
        fs[worst] = fr;
      }
      continue;
    }
    if (fr < fs[second]) {
      s[worst] = std::move(xr);
      fs[worst] = fr;
      continue;
    }
    // Outside contraction when the reflected point beats the worst vertex,
    // inside contraction otherwise.
    const bool outside = fr < fs[worst];
    auto xc = point(c, s[worst], outside ? -0.5 : 0.5);
    double fc = f(xc);
    if (fc < (outside ? fr : fs[worst])) {
      s[worst] = std::move(xc);
      fs[worst] = fc;
      continue;
    }
    for (std::size_t j = 0; j <= d; ++j) {
      if (j == best) continue;
      for (std::size_t k = 0; k < d; ++k) s[j][k] = s[best][k] + 0.5 * (s[j][k] - s[best][k]);
      fs[j] = f(s[j]);
    }
  }
  std::size_t best = static_cast<std::size_t>(std::min_element(fs.begin(), fs.end()) - fs.begin());
  res.x = s[best];
  res.fx = fs[best];
  res.iterations = it;
  return res;
}

}  // namespace rds
