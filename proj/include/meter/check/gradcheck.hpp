// Copyright 2026 The meter-rt Authors. All Rights Reserved.
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
#include <cstddef>
#include <functional>

#include "meter/loss.hpp"
#include "meter/random.hpp"

namespace meter::check {

struct GradcheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
};

/// Compares an analytic gradient with central differences of the scalar function.
/// Points whose |y - y_hat| is within kink_margin are skipped.
inline GradcheckResult gradcheck(const std::function<LossTerm(const Grid&)>& f, const Grid& y,
                                 const Grid& yhat, double kink_margin = 1e-6) {
  const LossTerm analytic = f(yhat);
  double scale = 0.0;
  for (double v : yhat.v) scale = std::max(scale, std::abs(v));
  const double h = 1e-5 * std::max(scale, 1.0);
  GradcheckResult r;
  Grid probe = yhat;
  for (std::size_t i = 0; i < yhat.size(); ++i) {
    if (std::abs(y.v[i] - yhat.v[i]) <= std::max(kink_margin, 2.0 * h)) {
      ++r.skipped;
      continue;
    }
    const double saved = probe.v[i];
    probe.v[i] = saved + h;
    const double up = f(probe).value;
    probe.v[i] = saved - h;
    const double down = f(probe).value;
    probe.v[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic.gradient.v[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
    r.max_rel_error = std::max(r.max_rel_error, std::abs(a - numeric) / denom);
    ++r.checked;
  }
  return r;
}

/// Seeded random pair of positive depth-like maps.
inline std::pair<Grid, Grid> random_pair(std::size_t h, std::size_t w, std::uint64_t seed,
                                         double lo = 0.5, double hi = 5.0) {
  Rng rng(seed);
  Grid y(h, w), p(h, w);
  for (double& v : y.v) v = rng.uniform(lo, hi);
  for (double& v : p.v) v = rng.uniform(lo, hi);
  return {y, p};
}

}  // namespace meter::check
