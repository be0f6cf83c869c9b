// Copyright 2026 the pmkt authors
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

#include "pmkt/time_grid.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace pmkt {

std::int64_t TimeGrid::index_at(double t) const {
  if (!(t >= -1e-12 && t <= t_final * (1.0 + 1e-12) + 1e-12)) {
    throw std::out_of_range("TimeGrid: t=" + std::to_string(t) +
                            " outside [0, " + std::to_string(t_final) + "]");
  }
  // A hair of slack so times written as k*dt land on node k despite rounding.
  auto k = static_cast<std::int64_t>(std::floor(t / dt * (1.0 + 4e-16)));
  if (k < 0) k = 0;
  if (k > n_steps) k = n_steps;
  return k;
}

TimeGrid make_time_grid(double t_final, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw std::invalid_argument("TimeGrid: dt must be positive and finite");
  }
  if (!(t_final > 0.0) || !std::isfinite(t_final)) {
    throw std::invalid_argument("TimeGrid: t_final must be positive and finite");
  }
  auto n = static_cast<std::int64_t>(std::llround(t_final / dt));
  if (n < 1) {
    throw std::invalid_argument("TimeGrid: horizon shorter than one step");
  }
  const double rebuilt = static_cast<double>(n) * dt;
  const double tol = 8.0 * std::max(1.0, std::abs(t_final)) *
                     std::numeric_limits<double>::epsilon();
  if (std::abs(rebuilt - t_final) > tol) {
    throw std::invalid_argument("TimeGrid: n_steps*dt=" + std::to_string(rebuilt) +
                                " does not match t_final=" + std::to_string(t_final));
  }
  return TimeGrid{t_final, dt, n};
}

}  // namespace pmkt
