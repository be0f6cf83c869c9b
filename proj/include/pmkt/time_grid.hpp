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

#ifndef PMKT_TIME_GRID_HPP
#define PMKT_TIME_GRID_HPP

#include <cstdint>

namespace pmkt {

// Uniform grid shared by every integrator in the library: the ODE solvers,
// the path simulator and the fixed-point iteration all step on the same
// nodes, never resampling.
struct TimeGrid {
  double t_final = 0.0;
  double dt = 0.0;
  std::int64_t n_steps = 0;

  double time(std::int64_t k) const { return static_cast<double>(k) * dt; }
  std::int64_t n_points() const { return n_steps + 1; }

  // Nearest grid index not later than t.
  std::int64_t index_at(double t) const;
};

// Builds a grid from (t_final, dt); throws if dt <= 0 or n_steps * dt does
// not reproduce t_final to within a few ulps.
TimeGrid make_time_grid(double t_final, double dt);

}  // namespace pmkt

#endif  // PMKT_TIME_GRID_HPP
