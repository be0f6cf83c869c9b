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

#ifndef PMKT_SDE_HPP
#define PMKT_SDE_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pmkt/lq.hpp"
#include "pmkt/time_grid.hpp"

namespace pmkt {

// Monte Carlo configuration. Identical (config, inputs) produce bit-identical
// results on any thread count: noise is keyed by (seed, path, step, lane)
// through a counter-based generator, and reductions run in fixed path order.
// With common_random_numbers set (the default), sweep runners reuse the seed
// across sweep points so draws never depend on the dynamics or cost.
struct SimConfig {
  TimeGrid grid;
  int n_paths = 1;
  std::uint64_t seed = 1;
  bool common_random_numbers = true;
  int n_threads = 1;
  // Base lane for noise keys; gives game agents disjoint streams.
  std::uint32_t lane_offset = 0;

  void validate() const;
};

struct Trajectory {
  Mat states;       // n_comp x (n_steps + 1)
  Vec controls;     // n_steps
  TimeGrid grid;
};

// Left-endpoint Riemann estimates of the running-cost components, averaged
// across paths. total tracks the full integrand x'Qx + 2x'D + r u^2, so
// total = state_penalizing + r * volatility holds up to rounding.
struct CostEstimate {
  double total = 0.0;
  double state_penalizing = 0.0;
  double volatility = 0.0;  // E int u^2 dt
  double se_total = 0.0;
  double se_state_penalizing = 0.0;
  double se_volatility = 0.0;
  int n_paths = 0;
};

// Per-step closed-loop stepping coefficients consumed by the path engine:
//   u_k = frow_k . x + foff_k
//   x_{k+1} = m_k x + c_k + gs z_k
// with m_k = I + dt (A + B frow_k), c_k = dt (B foff_k + h_k), gs = sqrt(dt) G.
struct StepPolicy {
  int n = 0;
  std::vector<double> m;     // n_steps * n * n, row-major per step
  std::vector<double> c;     // n_steps * n
  std::vector<double> frow;  // n_steps * n
  std::vector<double> foff;  // n_steps
  std::vector<double> gs;    // n * n
  TimeGrid grid;
};

StepPolicy make_step_policy(const LinearSystem& sys, const QuadraticCost& cost,
                            const RiccatiSolution& sol, const TimeGrid& grid);

// Variant with time-varying offset h_k (given on grid nodes; the last node is
// unused since stepping is left-endpoint).
StepPolicy make_step_policy_tv(const LinearSystem& sys, const QuadraticCost& cost,
                               const RiccatiSolution& sol,
                               const std::vector<Vec>& h_nodes,
                               const TimeGrid& grid);

struct EngineRequest {
  const StepPolicy* policy = nullptr;
  Vec x0;
  SimConfig cfg;
  // Cost accumulation (optional): Q, D on grid nodes (or a single constant D).
  const Mat* q = nullptr;
  const Vec* d_const = nullptr;
  const std::vector<Vec>* d_nodes = nullptr;
  double r = 1.0;
  bool want_trajectories = false;
  bool want_noise = false;     // capture raw draws (test hook)
  int gap_comp_a = 0;          // |x_a - x_b| trajectory metric
  int gap_comp_b = 1;
  int incr_comp = -1;          // component for increment variance (-1: off)
};

struct EngineResult {
  CostEstimate cost;
  double mean_abs_gap = 0.0;
  double incr_variance = 0.0;
  std::vector<Trajectory> trajectories;
  std::vector<double> noise;  // path-major [path][step][comp] when captured
};

EngineResult run_paths(const EngineRequest& req);

// Closed-loop Euler-Maruyama paths under the optimal feedback.
std::vector<Trajectory> simulate_closed_loop(const LinearSystem& sys,
                                             const QuadraticCost& cost,
                                             const RiccatiSolution& sol,
                                             const Vec& x0, const SimConfig& cfg);
std::vector<Trajectory> simulate_closed_loop(const LinearSystem& sys,
                                             const QuadraticCost& cost,
                                             const RiccatiSolution& sol,
                                             const MarketState& x0,
                                             const SimConfig& cfg);

// Streaming estimate over freshly simulated paths (no trajectory storage).
CostEstimate simulate_costs(const LinearSystem& sys, const QuadraticCost& cost,
                            const RiccatiSolution& sol, const Vec& x0,
                            const SimConfig& cfg);

// Cost components recomputed from materialized trajectories.
CostEstimate estimate_costs(const std::vector<Trajectory>& trajs,
                            const QuadraticCost& cost);

// Time- and path-average of |d - s| over all stored points.
double mean_abs_gap(const std::vector<Trajectory>& trajs);

// Long-format CSV: path,t,<component names>,u (header row, LF endings).
void export_trajectories_csv(const std::string& path,
                             const std::vector<Trajectory>& trajs,
                             const std::vector<std::string>& comp_names);

}  // namespace pmkt

#endif  // PMKT_SDE_HPP
