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

#ifndef PMKT_TOOLS_SCENARIO_HPP
#define PMKT_TOOLS_SCENARIO_HPP

#include <string>
#include <vector>

#include "pmkt/presets.hpp"

namespace pmkt::cli {

// A fully-resolved experiment description. Parsed from flat structured text
// (strict keys), re-serialized verbatim into the run manifest so that every
// consumed parameter is on record and the manifest itself is runnable.
struct Scenario {
  std::string name;
  std::string description;
  std::string model = "centralized";  // centralized | game | hjb
  // Pipeline: curve (sensitivity/trade-off sweep), trajectories (path dump),
  // gap (demand-supply gap sweep), game (equilibrium + social costs),
  // hjb (value/policy solve + rollout check).
  std::string kind = "curve";
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out_dir;

  // Shared market configuration.
  CentralizedParams market;

  // Path-simulation settings.
  double sim_r = 1.0;
  int sim_paths = 1;
  bool common_random_numbers = true;

  // Sweep specification.
  std::string sweep_variable = "r";
  std::vector<double> sweep_values;

  // Game settings.
  double game_r = 1.0;
  int game_consumers = 2;
  int game_suppliers = 2;
  double game_t_final = 50.0;
  double game_dt = 0.05;
  double game_tol = 1e-8;
  int game_max_iters = 200;
  int game_paths = 2000;
  double bid_penalty = 1.0;
  std::string population_file;

  // HJB settings. The value grid covers the operating region (roughly
  // +-2.4 stationary deviations around the balanced point), not the wider
  // fit box: resolution near the operating point is what the rollout
  // agreement needs.
  int hjb_nodes = 16;
  double hjb_box_d_lo = 10.0, hjb_box_d_hi = 40.0;
  double hjb_box_s_lo = 10.0, hjb_box_s_hi = 40.0;
  double hjb_box_p_lo = 40.0, hjb_box_p_hi = 60.0;
  double hjb_t_final = 10.0;
  double hjb_dt = 0.05;
  double hjb_epsilon = 0.5;
  double hjb_u_max = 5.0;
  int rollout_paths = 1000;

  void validate() const;
};

Scenario parse_scenario_text(const std::string& text);
Scenario parse_scenario_file(const std::string& path);
std::string serialize_scenario(const Scenario& s);

struct RunResult {
  std::vector<std::string> files_written;
};

// Executes the scenario into <out_dir>/<name>/; deterministic for a fixed
// (scenario, seed), including multi-threaded sweeps.
RunResult run_scenario(const Scenario& s);

struct BuiltinScenario {
  const char* name;
  const char* description;
  const char* config;
};

const std::vector<BuiltinScenario>& builtin_scenarios();
const BuiltinScenario* find_builtin(const std::string& name);

}  // namespace pmkt::cli

#endif  // PMKT_TOOLS_SCENARIO_HPP
