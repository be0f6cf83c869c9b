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

#include "scenario.hpp"

namespace pmkt::cli {

namespace {

constexpr const char* kFig1 = R"(
[scenario]
name = fig1
description = cost sensitivity dJsp/dr over a log-spaced volatility-coefficient sweep
model = centralized
kind = curve
seed = 1
[grid]
t_final = 100
dt = 0.05
[sweep]
variable = r
values = logspace(0.01, 1000, 20)
)";

constexpr const char* kFig2 = R"(
[scenario]
name = fig2
description = normalized efficiency versus volatility trade-off curve
model = centralized
kind = curve
seed = 1
[grid]
t_final = 100
dt = 0.05
[sweep]
variable = r
values = logspace(0.01, 1000, 20)
)";

constexpr const char* kFig3 = R"(
[scenario]
name = fig3_r001
description = closed-loop market path at r = 0.01 (cheap control, volatile price)
model = centralized
kind = trajectories
seed = 1
[grid]
t_final = 100
dt = 0.05
[sim]
r = 0.01
n_paths = 1
)";

constexpr const char* kFig4 = R"(
[scenario]
name = fig4_r1000
description = closed-loop market path at r = 1000 (expensive control, calm price)
model = centralized
kind = trajectories
seed = 1
[grid]
t_final = 100
dt = 0.05
[sim]
r = 1000
n_paths = 1
)";

constexpr const char* kFig5 = R"(
[scenario]
name = fig5
description = closed-loop path at r = 1 starting with demand above supply
model = centralized
kind = trajectories
seed = 1
[grid]
t_final = 100
dt = 0.05
[market]
x0 = 35 15 50
[sim]
r = 1
n_paths = 1
)";

constexpr const char* kFig6 = R"(
[scenario]
name = fig6
description = closed-loop path at r = 1 starting with supply above demand
model = centralized
kind = trajectories
seed = 1
[grid]
t_final = 100
dt = 0.05
[market]
x0 = 15 35 50
[sim]
r = 1
n_paths = 1
)";

constexpr const char* kFig7 = R"(
[scenario]
name = fig7
description = mean absolute demand-supply gap over a volatility-coefficient sweep
model = centralized
kind = gap
seed = 1
[grid]
t_final = 100
dt = 0.05
[sim]
n_paths = 1000
common_random_numbers = true
[sweep]
variable = r
values = 0.01, 0.1, 1, 10, 100, 1000
)";

constexpr const char* kGameLow = R"(
[scenario]
name = game_r0005
description = two-by-two market game equilibrium at r = 0.005 (cheap bidding)
model = game
kind = game
seed = 1
[game]
r = 0.005
n_consumers = 2
n_suppliers = 2
t_final = 50
dt = 0.05
tol = 1e-8
max_iters = 200
n_paths = 2000
)";

constexpr const char* kGameHigh = R"(
[scenario]
name = game_r100
description = two-by-two market game equilibrium at r = 100 (sluggish bidding)
model = game
kind = game
seed = 1
[game]
r = 100
n_consumers = 2
n_suppliers = 2
t_final = 50
dt = 0.05
tol = 1e-8
max_iters = 200
n_paths = 2000
)";

constexpr const char* kHjbDemo = R"(
[scenario]
name = hjb_demo
description = bang-bang regulator from the dynamic-programming solve on a 16^3 grid
model = hjb
kind = hjb
seed = 1
[hjb]
nodes = 16
box_d = 10 40
box_s = 10 40
box_p = 40 60
t_final = 10
dt = 0.05
epsilon = 0.5
u_max = 5
rollout_paths = 1000
)";

}  // namespace

const std::vector<BuiltinScenario>& builtin_scenarios() {
  static const std::vector<BuiltinScenario> all = {
      {"fig1", "cost sensitivity dJsp/dr over a log-spaced r sweep", kFig1},
      {"fig2", "normalized efficiency versus volatility trade-off curve", kFig2},
      {"fig3_r001", "closed-loop market path at r = 0.01", kFig3},
      {"fig4_r1000", "closed-loop market path at r = 1000", kFig4},
      {"fig5", "closed-loop path starting with demand above supply", kFig5},
      {"fig6", "closed-loop path starting with supply above demand", kFig6},
      {"fig7", "mean absolute demand-supply gap over an r sweep", kFig7},
      {"game_r0005", "two-by-two game equilibrium at r = 0.005", kGameLow},
      {"game_r100", "two-by-two game equilibrium at r = 100", kGameHigh},
      {"hjb_demo", "bang-bang regulator on a 16^3 grid with rollout check", kHjbDemo},
  };
  return all;
}

const BuiltinScenario* find_builtin(const std::string& name) {
  for (const auto& b : builtin_scenarios()) {
    if (name == b.name) return &b;
  }
  return nullptr;
}

}  // namespace pmkt::cli
