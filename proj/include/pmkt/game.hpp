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

#ifndef PMKT_GAME_HPP
#define PMKT_GAME_HPP

#include <string>
#include <vector>

#include "pmkt/lq.hpp"
#include "pmkt/sde.hpp"

namespace pmkt {

enum class AgentKind { consumer, supplier };

// Submitted price-quantity graph parameterization: the agent's own price
// parameter enters the clearing functional through f(x) = slope*x + offset
// (consumers' graphs slope down in the market price, suppliers' slope up).
struct PriceQuantityGraph {
  double slope = 1.0;
  double offset = 0.0;
  double lipschitz() const { return std::abs(slope); }
  double operator()(double own_param) const { return slope * own_param + offset; }
};

// One market participant. Consumers carry state (d, s_recv, p_own) in R^3,
// suppliers (s, p_own) in R^2; the own price parameter is always the last
// component and the control channel. The market price couples in linearly:
//   h_t = sys.h + h_price * p_t,   D_t = cost.d + d_price * p_t.
struct AgentSpec {
  AgentKind kind = AgentKind::consumer;
  LinearSystem sys;
  QuadraticCost cost;
  Vec x0;
  Vec h_price;
  Vec d_price;
  PriceQuantityGraph pq;

  Eigen::Index n() const { return sys.n(); }
  Eigen::Index param_index() const { return sys.n() - 1; }
  void validate() const;
};

struct GamePopulation {
  std::vector<AgentSpec> consumers;
  std::vector<AgentSpec> suppliers;
  double clearing_gamma = 1.0;
  double eta = 0.0;
  // Declared compact bound on dynamics parameters: every |A|, |B| entry of
  // every agent must lie within it.
  double theta_bound = 1e3;

  int n_agents() const {
    return static_cast<int>(consumers.size() + suppliers.size());
  }
  const AgentSpec& agent(int i) const {
    return i < static_cast<int>(consumers.size())
               ? consumers[i]
               : suppliers[i - consumers.size()];
  }
  void validate() const;
};

struct PriceTrajectory {
  Vec p;  // one value per grid node

  void validate(const TimeGrid& grid) const;
};

PriceTrajectory constant_price(double value, const TimeGrid& grid);

// Linear market clearing: (gamma / (Nd + Ns)) (sum_i f_i(param_i) + eta),
// params ordered consumers first, then suppliers, summed in that fixed order.
double clearing_price(const GamePopulation& pop, const Vec& agent_params);

// An agent's optimal affine feedback against a posted price trajectory: the
// price is folded into h_t and D_t and the Riccati system solved backward.
struct BestResponse {
  RiccatiSolution sol;
};

BestResponse best_response(const AgentSpec& agent, const PriceTrajectory& price,
                           const TimeGrid& grid);

// Noise-free closed-loop mean of the agent's state under its best response,
// integrated forward from the agent's x0.
std::vector<Vec> expected_state(const AgentSpec& agent, const BestResponse& response,
                                const PriceTrajectory& price, const TimeGrid& grid);

// One application of the price fixed-point operator: all best responses, all
// expected own-price parameters, cleared through the market functional.
PriceTrajectory apply_t5(const GamePopulation& pop, const PriceTrajectory& price,
                         const TimeGrid& grid);

// Contraction certificate for the fixed-point operator, assembled from the
// population's decay/transient constants (kappa, rho), coefficient bounds
// M_K, M_h, M_D and graph Lipschitz constants. Values below 1 guarantee a
// unique equilibrium; equilibrium solving proceeds with a warning otherwise.
struct ContractionReport {
  double bound = 0.0;
  double kappa = 1.0;
  double rho_decay = 0.0;
};

ContractionReport contraction_bound(const GamePopulation& pop, const TimeGrid& grid);

struct EquilibriumResult {
  PriceTrajectory price;
  std::vector<BestResponse> responses;        // consumers first, then suppliers
  std::vector<std::vector<Vec>> mean_states;  // per agent, per node
  std::vector<double> residual_history;       // sup-norm change per iteration
  int iterations = 0;
};

// Fixed-point iteration of apply_t5 from p_init until the sup-norm change
// drops below tol; throws (reporting the last residual) past max_iters.
EquilibriumResult solve_equilibrium(const GamePopulation& pop,
                                    const PriceTrajectory& p_init,
                                    const TimeGrid& grid, double tol,
                                    int max_iters);

struct SocialCosts {
  double total = 0.0;             // sum over agents of E int (x'Qx + 2x'D_t + r u^2) dt
  double state_penalizing = 0.0;  // same without the r u^2 term
  double volatility = 0.0;        // sum over agents of E int u^2 dt
  std::vector<CostEstimate> per_agent;
};

// Monte Carlo social costs at the equilibrium: each agent simulated under
// its equilibrium feedback with the fixed equilibrium price trajectory
// feeding h_t and D_t. Agents draw from disjoint noise lanes of one seed.
SocialCosts social_costs(const GamePopulation& pop, const EquilibriumResult& eq,
                         const SimConfig& cfg);

// Population configuration file (structured text, [market] + repeated
// [agent] blocks).
GamePopulation parse_population(const std::string& text);
GamePopulation load_population(const std::string& path);

void export_equilibrium_csv(const std::string& path, const GamePopulation& pop,
                            const EquilibriumResult& eq, const TimeGrid& grid);
void export_residuals_csv(const std::string& path, const EquilibriumResult& eq);

}  // namespace pmkt

#endif  // PMKT_GAME_HPP
