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

#include "pmkt/game.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>

#include "pmkt/config.hpp"

namespace pmkt {

void AgentSpec::validate() const {
  sys.validate();
  cost.validate(sys.n());
  if (kind == AgentKind::consumer && sys.n() != 3) {
    throw std::invalid_argument("consumer agents carry a 3-dimensional state");
  }
  if (kind == AgentKind::supplier && sys.n() != 2) {
    throw std::invalid_argument("supplier agents carry a 2-dimensional state");
  }
  if (sys.m() != 1) throw std::invalid_argument("agents steer one price parameter");
  for (Eigen::Index i = 0; i < sys.n(); ++i) {
    const double want = (i == param_index()) ? 1.0 : 0.0;
    if (sys.b(i, 0) != want) {
      throw std::invalid_argument("agent control channel must be the last state component");
    }
  }
  if (x0.size() != sys.n() || h_price.size() != sys.n() || d_price.size() != sys.n()) {
    throw std::invalid_argument("agent coupling vectors must match the state dimension");
  }
  if (!all_finite(x0) || !all_finite(h_price) || !all_finite(d_price)) {
    throw std::invalid_argument("agent spec has non-finite entries");
  }
}

void GamePopulation::validate() const {
  if (consumers.empty() || suppliers.empty()) {
    throw std::invalid_argument("population needs at least one consumer and one supplier");
  }
  if (!(clearing_gamma > 0.0)) throw std::invalid_argument("clearing_gamma must be positive");
  if (eta < 0.0) throw std::invalid_argument("eta must be non-negative");
  if (!(theta_bound > 0.0)) throw std::invalid_argument("theta_bound must be positive");
  for (const auto& a : consumers) {
    a.validate();
    if (a.kind != AgentKind::consumer) throw std::invalid_argument("misfiled consumer");
  }
  for (const auto& a : suppliers) {
    a.validate();
    if (a.kind != AgentKind::supplier) throw std::invalid_argument("misfiled supplier");
  }
  for (int i = 0; i < n_agents(); ++i) {
    const auto& a = agent(i);
    const double worst = std::max(a.sys.a.cwiseAbs().maxCoeff(),
                                  a.sys.b.cwiseAbs().maxCoeff());
    if (worst > theta_bound) {
      throw std::invalid_argument("agent dynamics parameters leave the declared compact box");
    }
  }
}

void PriceTrajectory::validate(const TimeGrid& grid) const {
  if (p.size() != grid.n_points()) {
    throw std::invalid_argument("price trajectory must have one value per grid node");
  }
  if (!all_finite(p)) throw std::invalid_argument("price trajectory has non-finite values");
}

PriceTrajectory constant_price(double value, const TimeGrid& grid) {
  PriceTrajectory out;
  out.p = Vec::Constant(grid.n_points(), value);
  return out;
}

double clearing_price(const GamePopulation& pop, const Vec& agent_params) {
  if (agent_params.size() != pop.n_agents()) {
    throw std::invalid_argument("clearing_price: parameter count must match population");
  }
  double sum = 0.0;
  for (int i = 0; i < pop.n_agents(); ++i) {
    sum += pop.agent(i).pq(agent_params(i));
  }
  return pop.clearing_gamma * (sum + pop.eta) / pop.n_agents();
}

namespace {

std::vector<Vec> coupled_nodes(const Vec& base, const Vec& per_price,
                               const PriceTrajectory& price) {
  std::vector<Vec> nodes(price.p.size());
  for (Eigen::Index k = 0; k < price.p.size(); ++k) {
    nodes[k] = base + per_price * price.p(k);
  }
  return nodes;
}

}  // namespace

BestResponse best_response(const AgentSpec& agent, const PriceTrajectory& price,
                           const TimeGrid& grid) {
  agent.validate();
  price.validate(grid);
  const auto h_nodes = coupled_nodes(agent.sys.h, agent.h_price, price);
  const auto d_nodes = coupled_nodes(agent.cost.d, agent.d_price, price);
  return BestResponse{solve_riccati_tv(agent.sys, agent.cost, h_nodes, d_nodes, grid)};
}

std::vector<Vec> expected_state(const AgentSpec& agent, const BestResponse& response,
                                const PriceTrajectory& price, const TimeGrid& grid) {
  price.validate(grid);
  const RiccatiSolution& sol = response.sol;
  if (!sol.dense) throw std::invalid_argument("expected_state: response lacks dense data");
  if (sol.grid.n_steps != grid.n_steps || sol.grid.dt != grid.dt) {
    throw std::invalid_argument("expected_state: response grid mismatch");
  }
  const auto n = agent.sys.n();
  const double gamma = 1.0 / agent.cost.r;
  const Vec bcol = agent.sys.b.col(0);
  const int sub = sol.dense->substeps;
  const std::int64_t n_fine = grid.n_steps * sub;
  const double hf = grid.dt / sub;

  // Market price at a forward fine half-index (linear between nodes).
  auto price_at = [&](std::int64_t fwd_half) -> double {
    const double pos = static_cast<double>(fwd_half) / (2.0 * sub);
    const auto k = static_cast<std::int64_t>(pos);
    if (k >= grid.n_steps) return price.p(grid.n_steps);
    const double w = pos - static_cast<double>(k);
    return (1.0 - w) * price.p(k) + w * price.p(k + 1);
  };

  auto deriv = [&](std::int64_t fwd_half, const Vec& m) -> Vec {
    const std::int64_t half = 2 * n_fine - fwd_half;
    const Mat& k = sol.dense->k[half];
    const Vec& s = sol.dense->s[half];
    const Vec h = agent.sys.h + agent.h_price * price_at(fwd_half);
    return agent.sys.a * m - gamma * bcol * ((k * bcol).dot(m) + bcol.dot(s)) + h;
  };

  std::vector<Vec> mean(grid.n_points());
  Vec y = agent.x0;
  mean[0] = y;
  for (std::int64_t i = 0; i < n_fine; ++i) {
    const Vec k1 = deriv(2 * i, y);
    const Vec k2 = deriv(2 * i + 1, y + (0.5 * hf) * k1);
    const Vec k3 = deriv(2 * i + 1, y + (0.5 * hf) * k2);
    const Vec k4 = deriv(2 * i + 2, y + hf * k3);
    y += (hf / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!y.allFinite()) {
      throw std::runtime_error("expected_state: blow-up at t=" +
                               std::to_string(static_cast<double>(i + 1) * hf));
    }
    if ((i + 1) % sub == 0) mean[(i + 1) / sub] = y;
  }
  return mean;
}

PriceTrajectory apply_t5(const GamePopulation& pop, const PriceTrajectory& price,
                         const TimeGrid& grid) {
  pop.validate();
  price.validate(grid);
  const int na = pop.n_agents();
  std::vector<std::vector<Vec>> means(na);
  for (int i = 0; i < na; ++i) {
    const AgentSpec& a = pop.agent(i);
    const BestResponse br = best_response(a, price, grid);
    means[i] = expected_state(a, br, price, grid);
  }
  PriceTrajectory out;
  out.p = Vec(grid.n_points());
  Vec params(na);
  for (std::int64_t k = 0; k < grid.n_points(); ++k) {
    for (int i = 0; i < na; ++i) {
      params(i) = means[i][k](pop.agent(i).param_index());
    }
    out.p(k) = clearing_price(pop, params);
  }
  return out;
}

ContractionReport contraction_bound(const GamePopulation& pop, const TimeGrid& grid) {
  pop.validate();
  double kappa = 0.0;
  double rho = std::numeric_limits<double>::infinity();

  struct KindBounds {
    double m_k = 0.0, m_h = 0.0, m_d = 0.0, lip = 0.0, bnorm = 0.0, inv_r = 0.0;
    int count = 0;
  };
  KindBounds kb[2];

  for (int i = 0; i < pop.n_agents(); ++i) {
    const AgentSpec& a = pop.agent(i);
    const RiccatiSolution sol = solve_riccati(a.sys, a.cost, grid);
    const Vec bcol = a.sys.b.col(0);
    const double gamma = 1.0 / a.cost.r;
    const Mat astar = a.sys.a - gamma * bcol * (sol.k[0] * bcol).transpose();
    const double abscissa = spectral_abscissa(astar);
    if (abscissa >= 0.0) {
      throw std::runtime_error("contraction_bound: agent " + std::to_string(i) +
                               " closed loop is not Hurwitz (abscissa " +
                               std::to_string(abscissa) + ")");
    }
    const double rho_i = -abscissa;
    // Transient bound |exp(A* t)| <= kappa exp(-rho t) fitted over samples.
    double kappa_i = 1.0;
    const double t_max = std::min(grid.t_final, 10.0 / rho_i);
    for (int j = 0; j <= 100; ++j) {
      const double t = t_max * j / 100.0;
      const double norm = operator_norm(expm(astar * t));
      kappa_i = std::max(kappa_i, norm * std::exp(rho_i * t));
    }
    kappa = std::max(kappa, kappa_i);
    rho = std::min(rho, rho_i);

    double m_k = 0.0;
    for (const auto& k : sol.k) m_k = std::max(m_k, operator_norm(k));
    KindBounds& b = kb[a.kind == AgentKind::consumer ? 0 : 1];
    b.m_k = std::max(b.m_k, m_k);
    b.m_h = std::max(b.m_h, a.h_price.norm());
    b.m_d = std::max(b.m_d, a.d_price.norm());
    b.lip = std::max(b.lip, a.pq.lipschitz());
    b.bnorm = std::max(b.bnorm, bcol.norm());
    b.inv_r = std::max(b.inv_r, 1.0 / a.cost.r);
    b.count += 1;
  }

  double sum = 0.0;
  for (const KindBounds& b : kb) {
    if (b.count == 0) continue;
    sum += b.count * b.lip *
           ((b.bnorm * b.bnorm * b.inv_r / (rho * rho)) * (b.m_k * b.m_h + b.m_d) +
            b.m_h / rho);
  }
  ContractionReport rep;
  rep.kappa = kappa;
  rep.rho_decay = rho;
  rep.bound = pop.clearing_gamma * kappa * kappa * sum / pop.n_agents();
  return rep;
}

EquilibriumResult solve_equilibrium(const GamePopulation& pop,
                                    const PriceTrajectory& p_init,
                                    const TimeGrid& grid, double tol,
                                    int max_iters) {
  if (!(tol > 0.0)) throw std::invalid_argument("solve_equilibrium: tol must be positive");
  pop.validate();
  p_init.validate(grid);

  EquilibriumResult out;
  PriceTrajectory cur = p_init;
  bool converged = false;
  for (int it = 0; it < max_iters; ++it) {
    PriceTrajectory next = apply_t5(pop, cur, grid);
    const double residual = (next.p - cur.p).cwiseAbs().maxCoeff();
    out.residual_history.push_back(residual);
    cur = std::move(next);
    ++out.iterations;
    if (residual < tol) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw std::runtime_error("solve_equilibrium: no fixed point after " +
                             std::to_string(max_iters) + " iterations (last residual " +
                             std::to_string(out.residual_history.back()) + ")");
  }
  out.price = cur;
  for (int i = 0; i < pop.n_agents(); ++i) {
    const AgentSpec& a = pop.agent(i);
    out.responses.push_back(best_response(a, cur, grid));
    out.mean_states.push_back(expected_state(a, out.responses.back(), cur, grid));
  }
  return out;
}

SocialCosts social_costs(const GamePopulation& pop, const EquilibriumResult& eq,
                         const SimConfig& cfg) {
  pop.validate();
  if (static_cast<int>(eq.responses.size()) != pop.n_agents()) {
    throw std::invalid_argument("social_costs: equilibrium does not match population");
  }
  SocialCosts out;
  for (int i = 0; i < pop.n_agents(); ++i) {
    const AgentSpec& a = pop.agent(i);
    PriceTrajectory price = eq.price;
    std::vector<Vec> h_nodes = coupled_nodes(a.sys.h, a.h_price, price);
    std::vector<Vec> d_nodes = coupled_nodes(a.cost.d, a.d_price, price);
    const StepPolicy pol =
        make_step_policy_tv(a.sys, a.cost, eq.responses[i].sol, h_nodes, cfg.grid);
    EngineRequest req;
    req.policy = &pol;
    req.x0 = a.x0;
    req.cfg = cfg;
    // Disjoint noise lanes per agent; identical across r sweeps.
    req.cfg.lane_offset = cfg.lane_offset + static_cast<std::uint32_t>(i) * 8u;
    req.q = &a.cost.q;
    req.d_nodes = &d_nodes;
    req.r = a.cost.r;
    const CostEstimate est = run_paths(req).cost;
    out.per_agent.push_back(est);
    out.total += est.total;
    out.state_penalizing += est.state_penalizing;
    out.volatility += est.volatility;
  }
  return out;
}

namespace {

AgentSpec parse_agent(const ConfigSection& sec) {
  AgentSpec a;
  const std::string kind = sec.get("kind");
  if (kind == "consumer") {
    a.kind = AgentKind::consumer;
  } else if (kind == "supplier") {
    a.kind = AgentKind::supplier;
  } else {
    throw std::invalid_argument("agent kind must be consumer or supplier");
  }
  a.sys.a = to_matrix(sec.get("a"), "agent a");
  a.sys.b = to_vector(sec.get("b"), "agent b");
  a.sys.g = to_matrix(sec.get("g"), "agent g");
  a.sys.h = to_vector(sec.get("h"), "agent h");
  a.cost.q = to_matrix(sec.get("q"), "agent q");
  a.cost.d = to_vector(sec.get("d"), "agent d");
  a.cost.r = to_double(sec.get("r"), "agent r");
  a.x0 = to_vector(sec.get("x0"), "agent x0");
  a.h_price = to_vector(sec.get("h_price"), "agent h_price");
  a.d_price = to_vector(sec.get("d_price"), "agent d_price");
  a.pq.slope = to_double(sec.get_or("pq_slope", "1"), "agent pq_slope");
  a.pq.offset = to_double(sec.get_or("pq_offset", "0"), "agent pq_offset");

  static const char* known[] = {"kind", "a", "b", "g", "h", "q", "d", "r",
                                "x0", "h_price", "d_price", "pq_slope", "pq_offset"};
  for (const auto& [key, value] : sec.entries) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw std::invalid_argument("unknown key '" + key + "' in [agent]");
  }
  a.validate();
  return a;
}

}  // namespace

GamePopulation parse_population(const std::string& text) {
  GamePopulation pop;
  for (const auto& sec : parse_config_text(text)) {
    if (sec.name == "market") {
      for (const auto& [key, value] : sec.entries) {
        if (key == "clearing_gamma") {
          pop.clearing_gamma = to_double(value, key);
        } else if (key == "eta") {
          pop.eta = to_double(value, key);
        } else if (key == "theta_bound") {
          pop.theta_bound = to_double(value, key);
        } else {
          throw std::invalid_argument("unknown key '" + key + "' in [market]");
        }
      }
    } else if (sec.name == "agent") {
      AgentSpec a = parse_agent(sec);
      (a.kind == AgentKind::consumer ? pop.consumers : pop.suppliers)
          .push_back(std::move(a));
    } else {
      throw std::invalid_argument("unknown section [" + sec.name + "] in population config");
    }
  }
  pop.validate();
  return pop;
}

GamePopulation load_population(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open population file " + path);
  std::string text((std::istreambuf_iterator<char>(is)),
                   std::istreambuf_iterator<char>());
  return parse_population(text);
}

void export_equilibrium_csv(const std::string& path, const GamePopulation& pop,
                            const EquilibriumResult& eq, const TimeGrid& grid) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << "t,p_star";
  static const char* consumer_comp[] = {"d", "s_recv", "p_own"};
  static const char* supplier_comp[] = {"s", "p_own"};
  for (int i = 0; i < pop.n_agents(); ++i) {
    const AgentSpec& a = pop.agent(i);
    const bool cons = a.kind == AgentKind::consumer;
    const auto tag = (cons ? "c" : "s") +
                     std::to_string(cons ? i : i - static_cast<int>(pop.consumers.size()));
    for (Eigen::Index c = 0; c < a.n(); ++c) {
      os << ',' << tag << '_' << (cons ? consumer_comp[c] : supplier_comp[c]);
    }
  }
  os << '\n';
  for (std::int64_t k = 0; k < grid.n_points(); ++k) {
    os << fmt_g17(grid.time(k)) << ',' << fmt_g17(eq.price.p(k));
    for (int i = 0; i < pop.n_agents(); ++i) {
      for (Eigen::Index c = 0; c < pop.agent(i).n(); ++c) {
        os << ',' << fmt_g17(eq.mean_states[i][k](c));
      }
    }
    os << '\n';
  }
}

void export_residuals_csv(const std::string& path, const EquilibriumResult& eq) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << "iteration,residual\n";
  for (std::size_t i = 0; i < eq.residual_history.size(); ++i) {
    os << i << ',' << fmt_g17(eq.residual_history[i]) << '\n';
  }
}

}  // namespace pmkt
