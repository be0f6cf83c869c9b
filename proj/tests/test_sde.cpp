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

#include <doctest.h>

#include <cmath>

#include "pmkt/presets.hpp"
#include "pmkt/sde.hpp"
#include "support/oracles.hpp"

using namespace pmkt;

namespace {

SimConfig cfg_for(const TimeGrid& grid, int n_paths, std::uint64_t seed = 1,
                  int n_threads = 1) {
  SimConfig cfg;
  cfg.grid = grid;
  cfg.n_paths = n_paths;
  cfg.seed = seed;
  cfg.n_threads = n_threads;
  return cfg;
}

}  // namespace

TEST_CASE("noise-free closed-loop fixed point stays put") {
  ScalarTestSystem t = make_scalar_test(1.0, 0.05, /*sigma=*/0.0);
  t.sys.a = Mat::Constant(1, 1, -1.0);
  t.sys.h = Vec::Constant(1, 2.0);
  t.cost.q = Mat::Zero(1, 1);  // no cost => zero feedback
  const RiccatiSolution sol = solve_riccati(t.sys, t.cost, t.grid);
  const auto trajs = simulate_closed_loop(t.sys, t.cost, sol,
                                          Vec::Constant(1, 2.0), cfg_for(t.grid, 3));
  for (const auto& tr : trajs) {
    for (std::int64_t k = 0; k <= t.grid.n_steps; ++k) {
      CHECK(tr.states(0, k) == doctest::Approx(2.0).epsilon(1e-14));
    }
    for (std::int64_t k = 0; k < t.grid.n_steps; ++k) CHECK(tr.controls(k) == 0.0);
  }
}

TEST_CASE("identical configs give bit-identical paths on any thread count") {
  const ScalarTestSystem t = make_scalar_test(1.0, 0.05);
  const RiccatiSolution sol = solve_riccati(t.sys, t.cost, t.grid);
  const auto a = simulate_closed_loop(t.sys, t.cost, sol, t.x0, cfg_for(t.grid, 40, 7, 1));
  const auto b = simulate_closed_loop(t.sys, t.cost, sol, t.x0, cfg_for(t.grid, 40, 7, 1));
  const auto c = simulate_closed_loop(t.sys, t.cost, sol, t.x0, cfg_for(t.grid, 40, 7, 2));
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].states == b[i].states);
    CHECK(a[i].controls == b[i].controls);
    CHECK(a[i].states == c[i].states);
    CHECK(a[i].controls == c[i].controls);
  }
}

TEST_CASE("common random numbers: draws never depend on the cost") {
  const ScalarTestSystem t = make_scalar_test(1.0, 0.05);
  const RiccatiSolution sol_a = solve_riccati(t.sys, t.cost, t.grid);
  QuadraticCost expensive = t.cost;
  expensive.r = 1000.0;
  const RiccatiSolution sol_b = solve_riccati(t.sys, expensive, t.grid);

  auto noise_of = [&](const QuadraticCost& cost, const RiccatiSolution& sol) {
    const StepPolicy pol = make_step_policy(t.sys, cost, sol, t.grid);
    EngineRequest req;
    req.policy = &pol;
    req.x0 = t.x0;
    req.cfg = cfg_for(t.grid, 16, 5);
    req.want_noise = true;
    return run_paths(req).noise;
  };
  const auto za = noise_of(t.cost, sol_a);
  const auto zb = noise_of(expensive, sol_b);
  REQUIRE(za.size() == zb.size());
  CHECK(za == zb);
}

TEST_CASE("Monte Carlo mean cost agrees with the closed form") {
  const ScalarTestSystem t = make_scalar_test(1.0, 0.05);
  const RiccatiSolution sol = solve_riccati(t.sys, t.cost, t.grid);
  const double exact = closed_form_cost(sol, t.x0);
  const CostEstimate est = simulate_costs(t.sys, t.cost, sol, t.x0,
                                          cfg_for(t.grid, 10000, 21));
  INFO("exact ", exact, " estimate ", est.total, " se ", est.se_total);
  CHECK(std::fabs(est.total - exact) <= 3.0 * est.se_total);
}

TEST_CASE("trajectory-based and streaming estimates coincide") {
  const ScalarTestSystem t = make_scalar_test(1.0, 0.05);
  const RiccatiSolution sol = solve_riccati(t.sys, t.cost, t.grid);
  const auto trajs =
      simulate_closed_loop(t.sys, t.cost, sol, t.x0, cfg_for(t.grid, 200, 3));
  const CostEstimate from_trajs = estimate_costs(trajs, t.cost);
  const CostEstimate streamed =
      simulate_costs(t.sys, t.cost, sol, t.x0, cfg_for(t.grid, 200, 3));
  CHECK(from_trajs.total == doctest::Approx(streamed.total).epsilon(1e-12));
  CHECK(from_trajs.state_penalizing ==
        doctest::Approx(streamed.state_penalizing).epsilon(1e-12));
  CHECK(from_trajs.volatility == doctest::Approx(streamed.volatility).epsilon(1e-12));
  CHECK(from_trajs.se_total == doctest::Approx(streamed.se_total).epsilon(1e-10));
}

TEST_CASE("cost estimate accounting and analytic specials") {
  const TimeGrid grid = make_time_grid(2.0, 0.1);
  SUBCASE("zero trajectory with zero D gives all zeros") {
    Trajectory tr;
    tr.states = Mat::Zero(1, grid.n_points());
    tr.controls = Vec::Zero(grid.n_steps);
    tr.grid = grid;
    QuadraticCost cost{Mat::Ones(1, 1), Vec::Zero(1), 1.0};
    const CostEstimate est = estimate_costs({tr}, cost);
    CHECK(est.total == 0.0);
    CHECK(est.state_penalizing == 0.0);
    CHECK(est.volatility == 0.0);
  }
  SUBCASE("constant control integrates to c^2 T exactly") {
    Trajectory tr;
    tr.states = Mat::Zero(1, grid.n_points());
    tr.controls = Vec::Constant(grid.n_steps, 3.0);
    tr.grid = grid;
    QuadraticCost cost{Mat::Zero(1, 1), Vec::Zero(1), 2.0};
    const CostEstimate est = estimate_costs({tr}, cost);
    CHECK(est.volatility == doctest::Approx(9.0 * 2.0).epsilon(1e-12));
    CHECK(est.total == doctest::Approx(2.0 * 9.0 * 2.0).epsilon(1e-12));
  }
  SUBCASE("total = state_penalizing + r * volatility on a real run") {
    const ScalarTestSystem t = make_scalar_test(1.0, 0.05, 1.0, 2.5);
    const RiccatiSolution sol = solve_riccati(t.sys, t.cost, t.grid);
    const CostEstimate est =
        simulate_costs(t.sys, t.cost, sol, t.x0, cfg_for(t.grid, 500, 9));
    CHECK(est.total ==
          doctest::Approx(est.state_penalizing + t.cost.r * est.volatility)
              .epsilon(1e-12));
  }
  SUBCASE("empty list rejected") {
    QuadraticCost cost{Mat::Ones(1, 1), Vec::Zero(1), 1.0};
    CHECK_THROWS_AS(estimate_costs({}, cost), std::invalid_argument);
  }
}

TEST_CASE("mean absolute demand-supply gap") {
  const TimeGrid grid = make_time_grid(1.0, 0.5);
  Trajectory tr;
  tr.states = Mat::Zero(2, grid.n_points());
  tr.controls = Vec::Zero(grid.n_steps);
  tr.grid = grid;
  SUBCASE("equal processes give zero") { CHECK(mean_abs_gap({tr}) == 0.0); }
  SUBCASE("constant offset is returned exactly") {
    tr.states.row(0) = Vec::Constant(grid.n_points(), 5.0).transpose();
    tr.states.row(1) = Vec::Constant(grid.n_points(), 3.0).transpose();
    CHECK(mean_abs_gap({tr}) == doctest::Approx(2.0));
  }
  SUBCASE("one-dimensional states are rejected") {
    Trajectory bad;
    bad.states = Mat::Zero(1, grid.n_points());
    bad.controls = Vec::Zero(grid.n_steps);
    bad.grid = grid;
    CHECK_THROWS_AS(mean_abs_gap({bad}), std::invalid_argument);
  }
}

TEST_CASE("weak convergence: halving dt moves the mean within noise") {
  const ScalarTestSystem coarse = make_scalar_test(1.0, 0.05);
  const ScalarTestSystem fine = make_scalar_test(1.0, 0.025);
  const CostEstimate a = simulate_costs(
      coarse.sys, coarse.cost, solve_riccati(coarse.sys, coarse.cost, coarse.grid),
      coarse.x0, cfg_for(coarse.grid, 10000, 31));
  const CostEstimate b = simulate_costs(
      fine.sys, fine.cost, solve_riccati(fine.sys, fine.cost, fine.grid),
      fine.x0, cfg_for(fine.grid, 10000, 32));
  const double combined =
      std::sqrt(a.se_total * a.se_total + b.se_total * b.se_total);
  INFO("coarse ", a.total, " fine ", b.total, " combined se ", combined);
  CHECK(std::fabs(a.total - b.total) <= 3.0 * combined);
}

TEST_CASE("diverging paths report the failing path and step") {
  // Hand-built stepping map multiplying the state by 1e200 per step:
  // overflow is certain within two steps.
  const TimeGrid grid = make_time_grid(1.0, 0.05);
  StepPolicy pol;
  pol.n = 1;
  pol.grid = grid;
  pol.m.assign(grid.n_steps, 1e200);
  pol.c.assign(grid.n_steps, 0.0);
  pol.frow.assign(grid.n_steps, 0.0);
  pol.foff.assign(grid.n_steps, 0.0);
  pol.gs.assign(1, 0.0);
  EngineRequest req;
  req.policy = &pol;
  req.x0 = Vec::Ones(1);
  req.cfg = cfg_for(grid, 4);
  CHECK_THROWS_WITH_AS(run_paths(req), doctest::Contains("at step"),
                       std::runtime_error);
}

TEST_CASE("market simulations order price volatility by r") {
  const CentralizedMarket mkt = make_centralized_market();
  auto incr_var_at = [&](double r) {
    const QuadraticCost cost = mkt.cost(r);
    const RiccatiSolution sol = solve_riccati(mkt.sys, cost, mkt.grid);
    const StepPolicy pol = make_step_policy(mkt.sys, cost, sol, mkt.grid);
    EngineRequest req;
    req.policy = &pol;
    req.x0 = mkt.x0.to_vec();
    req.cfg = cfg_for(mkt.grid, 64, 17, 2);
    req.incr_comp = 2;
    return run_paths(req).incr_variance;
  };
  const double wild = incr_var_at(0.01);
  const double tame = incr_var_at(1000.0);
  INFO("var(dp) at r=0.01: ", wild, ", at r=1000: ", tame);
  CHECK(wild > 10.0 * tame);
}

TEST_CASE("state-penalizing cost grows with r under common random numbers") {
  const CentralizedMarket mkt = make_centralized_market();
  double prev = -std::numeric_limits<double>::infinity();
  for (double r : {0.01, 1.0, 1000.0}) {
    const QuadraticCost cost = mkt.cost(r);
    const RiccatiSolution sol = solve_riccati(mkt.sys, cost, mkt.grid);
    const CostEstimate est = simulate_costs(mkt.sys, cost, sol, mkt.x0.to_vec(),
                                            cfg_for(mkt.grid, 256, 13, 2));
    CHECK(est.state_penalizing >= prev);
    prev = est.state_penalizing;
  }
}
