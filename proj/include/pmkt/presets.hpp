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

#ifndef PMKT_PRESETS_HPP
#define PMKT_PRESETS_HPP

#include "pmkt/game.hpp"
#include "pmkt/hjb.hpp"
#include "pmkt/lq.hpp"

namespace pmkt {

// Reference single-regulator market: mean-reverting demand toward (beta - p)
// and supply toward (p - offset_gamma) at rate rho, price driven by the
// control, with the quadratic cost fitted from the nonlinear loss over the
// operating box.
struct CentralizedMarket {
  LinearSystem sys;
  NonlinearLoss loss;
  SampleBox box;
  TimeGrid grid;
  MarketState x0;
  FitResult fit;
  double rho = 0.05;
  double beta = 75.0;
  double offset_gamma = 25.0;
  double sigma = 2.0;

  QuadraticCost cost(double r) const { return make_cost(fit, r); }
  HjbDrift drift() const;
};

struct CentralizedParams {
  double rho = 0.05;
  double beta = 75.0;
  double offset_gamma = 25.0;
  double sigma = 2.0;
  double t_final = 100.0;
  double dt = 0.05;
  MarketState x0{25.0, 25.0, 50.0};
  NonlinearLoss loss{};
  double box_d_lo = 0.0, box_d_hi = 50.0;
  double box_s_lo = 0.0, box_s_hi = 50.0;
  double box_p_lo = 25.0, box_p_hi = 75.0;
  int fit_samples = 4096;
};

CentralizedMarket make_centralized_market(const CentralizedParams& p = {});

// Minimal one-dimensional configuration with a clean analytic solution
// (K(t) = tanh(T - t) for A=0, B=1, Q=1, r=1): the reference case for solver
// and estimator checks.
struct ScalarTestSystem {
  LinearSystem sys;
  QuadraticCost cost;
  TimeGrid grid;
  Vec x0;
};

ScalarTestSystem make_scalar_test(double t_final = 1.0, double dt = 1e-3,
                                  double sigma = 1.0, double r = 1.0);

struct DemoPopulationParams {
  int n_consumers = 2;
  int n_suppliers = 2;
  double r = 1.0;
  double rho = 0.05;
  double beta = 75.0;
  double offset_gamma = 25.0;
  double sigma = 2.0;
  NonlinearLoss loss{};
  double clearing_gamma = 1.0;
  double eta = 0.0;
  // Curvature of the own-price-parameter cost. O(1) curvature here keeps
  // the price fixed point a contraction even when control is nearly free.
  double bid_penalty = 1.0;
  int fit_samples = 2048;
};

// Two-sided population with identity price-quantity graphs and averaging
// clearing price. Quadratic curvature comes from fitting the consumer's
// nonlinear loss over (d, s_recv) plus the exact own-price terms (own share
// of the clearing price and bid curvature); production cost is quadratic
// already. Linear terms place each agent's cost minimum at the balanced
// operating point (quantities at (beta - offset_gamma)/2, consumer bids at
// beta, supplier bids at offset_gamma, price cleared midway), so the
// residual market price exposure enters through the D_t coupling alone.
GamePopulation make_demo_population(const DemoPopulationParams& p = {});

// Serializes a population into the [market]/[agent] config format
// understood by parse_population.
std::string population_to_config(const GamePopulation& pop);

}  // namespace pmkt

#endif  // PMKT_PRESETS_HPP
