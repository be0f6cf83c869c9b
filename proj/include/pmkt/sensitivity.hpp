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

#ifndef PMKT_SENSITIVITY_HPP
#define PMKT_SENSITIVITY_HPP

#include <vector>

#include "pmkt/lq.hpp"
#include "pmkt/sde.hpp"

namespace pmkt {

// Derivatives of the value-function coefficients with respect to the control
// price gamma = 1/r, integrated backward alongside the Riccati pass.
struct KGammaSolution {
  std::vector<Mat> grid_vals;  // dK/dgamma at grid nodes
  std::shared_ptr<const std::vector<Mat>> dense;  // node+midpoint values
};

struct SGammaSolution {
  std::vector<Vec> grid_vals;  // dS/dgamma at grid nodes
};

// d/dgamma of K: backward 4th-order integration of
//   d(Kg)/dt = -Kg A - A'Kg + gamma (Kg BB'K + K BB'Kg) + K BB'K,
// terminal Kg(T) = 0. sol must have been produced with r = 1/gamma.
KGammaSolution solve_dk_dgamma(const RiccatiSolution& sol, const LinearSystem& sys,
                               double inv_r, const TimeGrid& grid);

// d/dgamma of S: backward integration of
//   d(Sg)/dt = -A'Sg + gamma K BB'Sg + gamma Kg BB'S + K BB'S - Kg h,
// terminal Sg(T) = 0; consumes dK/dgamma.
SGammaSolution solve_ds_dgamma(const RiccatiSolution& sol,
                               const KGammaSolution& dk, const LinearSystem& sys,
                               const QuadraticCost& cost, double inv_r,
                               const TimeGrid& grid);

// Noise-driven sensitivity of the state-penalizing cost. Evaluates the
// closed-loop trace-integral form: with A*(t) frozen per grid node,
//   Sigma_{k+1} = E Sigma E' + trapezoid(GG'),  E = exp(A* dt)
//   W_k = E'W E + trapezoid(Q)
//   dJsp/dgamma = 2 int Tr(W(t) M(t) Sigma(t)) dt,
//   M = -gamma BB' dK/dgamma - BB'K  (the derivative of A* in gamma).
// Requires the closed loop to be stable in the converged window (checked at
// t = 0); zero noise gives exactly zero.
double djsp_dgamma_steady(const RiccatiSolution& sol, const KGammaSolution& dk,
                          const LinearSystem& sys, const QuadraticCost& cost,
                          double inv_r, const TimeGrid& grid);

// Chain rule dJsp/dr = -dJsp/dgamma / r^2 (gamma = 1/r).
double djsp_dr(double djsp_dgamma_value, double r);

// All gamma-sensitivities of one configuration in a single pass:
// dK/dgamma, dS/dgamma, the cost sensitivity and its chain rule to r.
struct SensitivityBundle {
  KGammaSolution dk;
  SGammaSolution ds;
  double djsp_dgamma = 0.0;
  double djsp_dr = 0.0;
  double inv_r = 0.0;
};

SensitivityBundle solve_sensitivity_bundle(const RiccatiSolution& sol,
                                           const LinearSystem& sys,
                                           const QuadraticCost& cost,
                                           const TimeGrid& grid);

// Noise-free closed-loop first and second moments on the grid:
//   m' = A* m + (h - gamma BB'S),   P' = A*P + PA*' + GG' (P = covariance).
struct Moments {
  std::vector<Vec> mean;
  std::vector<Mat> cov;
  TimeGrid grid;
};

Moments closed_loop_moments(const LinearSystem& sys, const QuadraticCost& cost,
                            const RiccatiSolution& sol, const Vec& x0,
                            const TimeGrid& grid);

// int (E[x'Qx] + 2 E[x]'D) dt from propagated moments (trapezoid).
double state_penalizing_cost_moments(const Moments& mom, const QuadraticCost& cost);

// int E[(u*)^2] dt from propagated moments.
double control_energy_moments(const Moments& mom, const LinearSystem& sys,
                              const QuadraticCost& cost, const RiccatiSolution& sol);

// Noise-only part of the state-penalizing cost, int Tr(Q Sigma) dt, with
// Sigma propagated by the same frozen-exponential stepping the sensitivity
// uses. Central differences of this quantity in gamma are the reference for
// djsp_dgamma_steady.
double noise_cost_integral(const LinearSystem& sys, const QuadraticCost& cost,
                           const RiccatiSolution& sol, const TimeGrid& grid);

struct TradeoffPoint {
  double r = 0.0;
  double efficiency_raw = 0.0;   // -J_sp
  double volatility_raw = 0.0;   // E int u^2 dt
  double efficiency_norm = 0.0;  // min->0, max->1 over the sweep
  double volatility_norm = 0.0;
};

// Deterministic efficiency/volatility sweep over r (moment propagation, no
// Monte Carlo). Values are normalized to [0,1] over the sweep; a sweep of
// one point maps to (0, 0).
std::vector<TradeoffPoint> tradeoff_curve(const LinearSystem& sys, const Mat& q,
                                          const Vec& d,
                                          const std::vector<double>& r_values,
                                          const Vec& x0, const SimConfig& cfg);

}  // namespace pmkt

#endif  // PMKT_SENSITIVITY_HPP
