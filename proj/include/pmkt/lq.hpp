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

#ifndef PMKT_LQ_HPP
#define PMKT_LQ_HPP

#include <functional>
#include <memory>
#include <vector>

#include "pmkt/linalg.hpp"
#include "pmkt/time_grid.hpp"

namespace pmkt {

// Market state (d, s, p): demand (MW), supply (MW), price ($/MWh).
struct MarketState {
  double demand = 0.0;
  double supply = 0.0;
  double price = 0.0;

  Vec to_vec() const;
  static MarketState from_vec(const Vec& v);
};

// Affine dynamics dx = (A x + B u + h) dt + G dw.
struct LinearSystem {
  Mat a;  // n x n drift
  Mat b;  // n x m control channel (m = 1 throughout)
  Mat g;  // n x n noise channel
  Vec h;  // n affine offset

  Eigen::Index n() const { return a.rows(); }
  Eigen::Index m() const { return b.cols(); }

  // Shape/finiteness checks for any system.
  void validate() const;
  // Additional structure of the centralized 3-state market: zero pattern of
  // the drift, B = (0,0,1)^T, diagonal G with no noise on the price, demand
  // decreasing and supply increasing in price.
  void validate_centralized() const;
};

// Running cost x'Qx + 2x'D + r u^2 with Q symmetric PSD and r > 0
// (the volatility coefficient).
struct QuadraticCost {
  Mat q;
  Vec d;
  double r = 1.0;

  void validate(Eigen::Index n) const;
};

// Nonlinear market loss g(d,s,p) = -v min(d,s) + c(s) + c_bo(s-d) with
// production cost c(s) = c_quad s^2 + c_lin s and blackout penalty
// c_bo(x) = bo_coeff max(0,-x)^3 (zero in reserve, C^2 at zero).
struct NonlinearLoss {
  double value_per_unit = 60.0;  // v, consumer value per MWh
  double c_quad = 0.02;
  double c_lin = 20.0;
  double bo_coeff = 5.0;

  double production_cost(double s) const { return (c_quad * s + c_lin) * s; }
  double blackout_cost(double reserve) const;
  double operator()(double d, double s, double p) const;

  void validate() const;
};

double loss_g(const MarketState& x, const NonlinearLoss& loss);

// Internal dense storage of a backward pass: values at every sub-step node
// and midpoint, so later passes (offset, constant, sensitivities) can run
// full-order RK4 against exact coefficient values.
struct RiccatiDense {
  std::vector<Mat> k;  // size 2 * n_steps * substeps + 1
  std::vector<Vec> s;
  int substeps = 1;
};

// Time-gridded solution of the backward Riccati system with terminal
// conditions K(T) = 0, S(T) = 0, q(T) = 0.
struct RiccatiSolution {
  std::vector<Mat> k;      // n_points matrices
  std::vector<Vec> s;      // n_points vectors
  std::vector<double> q;   // n_points scalars
  TimeGrid grid;
  int substeps = 1;
  // max central-difference ODE residual over interior nodes, divided by dt^2
  double residual_c = 0.0;
  std::shared_ptr<const RiccatiDense> dense;
};

// Backward 4th-order fixed-step integration of
//   K' + KA + A'K - K B r^-1 B' K + Q = 0
//   S' + (A - B r^-1 B' K)' S + K h + D = 0
//   q' + 2 S'h - S' B r^-1 B' S + Tr(K G G') = 0
// sequenced K, then S, then q. Stiff configurations (small r) are integrated
// on a deterministic sub-step refinement of the shared grid; reported values
// stay on the grid nodes.
RiccatiSolution solve_riccati(const LinearSystem& sys, const QuadraticCost& cost,
                              const TimeGrid& grid);

// Same system with time-varying forcing h_t, D_t given on grid nodes
// (linearly interpolated to sub-step nodes). Used by the game's best
// responses where the price trajectory enters through h and D.
RiccatiSolution solve_riccati_tv(const LinearSystem& sys,
                                 const QuadraticCost& cost,
                                 const std::vector<Vec>& h_nodes,
                                 const std::vector<Vec>& d_nodes,
                                 const TimeGrid& grid);

// u*(t, x) = -r^-1 B' (K(t) x + S(t)), K and S taken from the nearest grid
// node not later than t.
double optimal_control(const RiccatiSolution& sol, const LinearSystem& sys,
                       const QuadraticCost& cost, double t, const Vec& x);
double optimal_control(const RiccatiSolution& sol, const LinearSystem& sys,
                       const QuadraticCost& cost, double t,
                       const MarketState& x);

// J(x0, u*) = x0'K(0)x0 + 2 x0'S(0) + q(0).
double closed_form_cost(const RiccatiSolution& sol, const Vec& x0);
double closed_form_cost(const RiccatiSolution& sol, const MarketState& x0);

// Axis-aligned sampling box for the quadratic fit.
struct SampleBox {
  Vec lo;
  Vec hi;
  void validate() const;
};

struct FitResult {
  Mat q;            // symmetric PSD (negative eigenvalues clipped)
  Vec d;
  double constant = 0.0;   // fitted constant, not part of the cost model
  double residual_rms = 0.0;
  double zero_fit_rms = 0.0;
};

// Least-squares fit of x'Qx + 2x'D (+ constant) to an arbitrary scalar loss
// over a deterministic low-discrepancy (Halton) sample of the box, followed
// by projection of Q onto its PSD part.
FitResult fit_quadratic(const std::function<double(const Vec&)>& loss,
                        const SampleBox& box, int n_samples);

// Convenience wrapper for the market loss over (d, s, p).
FitResult fit_quadratic_cost(const NonlinearLoss& loss, const SampleBox& box,
                             int n_samples);

QuadraticCost make_cost(const FitResult& fit, double r);

// Max central-difference residual of the K/S/q equations on the stored grid,
// divided by dt^2; the solver records this as residual_c.
double riccati_residual_constant(const RiccatiSolution& sol,
                                 const LinearSystem& sys,
                                 const QuadraticCost& cost);

}  // namespace pmkt

#endif  // PMKT_LQ_HPP
