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

#ifndef PMKT_HJB_HPP
#define PMKT_HJB_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pmkt/lq.hpp"
#include "pmkt/time_grid.hpp"

namespace pmkt {

// Node-centered box grid over (d, s, p).
struct Grid3D {
  std::array<double, 3> lo{};
  std::array<double, 3> hi{};
  std::array<int, 3> n{};  // nodes per axis, faces included
  int boundary_padding = 1;

  double coord(int axis, int i) const {
    return lo[axis] + step(axis) * static_cast<double>(i);
  }
  double step(int axis) const {
    return (hi[axis] - lo[axis]) / static_cast<double>(n[axis] - 1);
  }
  std::int64_t n_nodes() const {
    return static_cast<std::int64_t>(n[0]) * n[1] * n[2];
  }
  std::int64_t index(int id, int is, int ip) const {
    return (static_cast<std::int64_t>(id) * n[1] + is) * n[2] + ip;
  }
  bool interior(int id, int is, int ip) const {
    return id >= boundary_padding && id < n[0] - boundary_padding &&
           is >= boundary_padding && is < n[1] - boundary_padding &&
           ip >= boundary_padding && ip < n[2] - boundary_padding;
  }
  void validate() const;
};

// Affine drifts f^d(d,p) = add*d + adp*p + bd and f^s(s,p) = ass*s + asp*p + bs.
struct HjbDrift {
  double add = 0.0, adp = 0.0, bd = 0.0;
  double ass = 0.0, asp = 0.0, bs = 0.0;

  double fd(double d, double p) const { return add * d + adp * p + bd; }
  double fs(double s, double p) const { return ass * s + asp * p + bs; }
};

// Value of the perturbed dynamic-programming equation on (time, d, s, p)
// nodes, solved backward from V(T, .) = 0 by an explicit monotone scheme:
// drift terms upwinded by sign, diffusion central, and the extremal price
// increment realized pointwise as u = -sign(dV/dp) u_max.
struct ValueField {
  std::vector<double> v;  // (n_steps+1) slices, each grid.n_nodes()
  Grid3D grid;
  TimeGrid tgrid;
  double epsilon = 0.0;
  double u_max = 0.0;
  double cfl = 0.0;  // worst-case explicit-stability number (must be <= 1)

  double at(std::int64_t t_idx, int id, int is, int ip) const {
    return v[t_idx * grid.n_nodes() + grid.index(id, is, ip)];
  }
};

struct HjbProblem {
  Grid3D grid;
  HjbDrift drift;
  NonlinearLoss loss;
  // Optional replacement for the market loss (degenerate and shifted-loss
  // configurations); receives (d, s).
  std::function<double(double, double)> loss_override;
  double sigma_d = 2.0;
  double sigma_s = 2.0;
  double epsilon = 0.5;
  double u_max = 5.0;

  double running_loss(double d, double s) const {
    return loss_override ? loss_override(d, s) : loss(d, s, 0.0);
  }
};

// Explicit backward sweep. Throws when the reported CFL number exceeds 1.
ValueField solve_hjb(const HjbProblem& prob, const TimeGrid& tgrid);

// Bang-bang policy per (time, node): -sign(dV/dp) * u_max with central
// differences inside, one-sided at faces; zero on the numerically flat set
// (|dV/dp| < 1e-12).
struct PolicyField {
  std::vector<double> u;  // same layout as ValueField::v
  Grid3D grid;
  TimeGrid tgrid;
  double u_max = 0.0;

  double at(std::int64_t t_idx, int id, int is, int ip) const {
    return u[t_idx * grid.n_nodes() + grid.index(id, is, ip)];
  }
};

PolicyField extract_policy(const ValueField& field);

// Fraction of interior nodes of the t=0 slice at the control bounds.
double bang_bang_fraction(const PolicyField& policy);

// Monte Carlo rollout of a policy under the perturbed dynamics
// (dp = u dt + epsilon dW); returns the mean accumulated loss, the oracle
// against which V(0, x0) is checked.
double rollout_policy_cost(const HjbProblem& prob, const PolicyField& policy,
                           const TimeGrid& tgrid, const MarketState& x0,
                           int n_paths, std::uint64_t seed);

// CSV of the t=0 slice: d,s,p,value,control.
void export_hjb_csv(const std::string& path, const ValueField& field,
                    const PolicyField& policy);

}  // namespace pmkt

#endif  // PMKT_HJB_HPP
