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

#include "pmkt/sensitivity.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace pmkt {

namespace {

void require_dense(const RiccatiSolution& sol, const char* who) {
  if (!sol.dense) {
    throw std::invalid_argument(std::string(who) + ": solution lacks dense integration data");
  }
}

void check_grid(const RiccatiSolution& sol, const TimeGrid& grid, const char* who) {
  if (sol.grid.n_steps != grid.n_steps || sol.grid.dt != grid.dt) {
    throw std::invalid_argument(std::string(who) + ": solution and grid mismatch");
  }
}

// Same reverse-time RK4-with-dense-midpoints driver the Riccati solver uses.
template <class State, class Deriv>
void rk4_reverse(State y, std::int64_t n_fine, double hf, Deriv&& f,
                 double t_final, std::vector<State>& dense, const char* what) {
  dense.resize(2 * n_fine + 1);
  State f_node = f(0, y);
  dense[0] = y;
  for (std::int64_t j = 0; j < n_fine; ++j) {
    const State k1 = f_node;
    const State k2 = f(2 * j + 1, y + (0.5 * hf) * k1);
    const State k3 = f(2 * j + 1, y + (0.5 * hf) * k2);
    const State k4 = f(2 * j + 2, y + hf * k3);
    const State y_next = y + (hf / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const State f_next = f(2 * j + 2, y_next);
    dense[2 * j + 1] = 0.5 * (y + y_next) + (hf / 8.0) * (k1 - f_next);
    dense[2 * j + 2] = y_next;
    if (!y_next.allFinite()) {
      throw std::runtime_error(std::string(what) + " blew up (non-finite) at t=" +
                               std::to_string(t_final - static_cast<double>(j + 1) * hf));
    }
    y = y_next;
    f_node = f_next;
  }
}

Mat closed_loop_at(const LinearSystem& sys, double gamma, const Mat& k) {
  const Vec bcol = sys.b.col(0);
  return sys.a - gamma * bcol * (k * bcol).transpose();
}

// K at the midpoint of grid step k (from the dense backward pass); freezing
// the propagator exponential there keeps the stepping second order.
const Mat& k_midstep(const RiccatiSolution& sol, std::int64_t k) {
  const int sub = sol.dense->substeps;
  return sol.dense->k[(2 * (sol.grid.n_steps - k) - 1) * sub];
}

}  // namespace

KGammaSolution solve_dk_dgamma(const RiccatiSolution& sol, const LinearSystem& sys,
                               double inv_r, const TimeGrid& grid) {
  const double gamma = inv_r;
  require_dense(sol, "solve_dk_dgamma");
  check_grid(sol, grid, "solve_dk_dgamma");
  if (!(gamma > 0.0)) throw std::invalid_argument("solve_dk_dgamma: gamma must be positive");
  const auto n = sys.n();
  const Mat at = sys.a.transpose();
  const Vec bcol = sys.b.col(0);
  const int sub = sol.dense->substeps;
  const std::int64_t n_fine = grid.n_steps * sub;
  const double hf = grid.dt / sub;

  auto dense = std::make_shared<std::vector<Mat>>();
  // Reverse time: d(Kg)/dtau = Kg A + A'Kg - gamma(Kg bb'K + K bb'Kg) - K bb'K.
  auto f = [&](std::int64_t half, const Mat& kg) -> Mat {
    const Mat& k = sol.dense->k[half];
    const Vec kb = k * bcol;
    const Vec kgb = kg * bcol;
    return kg * sys.a + at * kg -
           gamma * (kgb * kb.transpose() + kb * kgb.transpose()) -
           kb * kb.transpose();
  };
  rk4_reverse(Mat(Mat::Zero(n, n)), n_fine, hf, f, grid.t_final, *dense,
              "dK/dgamma");

  KGammaSolution out;
  out.grid_vals.resize(grid.n_points());
  for (std::int64_t i = 0; i <= grid.n_steps; ++i) {
    out.grid_vals[i] = (*dense)[2 * (grid.n_steps - i) * sub];
  }
  out.dense = std::move(dense);
  return out;
}

SGammaSolution solve_ds_dgamma(const RiccatiSolution& sol,
                               const KGammaSolution& dk, const LinearSystem& sys,
                               const QuadraticCost& cost, double inv_r,
                               const TimeGrid& grid) {
  const double gamma = inv_r;
  require_dense(sol, "solve_ds_dgamma");
  check_grid(sol, grid, "solve_ds_dgamma");
  if (!dk.dense) throw std::invalid_argument("solve_ds_dgamma: dK/dgamma lacks dense data");
  cost.validate(sys.n());
  const auto n = sys.n();
  const Mat at = sys.a.transpose();
  const Vec bcol = sys.b.col(0);
  const int sub = sol.dense->substeps;
  const std::int64_t n_fine = grid.n_steps * sub;
  const double hf = grid.dt / sub;

  std::vector<Vec> dense;
  // Reverse time:
  // d(Sg)/dtau = A'Sg - gamma K bb'Sg - gamma Kg bb'S - K bb'S + Kg h.
  auto f = [&](std::int64_t half, const Vec& sg) -> Vec {
    const Mat& k = sol.dense->k[half];
    const Vec& s = sol.dense->s[half];
    const Mat& kg = (*dk.dense)[half];
    const double bs = bcol.dot(s);
    const double bsg = bcol.dot(sg);
    return at * sg - gamma * (k * bcol) * bsg - gamma * (kg * bcol) * bs -
           (k * bcol) * bs + kg * sys.h;
  };
  rk4_reverse(Vec(Vec::Zero(n)), n_fine, hf, f, grid.t_final, dense, "dS/dgamma");

  SGammaSolution out;
  out.grid_vals.resize(grid.n_points());
  for (std::int64_t i = 0; i <= grid.n_steps; ++i) {
    out.grid_vals[i] = dense[2 * (grid.n_steps - i) * sub];
  }
  return out;
}

double djsp_dgamma_steady(const RiccatiSolution& sol, const KGammaSolution& dk,
                          const LinearSystem& sys, const QuadraticCost& cost,
                          double inv_r, const TimeGrid& grid) {
  const double gamma = inv_r;
  check_grid(sol, grid, "djsp_dgamma_steady");
  if (static_cast<std::int64_t>(dk.grid_vals.size()) != grid.n_points()) {
    throw std::invalid_argument("djsp_dgamma_steady: dK/dgamma grid mismatch");
  }
  const auto n = sys.n();
  const Vec bcol = sys.b.col(0);
  const Mat gg = sys.g * sys.g.transpose();
  const double dt = grid.dt;
  const auto ns = grid.n_steps;

  const double abscissa = spectral_abscissa(closed_loop_at(sys, gamma, sol.k[0]));
  if (abscissa > 1e-8) {
    throw std::runtime_error(
        "djsp_dgamma_steady: unstable closed loop (spectral abscissa " +
        std::to_string(abscissa) + ")");
  }

  require_dense(sol, "djsp_dgamma_steady");
  // Per-step propagators with K frozen at the step midpoint.
  std::vector<Mat> prop(ns);
  for (std::int64_t k = 0; k < ns; ++k) {
    prop[k] = expm(closed_loop_at(sys, gamma, k_midstep(sol, k)) * dt);
  }

  // Forward noise covariance.
  std::vector<Mat> sigma(ns + 1);
  sigma[0] = Mat::Zero(n, n);
  for (std::int64_t k = 0; k < ns; ++k) {
    sigma[k + 1] = prop[k] * sigma[k] * prop[k].transpose() +
                   0.5 * dt * (gg + prop[k] * gg * prop[k].transpose());
  }

  // Backward state-cost Gramian.
  std::vector<Mat> w(ns + 1);
  w[ns] = Mat::Zero(n, n);
  for (std::int64_t k = ns - 1; k >= 0; --k) {
    w[k] = prop[k].transpose() * w[k + 1] * prop[k] +
           0.5 * dt * (cost.q + prop[k].transpose() * cost.q * prop[k]);
  }

  // Outer trace integral (trapezoid; both endpoints vanish anyway).
  double acc = 0.0;
  for (std::int64_t k = 0; k <= ns; ++k) {
    const Vec kb = sol.k[k] * bcol;
    const Vec kgb = dk.grid_vals[k] * bcol;
    const Mat m = -bcol * (gamma * kgb + kb).transpose();
    const double integrand = 2.0 * (w[k] * m * sigma[k]).trace();
    const double wgt = (k == 0 || k == ns) ? 0.5 : 1.0;
    acc += wgt * integrand * dt;
  }
  return acc;
}

double djsp_dr(double djsp_dgamma_value, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("djsp_dr: r must be positive");
  return -djsp_dgamma_value / (r * r);
}

SensitivityBundle solve_sensitivity_bundle(const RiccatiSolution& sol,
                                           const LinearSystem& sys,
                                           const QuadraticCost& cost,
                                           const TimeGrid& grid) {
  SensitivityBundle out;
  out.inv_r = 1.0 / cost.r;
  out.dk = solve_dk_dgamma(sol, sys, out.inv_r, grid);
  out.ds = solve_ds_dgamma(sol, out.dk, sys, cost, out.inv_r, grid);
  out.djsp_dgamma = djsp_dgamma_steady(sol, out.dk, sys, cost, out.inv_r, grid);
  out.djsp_dr = djsp_dr(out.djsp_dgamma, cost.r);
  return out;
}

Moments closed_loop_moments(const LinearSystem& sys, const QuadraticCost& cost,
                            const RiccatiSolution& sol, const Vec& x0,
                            const TimeGrid& grid) {
  require_dense(sol, "closed_loop_moments");
  check_grid(sol, grid, "closed_loop_moments");
  const auto n = sys.n();
  if (x0.size() != n) throw std::invalid_argument("closed_loop_moments: x0 size mismatch");
  const double gamma = 1.0 / cost.r;
  const Vec bcol = sys.b.col(0);
  const Mat gg = sys.g * sys.g.transpose();
  const int sub = sol.dense->substeps;
  const std::int64_t n_fine = grid.n_steps * sub;
  const double hf = grid.dt / sub;

  // Joint state [m | P] integrated forward; dense K/S are indexed by
  // tau = T - t, so forward half-index i maps to 2*n_fine - i.
  Mat y(n, n + 1);
  y.col(0) = x0;
  y.rightCols(n) = Mat::Zero(n, n);

  auto deriv = [&](std::int64_t fwd_half, const Mat& cur) -> Mat {
    const std::int64_t half = 2 * n_fine - fwd_half;
    const Mat& k = sol.dense->k[half];
    const Vec& s = sol.dense->s[half];
    const Mat astar = sys.a - gamma * bcol * (k * bcol).transpose();
    Mat out(n, n + 1);
    out.col(0) = astar * cur.col(0) + sys.h - gamma * bcol * bcol.dot(s);
    const Mat p = cur.rightCols(n);
    out.rightCols(n) = astar * p + p * astar.transpose() + gg;
    return out;
  };

  Moments mom;
  mom.grid = grid;
  mom.mean.resize(grid.n_points());
  mom.cov.resize(grid.n_points());
  mom.mean[0] = x0;
  mom.cov[0] = Mat::Zero(n, n);

  for (std::int64_t i = 0; i < n_fine; ++i) {
    const Mat k1 = deriv(2 * i, y);
    const Mat k2 = deriv(2 * i + 1, y + (0.5 * hf) * k1);
    const Mat k3 = deriv(2 * i + 1, y + (0.5 * hf) * k2);
    const Mat k4 = deriv(2 * i + 2, y + hf * k3);
    y += (hf / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!y.allFinite()) {
      throw std::runtime_error("closed_loop_moments: blow-up at t=" +
                               std::to_string(static_cast<double>(i + 1) * hf));
    }
    if ((i + 1) % sub == 0) {
      const std::int64_t node = (i + 1) / sub;
      mom.mean[node] = y.col(0);
      mom.cov[node] = y.rightCols(n);
    }
  }
  return mom;
}

double state_penalizing_cost_moments(const Moments& mom, const QuadraticCost& cost) {
  const auto ns = mom.grid.n_steps;
  double acc = 0.0;
  for (std::int64_t k = 0; k <= ns; ++k) {
    const double integrand = (cost.q * mom.cov[k]).trace() +
                             mom.mean[k].dot(cost.q * mom.mean[k]) +
                             2.0 * mom.mean[k].dot(cost.d);
    acc += ((k == 0 || k == ns) ? 0.5 : 1.0) * integrand * mom.grid.dt;
  }
  return acc;
}

double control_energy_moments(const Moments& mom, const LinearSystem& sys,
                              const QuadraticCost& cost, const RiccatiSolution& sol) {
  const auto ns = mom.grid.n_steps;
  const double gamma = 1.0 / cost.r;
  const Vec bcol = sys.b.col(0);
  double acc = 0.0;
  for (std::int64_t k = 0; k <= ns; ++k) {
    const Vec kb = sol.k[k] * bcol;
    const double mean_u = -gamma * (kb.dot(mom.mean[k]) + bcol.dot(sol.s[k]));
    const double var_u = gamma * gamma * kb.dot(mom.cov[k] * kb);
    const double integrand = mean_u * mean_u + var_u;
    acc += ((k == 0 || k == ns) ? 0.5 : 1.0) * integrand * mom.grid.dt;
  }
  return acc;
}

double noise_cost_integral(const LinearSystem& sys, const QuadraticCost& cost,
                           const RiccatiSolution& sol, const TimeGrid& grid) {
  check_grid(sol, grid, "noise_cost_integral");
  require_dense(sol, "noise_cost_integral");
  const auto n = sys.n();
  const double gamma = 1.0 / cost.r;
  const Mat gg = sys.g * sys.g.transpose();
  const double dt = grid.dt;
  Mat sigma = Mat::Zero(n, n);
  double acc = 0.0;
  for (std::int64_t k = 0; k < grid.n_steps; ++k) {
    acc += ((k == 0) ? 0.5 : 1.0) * (cost.q * sigma).trace() * dt;
    const Mat e = expm(closed_loop_at(sys, gamma, k_midstep(sol, k)) * dt);
    sigma = e * sigma * e.transpose() + 0.5 * dt * (gg + e * gg * e.transpose());
  }
  acc += 0.5 * (cost.q * sigma).trace() * dt;
  return acc;
}

std::vector<TradeoffPoint> tradeoff_curve(const LinearSystem& sys, const Mat& q,
                                          const Vec& d,
                                          const std::vector<double>& r_values,
                                          const Vec& x0, const SimConfig& cfg) {
  if (r_values.empty()) throw std::invalid_argument("tradeoff_curve: empty r sweep");
  for (std::size_t i = 0; i < r_values.size(); ++i) {
    if (!(r_values[i] > 0.0))
      throw std::invalid_argument("tradeoff_curve: r values must be positive");
    if (i > 0 && r_values[i] < r_values[i - 1])
      throw std::invalid_argument("tradeoff_curve: r values must be sorted ascending");
  }
  std::vector<TradeoffPoint> pts(r_values.size());
  for (std::size_t i = 0; i < r_values.size(); ++i) {
    const QuadraticCost cost{q, d, r_values[i]};
    const RiccatiSolution sol = solve_riccati(sys, cost, cfg.grid);
    const Moments mom = closed_loop_moments(sys, cost, sol, x0, cfg.grid);
    pts[i].r = r_values[i];
    pts[i].efficiency_raw = -state_penalizing_cost_moments(mom, cost);
    pts[i].volatility_raw = control_energy_moments(mom, sys, cost, sol);
  }
  auto normalize = [&](double TradeoffPoint::* raw, double TradeoffPoint::* norm) {
    double lo = pts[0].*raw, hi = pts[0].*raw;
    for (const auto& p : pts) {
      lo = std::min(lo, p.*raw);
      hi = std::max(hi, p.*raw);
    }
    for (auto& p : pts) {
      p.*norm = (hi > lo) ? (p.*raw - lo) / (hi - lo) : 0.0;
    }
  };
  normalize(&TradeoffPoint::efficiency_raw, &TradeoffPoint::efficiency_norm);
  normalize(&TradeoffPoint::volatility_raw, &TradeoffPoint::volatility_norm);
  return pts;
}

}  // namespace pmkt
