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

#include "pmkt/lq.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace pmkt {

Vec MarketState::to_vec() const {
  Vec v(3);
  v << demand, supply, price;
  return v;
}

MarketState MarketState::from_vec(const Vec& v) {
  if (v.size() != 3) throw std::invalid_argument("MarketState: expected 3 components");
  return MarketState{v(0), v(1), v(2)};
}

void LinearSystem::validate() const {
  const auto nn = a.rows();
  if (a.cols() != nn) throw std::invalid_argument("LinearSystem: A must be square");
  if (b.rows() != nn || b.cols() < 1)
    throw std::invalid_argument("LinearSystem: B shape mismatch");
  if (g.rows() != nn || g.cols() != nn)
    throw std::invalid_argument("LinearSystem: G shape mismatch");
  if (h.size() != nn) throw std::invalid_argument("LinearSystem: h size mismatch");
  if (!all_finite(a) || !all_finite(b) || !all_finite(g) || !all_finite(h))
    throw std::invalid_argument("LinearSystem: non-finite entry");
}

void LinearSystem::validate_centralized() const {
  validate();
  if (n() != 3 || m() != 1)
    throw std::invalid_argument("centralized system must have n=3, m=1");
  if (a(0, 1) != 0.0 || a(1, 0) != 0.0 || a(2, 0) != 0.0 || a(2, 1) != 0.0 ||
      a(2, 2) != 0.0) {
    throw std::invalid_argument("centralized drift has nonzero where structure requires 0");
  }
  if (!(a(0, 2) < 0.0)) throw std::invalid_argument("demand must decrease in price");
  if (!(a(1, 2) > 0.0)) throw std::invalid_argument("supply must increase in price");
  if (b(0, 0) != 0.0 || b(1, 0) != 0.0 || b(2, 0) != 1.0)
    throw std::invalid_argument("control channel must be (0,0,1)");
  for (Eigen::Index i = 0; i < 3; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) {
      if (i != j && g(i, j) != 0.0)
        throw std::invalid_argument("noise channel must be diagonal");
    }
  }
  if (g(2, 2) != 0.0) throw std::invalid_argument("price carries no exogenous noise");
}

void QuadraticCost::validate(Eigen::Index n) const {
  if (q.rows() != n || q.cols() != n)
    throw std::invalid_argument("QuadraticCost: Q shape mismatch");
  if (d.size() != n) throw std::invalid_argument("QuadraticCost: D size mismatch");
  if (!(r > 0.0)) throw std::invalid_argument("QuadraticCost: r must be positive");
  if (!all_finite(q) || !all_finite(d) || !std::isfinite(r))
    throw std::invalid_argument("QuadraticCost: non-finite entry");
  if (!is_symmetric(q, 1e-12 * std::max(1.0, q.cwiseAbs().maxCoeff())))
    throw std::invalid_argument("QuadraticCost: Q must be symmetric");
  if (!is_psd(q, 1e-10 * std::max(1.0, q.cwiseAbs().maxCoeff())))
    throw std::invalid_argument("QuadraticCost: Q must be PSD");
}

double NonlinearLoss::blackout_cost(double reserve) const {
  if (reserve >= 0.0) return 0.0;
  const double x = -reserve;
  return bo_coeff * x * x * x;
}

double NonlinearLoss::operator()(double d, double s, double /*p*/) const {
  return -value_per_unit * std::min(d, s) + production_cost(s) +
         blackout_cost(s - d);
}

void NonlinearLoss::validate() const {
  if (!(value_per_unit > 0.0)) throw std::invalid_argument("loss: v must be positive");
  if (!(c_quad > 0.0)) throw std::invalid_argument("loss: production cost must be strictly convex");
  if (c_lin < 0.0) throw std::invalid_argument("loss: production cost must be increasing");
  if (!(bo_coeff > 0.0)) throw std::invalid_argument("loss: blackout penalty must be decreasing below zero reserve");
}

double loss_g(const MarketState& x, const NonlinearLoss& loss) {
  return loss(x.demand, x.supply, x.price);
}

namespace {

// Deterministic sub-step refinement for stiff configurations: a conservative
// estimate of the fastest backward Riccati mode, 2|A| + 2|B| sqrt(|Q|/r).
int pick_substeps(const LinearSystem& sys, const QuadraticCost& cost, double dt) {
  const double gamma = 1.0 / cost.r;
  const double lam = 2.0 * operator_norm(sys.a) +
                     2.0 * operator_norm(sys.b) *
                         std::sqrt(std::max(0.0, gamma * operator_norm(cost.q)));
  const double m_raw = std::ceil(dt * lam / 1.2);
  if (!(m_raw <= 65536.0)) {
    throw std::runtime_error("solve_riccati: configuration too stiff (substeps=" +
                             std::to_string(m_raw) + ")");
  }
  return std::max(1, static_cast<int>(m_raw));
}

void ensure_finite(const Mat& y, double t_fail, const char* what) {
  if (!all_finite(y)) {
    throw std::runtime_error(std::string(what) + " blew up (non-finite) at t=" +
                             std::to_string(t_fail));
  }
}
void ensure_finite(const Vec& y, double t_fail, const char* what) {
  if (!all_finite(y)) {
    throw std::runtime_error(std::string(what) + " blew up (non-finite) at t=" +
                             std::to_string(t_fail));
  }
}

// Classical RK4 in reversed time with dense node+midpoint output. The
// derivative callback receives a half-index into dense arrays of previously
// integrated passes: 2*j for node j, 2*j+1 for the midpoint of step j.
// Midpoints of this pass are stored via the cubic Hermite half-step formula,
// keeping downstream passes at full order.
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
    dense[2 * j + 1] =
        0.5 * (y + y_next) + (hf / 8.0) * (k1 - f_next);
    dense[2 * j + 2] = y_next;
    ensure_finite(y_next, t_final - static_cast<double>(j + 1) * hf, what);
    y = y_next;
    f_node = f_next;
  }
}

// Linear interpolation of grid-node forcing to a fine half-index.
Vec forcing_at(const std::vector<Vec>& nodes, std::int64_t half, int substeps,
               double t_final, double dt) {
  // half indexes reversed fine time: tau = half * hf / 2 from the horizon end.
  const double tau = static_cast<double>(half) * (dt / substeps) * 0.5;
  double pos = (t_final - tau) / dt;  // fractional grid index
  const auto last = static_cast<std::int64_t>(nodes.size()) - 1;
  if (pos <= 0.0) return nodes.front();
  if (pos >= static_cast<double>(last)) return nodes.back();
  const auto k = static_cast<std::int64_t>(pos);
  const double w = pos - static_cast<double>(k);
  if (w == 0.0) return nodes[k];
  return (1.0 - w) * nodes[k] + w * nodes[k + 1];
}

RiccatiSolution solve_riccati_impl(const LinearSystem& sys,
                                   const QuadraticCost& cost,
                                   const std::vector<Vec>* h_nodes,
                                   const std::vector<Vec>* d_nodes,
                                   const TimeGrid& grid) {
  sys.validate();
  cost.validate(sys.n());
  if (sys.m() != 1) throw std::invalid_argument("solve_riccati: expected scalar control");
  const auto n = sys.n();
  const double gamma = 1.0 / cost.r;
  const int sub = pick_substeps(sys, cost, grid.dt);
  const std::int64_t n_fine = grid.n_steps * sub;
  const double hf = grid.dt / sub;

  const Mat at = sys.a.transpose();
  const Vec bcol = sys.b.col(0);

  auto dense = std::make_shared<RiccatiDense>();
  dense->substeps = sub;

  // K pass (reverse time): dM/dtau = M A + A'M - gamma (M b)(b'M) + Q.
  {
    auto fk = [&](std::int64_t, const Mat& mcur) -> Mat {
      const Vec mb = mcur * bcol;
      return mcur * sys.a + at * mcur - gamma * (mb * mb.transpose()) + cost.q;
    };
    rk4_reverse(Mat(Mat::Zero(n, n)), n_fine, hf, fk, grid.t_final, dense->k,
                "Riccati K");
  }

  // S pass: dN/dtau = (A - gamma b b'M)'N + M h + D.
  {
    auto fs = [&](std::int64_t half, const Vec& scur) -> Vec {
      const Mat& mcur = dense->k[half];
      const Vec h = h_nodes != nullptr
                        ? forcing_at(*h_nodes, half, sub, grid.t_final, grid.dt)
                        : sys.h;
      const Vec d = d_nodes != nullptr
                        ? forcing_at(*d_nodes, half, sub, grid.t_final, grid.dt)
                        : cost.d;
      const Vec astar_t_s = at * scur - gamma * (mcur * bcol) * bcol.dot(scur);
      return astar_t_s + mcur * h + d;
    };
    rk4_reverse(Vec(Vec::Zero(n)), n_fine, hf, fs, grid.t_final, dense->s,
                "Riccati S");
  }

  // q pass: dw/dtau = 2 S'h - gamma (b'S)^2 + Tr(K G G').
  const Mat gg = sys.g * sys.g.transpose();
  std::vector<Mat> q_dense;  // 1x1 "matrices" reuse the driver
  {
    auto fq = [&](std::int64_t half, const Mat& /*w*/) -> Mat {
      const Mat& mcur = dense->k[half];
      const Vec& scur = dense->s[half];
      const Vec h = h_nodes != nullptr
                        ? forcing_at(*h_nodes, half, sub, grid.t_final, grid.dt)
                        : sys.h;
      const double bs = bcol.dot(scur);
      Mat out(1, 1);
      out(0, 0) = 2.0 * scur.dot(h) - gamma * bs * bs + (mcur * gg).trace();
      return out;
    };
    rk4_reverse(Mat(Mat::Zero(1, 1)), n_fine, hf, fq, grid.t_final, q_dense,
                "Riccati q");
  }

  RiccatiSolution sol;
  sol.grid = grid;
  sol.substeps = sub;
  sol.k.resize(grid.n_points());
  sol.s.resize(grid.n_points());
  sol.q.resize(grid.n_points());
  for (std::int64_t i = 0; i <= grid.n_steps; ++i) {
    // dense index of grid node i: tau = (n_steps - i) * dt.
    const std::int64_t half = 2 * (grid.n_steps - i) * sub;
    sol.k[i] = dense->k[half];
    sol.s[i] = dense->s[half];
    sol.q[i] = q_dense[half](0, 0);
  }
  sol.dense = std::move(dense);
  sol.residual_c = riccati_residual_constant(sol, sys, cost);
  return sol;
}

}  // namespace

RiccatiSolution solve_riccati(const LinearSystem& sys, const QuadraticCost& cost,
                              const TimeGrid& grid) {
  return solve_riccati_impl(sys, cost, nullptr, nullptr, grid);
}

RiccatiSolution solve_riccati_tv(const LinearSystem& sys,
                                 const QuadraticCost& cost,
                                 const std::vector<Vec>& h_nodes,
                                 const std::vector<Vec>& d_nodes,
                                 const TimeGrid& grid) {
  if (static_cast<std::int64_t>(h_nodes.size()) != grid.n_points() ||
      static_cast<std::int64_t>(d_nodes.size()) != grid.n_points()) {
    throw std::invalid_argument("solve_riccati_tv: forcing must be given on grid nodes");
  }
  return solve_riccati_impl(sys, cost, &h_nodes, &d_nodes, grid);
}

double optimal_control(const RiccatiSolution& sol, const LinearSystem& sys,
                       const QuadraticCost& cost, double t, const Vec& x) {
  if (x.size() != sys.n()) throw std::invalid_argument("optimal_control: state size mismatch");
  const auto k = sol.grid.index_at(t);
  const Vec bcol = sys.b.col(0);
  return -(bcol.dot(sol.k[k] * x + sol.s[k])) / cost.r;
}

double optimal_control(const RiccatiSolution& sol, const LinearSystem& sys,
                       const QuadraticCost& cost, double t,
                       const MarketState& x) {
  return optimal_control(sol, sys, cost, t, x.to_vec());
}

double closed_form_cost(const RiccatiSolution& sol, const Vec& x0) {
  if (x0.size() != sol.k.front().rows())
    throw std::invalid_argument("closed_form_cost: state size mismatch");
  return x0.dot(sol.k.front() * x0) + 2.0 * x0.dot(sol.s.front()) + sol.q.front();
}

double closed_form_cost(const RiccatiSolution& sol, const MarketState& x0) {
  return closed_form_cost(sol, x0.to_vec());
}

void SampleBox::validate() const {
  if (lo.size() != hi.size() || lo.size() == 0)
    throw std::invalid_argument("SampleBox: bad shape");
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    if (!(hi(i) > lo(i)))
      throw std::invalid_argument("SampleBox: degenerate axis " + std::to_string(i));
  }
}

namespace {

double halton(std::int64_t index, int base) {
  double f = 1.0, r = 0.0;
  while (index > 0) {
    f /= base;
    r += f * static_cast<double>(index % base);
    index /= base;
  }
  return r;
}

constexpr int kHaltonBases[6] = {2, 3, 5, 7, 11, 13};

}  // namespace

FitResult fit_quadratic(const std::function<double(const Vec&)>& loss,
                        const SampleBox& box, int n_samples) {
  box.validate();
  const auto n = box.lo.size();
  if (n > 6) throw std::invalid_argument("fit_quadratic: at most 6 dimensions");
  const int n_quad = static_cast<int>(n * (n + 1) / 2);
  const int n_feat = n_quad + static_cast<int>(n) + 1;
  if (n_samples < 10 * (n_feat - 1)) {
    throw std::invalid_argument("fit_quadratic: need at least 10 samples per coefficient");
  }

  Mat design(n_samples, n_feat);
  Vec y(n_samples);
  Vec x(n);
  for (int i = 0; i < n_samples; ++i) {
    for (Eigen::Index dim = 0; dim < n; ++dim) {
      const double u = halton(i + 1, kHaltonBases[dim]);
      x(dim) = box.lo(dim) + u * (box.hi(dim) - box.lo(dim));
    }
    int col = 0;
    for (Eigen::Index a = 0; a < n; ++a) {
      for (Eigen::Index b = a; b < n; ++b) {
        design(i, col++) = (a == b) ? x(a) * x(a) : 2.0 * x(a) * x(b);
      }
    }
    for (Eigen::Index a = 0; a < n; ++a) design(i, col++) = 2.0 * x(a);
    design(i, col++) = 1.0;
    y(i) = loss(x);
  }

  Eigen::ColPivHouseholderQR<Mat> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < n_feat) {
    throw std::runtime_error("fit_quadratic: rank-deficient normal equations (box too small or degenerate loss)");
  }
  const Vec theta = qr.solve(y);

  FitResult out;
  out.q = Mat::Zero(n, n);
  out.d = Vec::Zero(n);
  int col = 0;
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = a; b < n; ++b) {
      out.q(a, b) = theta(col);
      out.q(b, a) = theta(col);
      ++col;
    }
  }
  for (Eigen::Index a = 0; a < n; ++a) out.d(a) = theta(col++);
  out.constant = theta(col);

  out.q = psd_project(out.q);

  const Vec pred =
      design.leftCols(n_quad) *
          [&] {
            Vec qf(n_quad);
            int c = 0;
            for (Eigen::Index a = 0; a < n; ++a)
              for (Eigen::Index b = a; b < n; ++b) qf(c++) = out.q(a, b);
            return qf;
          }() +
      design.middleCols(n_quad, n) * out.d +
      Vec::Constant(n_samples, out.constant);
  out.residual_rms = std::sqrt((y - pred).squaredNorm() / n_samples);
  out.zero_fit_rms = std::sqrt(y.squaredNorm() / n_samples);
  return out;
}

FitResult fit_quadratic_cost(const NonlinearLoss& loss, const SampleBox& box,
                             int n_samples) {
  loss.validate();
  if (box.lo.size() != 3)
    throw std::invalid_argument("fit_quadratic_cost: market loss is over (d, s, p)");
  return fit_quadratic(
      [&](const Vec& x) { return loss(x(0), x(1), x(2)); }, box, n_samples);
}

QuadraticCost make_cost(const FitResult& fit, double r) {
  QuadraticCost cost;
  cost.q = fit.q;
  cost.d = fit.d;
  cost.r = r;
  return cost;
}

double riccati_residual_constant(const RiccatiSolution& sol,
                                 const LinearSystem& sys,
                                 const QuadraticCost& cost) {
  const double dt = sol.grid.dt;
  const double gamma = 1.0 / cost.r;
  const Vec bcol = sys.b.col(0);
  const Mat at = sys.a.transpose();
  const Mat gg = sys.g * sys.g.transpose();
  double worst = 0.0;
  for (std::int64_t i = 1; i < sol.grid.n_steps; ++i) {
    const Mat kdot = (sol.k[i + 1] - sol.k[i - 1]) / (2.0 * dt);
    const Vec sdot = (sol.s[i + 1] - sol.s[i - 1]) / (2.0 * dt);
    const double qdot = (sol.q[i + 1] - sol.q[i - 1]) / (2.0 * dt);
    const Vec kb = sol.k[i] * bcol;
    const Mat res_k = kdot + sol.k[i] * sys.a + at * sol.k[i] -
                      gamma * (kb * kb.transpose()) + cost.q;
    const Vec res_s = sdot + (sys.a - gamma * (bcol * kb.transpose())).transpose() * sol.s[i] +
                      sol.k[i] * sys.h + cost.d;
    const double bs = bcol.dot(sol.s[i]);
    const double res_q = qdot + 2.0 * sol.s[i].dot(sys.h) - gamma * bs * bs +
                         (sol.k[i] * gg).trace();
    worst = std::max({worst, res_k.cwiseAbs().maxCoeff(),
                      res_s.cwiseAbs().maxCoeff(), std::abs(res_q)});
  }
  return worst / (dt * dt);
}

}  // namespace pmkt
