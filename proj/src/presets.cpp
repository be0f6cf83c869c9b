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

#include "pmkt/presets.hpp"

#include <sstream>

#include "pmkt/config.hpp"

namespace pmkt {

HjbDrift CentralizedMarket::drift() const {
  HjbDrift d;
  d.add = -rho;
  d.adp = -rho;
  d.bd = rho * beta;
  d.ass = -rho;
  d.asp = rho;
  d.bs = -rho * offset_gamma;
  return d;
}

CentralizedMarket make_centralized_market(const CentralizedParams& p) {
  CentralizedMarket mkt;
  mkt.rho = p.rho;
  mkt.beta = p.beta;
  mkt.offset_gamma = p.offset_gamma;
  mkt.sigma = p.sigma;
  mkt.loss = p.loss;
  mkt.x0 = p.x0;
  mkt.grid = make_time_grid(p.t_final, p.dt);

  mkt.sys.a = Mat::Zero(3, 3);
  mkt.sys.a(0, 0) = -p.rho;
  mkt.sys.a(0, 2) = -p.rho;
  mkt.sys.a(1, 1) = -p.rho;
  mkt.sys.a(1, 2) = p.rho;
  mkt.sys.b = Mat::Zero(3, 1);
  mkt.sys.b(2, 0) = 1.0;
  mkt.sys.g = Mat::Zero(3, 3);
  mkt.sys.g(0, 0) = p.sigma;
  mkt.sys.g(1, 1) = p.sigma;
  mkt.sys.h = Vec::Zero(3);
  mkt.sys.h(0) = p.rho * p.beta;
  mkt.sys.h(1) = -p.rho * p.offset_gamma;
  mkt.sys.validate_centralized();

  mkt.box.lo = Vec(3);
  mkt.box.hi = Vec(3);
  mkt.box.lo << p.box_d_lo, p.box_s_lo, p.box_p_lo;
  mkt.box.hi << p.box_d_hi, p.box_s_hi, p.box_p_hi;

  // The loss has no price dependence, so fit over (d, s) and embed exact
  // structural zeros in the price row. A direct 3-dimensional fit would
  // leak a spurious price preference through sample correlations with the
  // large non-quadratic residual.
  SampleBox box2;
  box2.lo = Vec(2);
  box2.hi = Vec(2);
  box2.lo << p.box_d_lo, p.box_s_lo;
  box2.hi << p.box_d_hi, p.box_s_hi;
  const FitResult fit2 = fit_quadratic(
      [&](const Vec& x) { return p.loss(x(0), x(1), 0.0); }, box2, p.fit_samples);
  mkt.fit.q = Mat::Zero(3, 3);
  mkt.fit.q.topLeftCorner(2, 2) = fit2.q;
  // The fitted curvature carries the quadratic content of the loss (a steep
  // demand/supply gap penalty plus a mild level term); its raw vertex is a
  // paraboloid artifact of the one-sided blackout cliff. The linear weight
  // instead centers the cost at the balanced operating point, where demand
  // and supply both revert to (beta - offset_gamma)/2.
  const double p_op = 0.5 * (p.beta + p.offset_gamma);
  Vec x_op(3);
  x_op << p.beta - p_op, p_op - p.offset_gamma, p_op;
  mkt.fit.d = -(mkt.fit.q * x_op);
  mkt.fit.constant = fit2.constant;
  mkt.fit.residual_rms = fit2.residual_rms;
  mkt.fit.zero_fit_rms = fit2.zero_fit_rms;
  return mkt;
}

ScalarTestSystem make_scalar_test(double t_final, double dt, double sigma,
                                  double r) {
  ScalarTestSystem t;
  t.sys.a = Mat::Zero(1, 1);
  t.sys.b = Mat::Ones(1, 1);
  t.sys.g = Mat::Constant(1, 1, sigma);
  t.sys.h = Vec::Zero(1);
  t.cost.q = Mat::Ones(1, 1);
  t.cost.d = Vec::Zero(1);
  t.cost.r = r;
  t.grid = make_time_grid(t_final, dt);
  t.x0 = Vec::Ones(1);
  return t;
}

GamePopulation make_demo_population(const DemoPopulationParams& p) {
  GamePopulation pop;
  pop.clearing_gamma = p.clearing_gamma;
  pop.eta = p.eta;
  const int n_total = p.n_consumers + p.n_suppliers;
  // Own-parameter share of the clearing price (identity graphs).
  const double w_own = p.clearing_gamma / n_total;
  // Exposure to the rest of the market's price contribution.
  const double w_rest = 1.0 - w_own;
  // Balanced operating point: consumers bid beta, suppliers bid
  // offset_gamma, the average clears midway and every quantity reverts to
  // the same level.
  const double p_ref = 0.5 * (p.beta + p.offset_gamma);
  const double q_ref = 0.5 * (p.beta - p.offset_gamma);

  // Consumer: state (d, s_recv, p_own); pays price * received supply,
  // values min(d, s_recv), pays blackout on shortfall.
  AgentSpec consumer;
  consumer.kind = AgentKind::consumer;
  consumer.sys.a = Mat::Zero(3, 3);
  consumer.sys.a(0, 0) = -p.rho;
  consumer.sys.a(1, 1) = -p.rho;
  consumer.sys.b = Mat::Zero(3, 1);
  consumer.sys.b(2, 0) = 1.0;
  consumer.sys.g = Mat::Zero(3, 3);
  consumer.sys.g(0, 0) = p.sigma;
  consumer.sys.g(1, 1) = p.sigma;
  consumer.sys.h = Vec::Zero(3);
  consumer.sys.h(0) = p.rho * p.beta;
  consumer.sys.h(1) = -p.rho * p.offset_gamma;
  consumer.h_price = Vec::Zero(3);
  consumer.h_price(0) = -p.rho;
  consumer.h_price(1) = p.rho;
  consumer.d_price = Vec::Zero(3);
  consumer.d_price(1) = 0.5 * w_rest;  // 2 x'D picks up p * s_recv
  {
    // The (d, s_recv) block is the only non-quadratic piece; the own-price
    // terms (own share of the clearing price, bid curvature) are exact
    // quadratics and enter the assembled curvature directly.
    SampleBox box;
    box.lo = Vec(2);
    box.hi = Vec(2);
    box.lo << 0.0, 0.0;
    box.hi << 2.0 * q_ref, 2.0 * q_ref;
    const FitResult fit = fit_quadratic(
        [&](const Vec& x) {
          return -p.loss.value_per_unit * std::min(x(0), x(1)) +
                 p.loss.blackout_cost(x(1) - x(0));
        },
        box, p.fit_samples);
    Mat q = Mat::Zero(3, 3);
    q.topLeftCorner(2, 2) = fit.q;
    q(1, 2) = q(2, 1) = 0.5 * w_own;  // pays own price share on received supply
    q(2, 2) = p.bid_penalty;
    consumer.cost.q = psd_project(q);
    // Linear terms put the cost minimum at the operating point under the
    // reference price.
    Vec op(3);
    op << q_ref, q_ref, p.beta;
    consumer.cost.d = -(consumer.cost.q * op) - p_ref * consumer.d_price;
    consumer.cost.r = p.r;
  }
  consumer.x0 = Vec(3);
  consumer.x0 << q_ref, q_ref, p_ref;
  consumer.pq = PriceQuantityGraph{1.0, 0.0};

  // Supplier: state (s, p_own); supply reverts to (p - p_own), earns
  // price * supply net of production cost.
  AgentSpec supplier;
  supplier.kind = AgentKind::supplier;
  supplier.sys.a = Mat::Zero(2, 2);
  supplier.sys.a(0, 0) = -p.rho;
  supplier.sys.a(0, 1) = -p.rho;
  supplier.sys.b = Mat::Zero(2, 1);
  supplier.sys.b(1, 0) = 1.0;
  supplier.sys.g = Mat::Zero(2, 2);
  supplier.sys.g(0, 0) = p.sigma;
  supplier.sys.h = Vec::Zero(2);
  supplier.h_price = Vec::Zero(2);
  supplier.h_price(0) = p.rho;
  supplier.d_price = Vec::Zero(2);
  supplier.d_price(0) = -0.5 * w_rest;
  {
    // Production cost is already quadratic; the whole supplier curvature is
    // exact: c_quad on supply, own price share earned, bid curvature.
    Mat q = Mat::Zero(2, 2);
    q(0, 0) = p.loss.c_quad;
    q(0, 1) = q(1, 0) = -0.5 * w_own;
    q(1, 1) = p.bid_penalty;
    supplier.cost.q = psd_project(q);
    Vec op(2);
    op << q_ref, p.offset_gamma;
    supplier.cost.d = -(supplier.cost.q * op) - p_ref * supplier.d_price;
    supplier.cost.r = p.r;
  }
  supplier.x0 = Vec(2);
  supplier.x0 << q_ref, p_ref;
  supplier.pq = PriceQuantityGraph{1.0, 0.0};

  for (int i = 0; i < p.n_consumers; ++i) pop.consumers.push_back(consumer);
  for (int i = 0; i < p.n_suppliers; ++i) pop.suppliers.push_back(supplier);
  pop.validate();
  return pop;
}

namespace {

std::string mat_text(const Mat& m) {
  std::ostringstream os;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (i > 0) os << " ; ";
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) os << ' ';
      os << fmt_g17(m(i, j));
    }
  }
  return os.str();
}

std::string vec_text(const Vec& v) {
  std::ostringstream os;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i > 0) os << ' ';
    os << fmt_g17(v(i));
  }
  return os.str();
}

}  // namespace

std::string population_to_config(const GamePopulation& pop) {
  std::ostringstream os;
  os << "[market]\n";
  os << "clearing_gamma = " << fmt_g17(pop.clearing_gamma) << '\n';
  os << "eta = " << fmt_g17(pop.eta) << '\n';
  os << "theta_bound = " << fmt_g17(pop.theta_bound) << '\n';
  for (int i = 0; i < pop.n_agents(); ++i) {
    const AgentSpec& a = pop.agent(i);
    os << "[agent]\n";
    os << "kind = " << (a.kind == AgentKind::consumer ? "consumer" : "supplier") << '\n';
    os << "a = " << mat_text(a.sys.a) << '\n';
    os << "b = " << vec_text(a.sys.b.col(0)) << '\n';
    os << "g = " << mat_text(a.sys.g) << '\n';
    os << "h = " << vec_text(a.sys.h) << '\n';
    os << "q = " << mat_text(a.cost.q) << '\n';
    os << "d = " << vec_text(a.cost.d) << '\n';
    os << "r = " << fmt_g17(a.cost.r) << '\n';
    os << "x0 = " << vec_text(a.x0) << '\n';
    os << "h_price = " << vec_text(a.h_price) << '\n';
    os << "d_price = " << vec_text(a.d_price) << '\n';
    os << "pq_slope = " << fmt_g17(a.pq.slope) << '\n';
    os << "pq_offset = " << fmt_g17(a.pq.offset) << '\n';
  }
  return os.str();
}

}  // namespace pmkt
