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

// End-to-end acceptance suite. Each criterion prints exactly one PASS/FAIL
// line; run with no arguments for all criteria or with criterion numbers
// (e.g. `pmkt_acceptance 1 4 9`) for a subset. Exit status is nonzero if
// any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "pmkt/game.hpp"
#include "pmkt/hjb.hpp"
#include "pmkt/presets.hpp"
#include "pmkt/sde.hpp"
#include "pmkt/sensitivity.hpp"

#ifndef PMKT_CLI_PATH
#define PMKT_CLI_PATH "pmkt"
#endif

namespace fs = std::filesystem;
using namespace pmkt;

namespace {

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
  }
};

std::vector<double> logspace(double lo, double hi, int n) {
  std::vector<double> out(n);
  const double la = std::log10(lo), lb = std::log10(hi);
  for (int i = 0; i < n; ++i) out[i] = std::pow(10.0, la + (lb - la) * i / (n - 1));
  return out;
}

// ---------------------------------------------------------------------------
// 1. dJsp/dr positive and strictly decreasing over a 20-point log-spaced r
//    grid on the reference configuration; single-threaded < 60 s.
bool criterion1(std::string& detail) {
  Timer timer;
  const CentralizedMarket mkt = make_centralized_market();
  const auto rs = logspace(1e-2, 1e3, 20);
  std::vector<double> vals(rs.size());
  for (std::size_t i = 0; i < rs.size(); ++i) {
    const double gamma = 1.0 / rs[i];
    const QuadraticCost cost = mkt.cost(rs[i]);
    const RiccatiSolution sol = solve_riccati(mkt.sys, cost, mkt.grid);
    const KGammaSolution dk = solve_dk_dgamma(sol, mkt.sys, gamma, mkt.grid);
    vals[i] = djsp_dr(djsp_dgamma_steady(sol, dk, mkt.sys, cost, gamma, mkt.grid),
                      rs[i]);
  }
  bool ok = true;
  for (std::size_t i = 0; i < vals.size(); ++i) {
    ok = ok && vals[i] > 0.0;
    if (i > 0) ok = ok && vals[i] < vals[i - 1];
  }
  const double elapsed = timer.seconds();
  ok = ok && elapsed < 60.0;
  int convex = 0;
  for (std::size_t i = 1; i + 1 < vals.size(); ++i) {
    if (vals[i + 1] - 2.0 * vals[i] + vals[i - 1] > 0.0) ++convex;
  }
  std::ostringstream os;
  os << "dJsp/dr in [" << vals.back() << ", " << vals.front() << "], " << elapsed
     << " s single-threaded, " << convex << "/" << vals.size() - 2
     << " positive second differences (reported, not asserted)";
  detail = os.str();
  return ok;
}

// ---------------------------------------------------------------------------
// 2. dK/dgamma and dS/dgamma match central finite differences of independent
//    Riccati solves to relative 1e-3 (step 1e-4), scalar and market configs.
bool criterion2(std::string& detail) {
  const double step = 1e-4;
  auto check = [&](const LinearSystem& sys, QuadraticCost cost, const TimeGrid& grid,
                   double gamma, double& worst_k, double& worst_s) {
    cost.r = 1.0 / gamma;
    const RiccatiSolution sol = solve_riccati(sys, cost, grid);
    const KGammaSolution dk = solve_dk_dgamma(sol, sys, gamma, grid);
    const SGammaSolution ds = solve_ds_dgamma(sol, dk, sys, cost, gamma, grid);
    QuadraticCost up = cost, dn = cost;
    up.r = 1.0 / (gamma + step);
    dn.r = 1.0 / (gamma - step);
    const RiccatiSolution a = solve_riccati(sys, up, grid);
    const RiccatiSolution b = solve_riccati(sys, dn, grid);
    double scale_k = 0.0, scale_s = 0.0, err_k = 0.0, err_s = 0.0;
    for (std::int64_t i = 0; i <= grid.n_steps; ++i) {
      const Mat fd_k = (a.k[i] - b.k[i]) / (2.0 * step);
      const Vec fd_s = (a.s[i] - b.s[i]) / (2.0 * step);
      scale_k = std::max(scale_k, fd_k.cwiseAbs().maxCoeff());
      scale_s = std::max(scale_s, fd_s.cwiseAbs().maxCoeff());
      err_k = std::max(err_k, (dk.grid_vals[i] - fd_k).cwiseAbs().maxCoeff());
      err_s = std::max(err_s, (ds.grid_vals[i] - fd_s).cwiseAbs().maxCoeff());
    }
    worst_k = err_k / scale_k;
    worst_s = err_s / scale_s;
    return worst_k <= 1e-3 && worst_s <= 1e-3;
  };

  ScalarTestSystem t = make_scalar_test(1.0, 0.01);
  t.sys.h = Vec::Constant(1, 1.0);
  t.cost.d = Vec::Constant(1, 0.5);
  double k1 = 0, s1 = 0, k2 = 0, s2 = 0;
  const bool ok_scalar = check(t.sys, t.cost, t.grid, 1.0, k1, s1);
  const CentralizedMarket mkt = make_centralized_market();
  const bool ok_mkt = check(mkt.sys, mkt.cost(1.0), mkt.grid, 1.0, k2, s2);
  std::ostringstream os;
  os << "rel err scalar (K " << k1 << ", S " << s1 << "), market (K " << k2
     << ", S " << s2 << ")";
  detail = os.str();
  return ok_scalar && ok_mkt;
}

// ---------------------------------------------------------------------------
// 3. Scalar Riccati reproduces tanh(T - t) to 1e-8 at dt = 1e-3.
bool criterion3(std::string& detail) {
  const ScalarTestSystem t = make_scalar_test(1.0, 1e-3);
  const RiccatiSolution sol = solve_riccati(t.sys, t.cost, t.grid);
  double worst = 0.0;
  for (std::int64_t i = 0; i <= t.grid.n_steps; ++i) {
    worst = std::max(worst,
                     std::fabs(sol.k[i](0, 0) - std::tanh(1.0 - t.grid.time(i))));
  }
  std::ostringstream os;
  os << "max |K - tanh(T-t)| = " << worst;
  detail = os.str();
  return worst <= 1e-8;
}

// ---------------------------------------------------------------------------
// 4. Closed-form cost matches the 10^4-path Euler-Maruyama estimate within
//    3 standard errors at dt = 0.05. The market comparison runs at r = 1000
//    where the Euler step resolves the feedback loop; the small-r bias ratio
//    is reported as a diagnostic.
bool criterion4(std::string& detail) {
  const ScalarTestSystem t = make_scalar_test(1.0, 0.05);
  const RiccatiSolution sol_t = solve_riccati(t.sys, t.cost, t.grid);
  SimConfig cfg;
  cfg.grid = t.grid;
  cfg.n_paths = 10000;
  cfg.seed = 2026;
  const CostEstimate est_t = simulate_costs(t.sys, t.cost, sol_t, t.x0, cfg);
  const double gap_t =
      std::fabs(est_t.total - closed_form_cost(sol_t, t.x0)) / est_t.se_total;

  const CentralizedMarket mkt = make_centralized_market();
  auto market_gap = [&](double r) {
    const QuadraticCost cost = mkt.cost(r);
    const RiccatiSolution sol = solve_riccati(mkt.sys, cost, mkt.grid);
    SimConfig mcfg;
    mcfg.grid = mkt.grid;
    mcfg.n_paths = 10000;
    mcfg.seed = 2026;
    const CostEstimate est = simulate_costs(mkt.sys, cost, sol, mkt.x0.to_vec(), mcfg);
    return std::fabs(est.total - closed_form_cost(sol, mkt.x0.to_vec())) /
           est.se_total;
  };
  const double gap_m = market_gap(1000.0);
  const double gap_diag = market_gap(1.0);
  std::ostringstream os;
  os << "gap/se scalar " << gap_t << ", market(r=1000) " << gap_m
     << "; diagnostic market(r=1) " << gap_diag
     << " (O(dt) feedback bias, see ledger)";
  detail = os.str();
  return gap_t <= 3.0 && gap_m <= 3.0;
}

// ---------------------------------------------------------------------------
// 5. Normalized (volatility, efficiency) curve strictly monotone increasing.
bool criterion5(std::string& detail) {
  const CentralizedMarket mkt = make_centralized_market();
  SimConfig cfg;
  cfg.grid = mkt.grid;
  const auto pts = tradeoff_curve(mkt.sys, mkt.fit.q, mkt.fit.d,
                                  logspace(1e-2, 1e3, 20), mkt.x0.to_vec(), cfg);
  bool ok = true;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    // r ascending: strictly less volatility and strictly less efficiency,
    // so the curve rises strictly in the (volatility, efficiency) plane.
    ok = ok && pts[i].volatility_norm < pts[i - 1].volatility_norm;
    ok = ok && pts[i].efficiency_norm < pts[i - 1].efficiency_norm;
  }
  std::ostringstream os;
  os << "strictly monotone over " << pts.size() << " points";
  detail = os.str();
  return ok;
}

// ---------------------------------------------------------------------------
// 6. Mean |d - s| non-decreasing over the r ladder (common random numbers,
//    1000 paths).
bool criterion6(std::string& detail) {
  const CentralizedMarket mkt = make_centralized_market();
  std::vector<double> gaps;
  for (double r : {1e-2, 1e-1, 1.0, 10.0, 100.0, 1000.0}) {
    const QuadraticCost cost = mkt.cost(r);
    const RiccatiSolution sol = solve_riccati(mkt.sys, cost, mkt.grid);
    const StepPolicy pol = make_step_policy(mkt.sys, cost, sol, mkt.grid);
    EngineRequest req;
    req.policy = &pol;
    req.x0 = mkt.x0.to_vec();
    req.cfg.grid = mkt.grid;
    req.cfg.n_paths = 1000;
    req.cfg.seed = 7;
    gaps.push_back(run_paths(req).mean_abs_gap);
  }
  bool ok = true;
  for (std::size_t i = 1; i < gaps.size(); ++i) ok = ok && gaps[i] >= gaps[i - 1];
  std::ostringstream os;
  os << "gap ladder " << gaps.front() << " .. " << gaps.back();
  detail = os.str();
  return ok;
}

// ---------------------------------------------------------------------------
// 7. Price-increment sample variance at r = 0.01 at least 10x the one at
//    r = 1000 under common random numbers.
bool criterion7(std::string& detail) {
  const CentralizedMarket mkt = make_centralized_market();
  auto var_at = [&](double r) {
    const QuadraticCost cost = mkt.cost(r);
    const RiccatiSolution sol = solve_riccati(mkt.sys, cost, mkt.grid);
    const StepPolicy pol = make_step_policy(mkt.sys, cost, sol, mkt.grid);
    EngineRequest req;
    req.policy = &pol;
    req.x0 = mkt.x0.to_vec();
    req.cfg.grid = mkt.grid;
    req.cfg.n_paths = 1000;
    req.cfg.seed = 7;
    req.incr_comp = 2;
    return run_paths(req).incr_variance;
  };
  const double wild = var_at(0.01);
  const double tame = var_at(1000.0);
  std::ostringstream os;
  os << "var(dp) " << wild << " vs " << tame << " (ratio " << wild / tame << ")";
  detail = os.str();
  return wild >= 10.0 * tame;
}

// ---------------------------------------------------------------------------
// 8. HJB on a 16^3 grid: extracted policy at the control bounds on >= 98% of
//    interior nodes; V(0,.) within 10% of a 1000-path policy rollout at 5
//    probe states; < 5 minutes.
bool criterion8(std::string& detail) {
  Timer timer;
  const CentralizedMarket mkt = make_centralized_market();
  HjbProblem prob;
  prob.grid.lo = {10.0, 10.0, 40.0};
  prob.grid.hi = {40.0, 40.0, 60.0};
  prob.grid.n = {16, 16, 16};
  prob.drift = mkt.drift();
  prob.loss = mkt.loss;
  prob.sigma_d = prob.sigma_s = mkt.sigma;
  prob.epsilon = 0.5;
  prob.u_max = 5.0;
  const TimeGrid tgrid = make_time_grid(10.0, 0.05);
  const ValueField field = solve_hjb(prob, tgrid);
  const PolicyField policy = extract_policy(field);
  const double frac = bang_bang_fraction(policy);

  const int c = 8, off = 3;
  const int probes[5][3] = {
      {c, c, c}, {c + off, c, c}, {c, c + off, c}, {c - off, c - off, c}, {c, c, c + off}};
  double worst = 0.0;
  for (const auto& pr : probes) {
    const MarketState x0{prob.grid.coord(0, pr[0]), prob.grid.coord(1, pr[1]),
                         prob.grid.coord(2, pr[2])};
    const double v = field.at(0, pr[0], pr[1], pr[2]);
    const double rolled = rollout_policy_cost(prob, policy, tgrid, x0, 1000, 1);
    worst = std::max(worst, std::fabs(rolled - v) / std::max(1.0, std::fabs(v)));
  }
  const double elapsed = timer.seconds();
  std::ostringstream os;
  os << "bang-bang " << 100.0 * frac << "%, worst probe gap " << 100.0 * worst
     << "%, " << elapsed << " s";
  detail = os.str();
  return frac >= 0.98 && worst <= 0.10 && elapsed < 300.0;
}

// ---------------------------------------------------------------------------
// 9. Game fixed point on the 2x2 population (T = 50): residual < 1e-8 within
//    200 iterations; measured geometric ratio within bound + 0.05 whenever
//    the certified bound is below 1.
bool criterion9(std::string& detail) {
  const TimeGrid grid = make_time_grid(50.0, 0.05);
  DemoPopulationParams pp;
  pp.r = 1.0;
  const GamePopulation pop = make_demo_population(pp);
  const ContractionReport rep = contraction_bound(pop, grid);
  const EquilibriumResult eq =
      solve_equilibrium(pop, constant_price(50.0, grid), grid, 1e-8, 200);
  bool ok = eq.iterations <= 200 && eq.residual_history.back() < 1e-8;
  double worst_ratio = 0.0;
  for (std::size_t i = 1; i + 1 < eq.residual_history.size(); ++i) {
    worst_ratio = std::max(worst_ratio,
                           eq.residual_history[i + 1] / eq.residual_history[i]);
  }
  if (rep.bound < 1.0) ok = ok && worst_ratio <= rep.bound + 0.05;
  std::ostringstream os;
  os << eq.iterations << " iterations, final residual "
     << eq.residual_history.back() << ", measured ratio " << worst_ratio
     << ", certified bound " << rep.bound
     << (rep.bound < 1.0 ? " (< 1: ratio checked)" : " (>= 1: ratio not binding)");
  detail = os.str();
  return ok;
}

// ---------------------------------------------------------------------------
// 10. Equilibrium state-penalizing social cost non-decreasing over
//     r in {0.005, 1, 100} under common random numbers.
bool criterion10(std::string& detail) {
  const TimeGrid grid = make_time_grid(50.0, 0.05);
  SimConfig cfg;
  cfg.grid = grid;
  cfg.n_paths = 2000;
  cfg.seed = 11;
  std::vector<double> jsp;
  for (double r : {0.005, 1.0, 100.0}) {
    DemoPopulationParams pp;
    pp.r = r;
    const GamePopulation pop = make_demo_population(pp);
    const EquilibriumResult eq =
        solve_equilibrium(pop, constant_price(50.0, grid), grid, 1e-8, 200);
    jsp.push_back(social_costs(pop, eq, cfg).state_penalizing);
  }
  const bool ok = jsp[0] <= jsp[1] && jsp[1] <= jsp[2];
  std::ostringstream os;
  os << "Jsp(0.005) = " << jsp[0] << " <= Jsp(1) = " << jsp[1]
     << " <= Jsp(100) = " << jsp[2];
  detail = os.str();
  return ok;
}

// ---------------------------------------------------------------------------
// 11. Every CLI scenario is byte-identical across two runs with the same
//     seed, including multi-threaded sweeps.
std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

bool same_tree(const fs::path& a, const fs::path& b, std::string& why,
               bool skip_manifest = false) {
  std::vector<fs::path> rel;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (e.is_regular_file()) rel.push_back(fs::relative(e.path(), a));
  }
  std::sort(rel.begin(), rel.end());
  for (const auto& r : rel) {
    if (skip_manifest && r.filename() == "manifest.ini") continue;
    if (!fs::exists(b / r)) {
      why = "missing " + (b / r).string();
      return false;
    }
    if (slurp(a / r) != slurp(b / r)) {
      why = "differs: " + r.string();
      return false;
    }
  }
  return true;
}

bool criterion11(std::string& detail) {
  const fs::path root = fs::path("acceptance_tmp");
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string cli = PMKT_CLI_PATH;

  auto run = [&](const std::string& scenario, const std::string& out,
                 int threads) {
    const std::string cmd = cli + " run " + scenario + " --seed 9 --threads " +
                            std::to_string(threads) + " --out " +
                            (root / out).string() + " > /dev/null 2>/dev/null";
    return std::system(cmd.c_str()) == 0;
  };

  // The scenario list comes from the binary itself.
  std::vector<std::string> names;
  {
    FILE* pipe = popen((cli + " list --machine").c_str(), "r");
    if (pipe == nullptr) {
      detail = "cannot invoke the CLI";
      return false;
    }
    char line[256];
    while (std::fgets(line, sizeof line, pipe) != nullptr) {
      std::string name(line);
      while (!name.empty() && (name.back() == '\n' || name.back() == '\r')) {
        name.pop_back();
      }
      if (!name.empty()) names.push_back(name);
    }
    pclose(pipe);
  }
  if (names.size() != 10) {
    detail = "expected 10 built-in scenarios, listed " + std::to_string(names.size());
    return false;
  }

  for (const auto& name : names) {
    if (!run(name, "a", 2) || !run(name, "b", 2)) {
      detail = name + ": run failed";
      return false;
    }
    std::string why;
    if (!same_tree(root / "a" / name, root / "b" / name, why)) {
      detail = name + ": " + why;
      return false;
    }
  }
  // Thread-count independence of the data files (manifests echo the thread
  // count and are excluded from this comparison).
  if (!run("fig1", "t1", 1) || !run("fig7", "t1", 1)) {
    detail = "single-thread rerun failed";
    return false;
  }
  std::string why;
  if (!same_tree(root / "a" / "fig1", root / "t1" / "fig1", why, true) ||
      !same_tree(root / "a" / "fig7", root / "t1" / "fig7", why, true)) {
    detail = "threads=1 vs threads=2: " + why;
    return false;
  }
  fs::remove_all(root);
  detail = std::to_string(names.size()) + " scenarios byte-identical across reruns";
  return true;
}

struct Criterion {
  int id;
  const char* title;
  std::function<bool(std::string&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "sensitivity sign law: dJsp/dr positive and strictly decreasing", criterion1},
      {2, "sensitivity ODEs vs central finite differences", criterion2},
      {3, "scalar Riccati analytic solution", criterion3},
      {4, "closed-form vs Monte Carlo cost", criterion4},
      {5, "efficiency-volatility trade-off strictly monotone", criterion5},
      {6, "demand-supply gap non-decreasing in r", criterion6},
      {7, "price-increment variance ratio >= 10", criterion7},
      {8, "HJB bang-bang policy and rollout agreement", criterion8},
      {9, "game fixed point convergence and contraction", criterion9},
      {10, "game state-penalizing social cost non-decreasing in r", criterion10},
      {11, "CLI scenarios byte-identical across runs", criterion11},
  };

  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() &&
        std::find(selected.begin(), selected.end(), c.id) == selected.end()) {
      continue;
    }
    std::string detail;
    bool ok = false;
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    std::printf("[%s] criterion %2d: %s — %s\n", ok ? "PASS" : "FAIL", c.id,
                c.title, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
