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

#include "scenario.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "pmkt/config.hpp"
#include "pmkt/game.hpp"
#include "pmkt/hjb.hpp"
#include "pmkt/sde.hpp"
#include "pmkt/sensitivity.hpp"

namespace fs = std::filesystem;

namespace pmkt::cli {

namespace {

std::vector<double> parse_sweep_values(const std::string& text) {
  const std::string fn = "logspace(";
  if (text.rfind(fn, 0) == 0 && text.back() == ')') {
    const auto args =
        to_double_list(text.substr(fn.size(), text.size() - fn.size() - 1), "sweep");
    if (args.size() != 3 || !(args[0] > 0.0) || !(args[1] > 0.0) || args[2] < 2) {
      throw std::invalid_argument("sweep: logspace needs (lo > 0, hi > 0, n >= 2)");
    }
    const int n = static_cast<int>(args[2]);
    std::vector<double> out(n);
    const double la = std::log10(args[0]), lb = std::log10(args[1]);
    for (int i = 0; i < n; ++i) out[i] = std::pow(10.0, la + (lb - la) * i / (n - 1));
    return out;
  }
  return to_double_list(text, "sweep values");
}

void reject_unknown(const ConfigSection& sec, std::initializer_list<const char*> known) {
  for (const auto& [key, value] : sec.entries) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) {
      throw std::invalid_argument("unknown key '" + key + "' in section [" +
                                  sec.name + "]");
    }
  }
}

}  // namespace

void Scenario::validate() const {
  if (name.empty()) throw std::invalid_argument("scenario: name is required");
  for (char c : name) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) {
      throw std::invalid_argument("scenario: name must be filesystem-friendly");
    }
  }
  if (model != "centralized" && model != "game" && model != "hjb") {
    throw std::invalid_argument("scenario: model must be centralized, game or hjb");
  }
  if (kind != "curve" && kind != "trajectories" && kind != "gap" &&
      kind != "game" && kind != "hjb") {
    throw std::invalid_argument("scenario: unknown kind '" + kind + "'");
  }
  if ((kind == "game") != (model == "game") || (kind == "hjb") != (model == "hjb")) {
    throw std::invalid_argument("scenario: kind does not match model");
  }
  if (threads < 1) throw std::invalid_argument("scenario: threads must be >= 1");
  if ((kind == "curve" || kind == "gap") && sweep_values.empty()) {
    throw std::invalid_argument("scenario: sweep values must be non-empty");
  }
  for (double v : sweep_values) {
    if (!(v > 0.0)) throw std::invalid_argument("scenario: sweep r values must be positive");
  }
  if (sweep_variable != "r") {
    throw std::invalid_argument("scenario: only the volatility coefficient can be swept");
  }
  if (sim_paths < 1 || game_paths < 1 || rollout_paths < 1) {
    throw std::invalid_argument("scenario: path counts must be >= 1");
  }
  if (!(sim_r > 0.0) || !(game_r > 0.0)) {
    throw std::invalid_argument("scenario: r must be positive");
  }
}

Scenario parse_scenario_text(const std::string& text) {
  Scenario s;
  bool saw_scenario = false;
  for (const auto& sec : parse_config_text(text)) {
    if (sec.name == "scenario") {
      saw_scenario = true;
      reject_unknown(sec, {"name", "description", "model", "kind", "seed",
                           "threads", "out_dir"});
      s.name = sec.get("name");
      s.description = sec.get_or("description", "");
      s.model = sec.get_or("model", s.model);
      s.kind = sec.get_or("kind", s.kind);
      if (sec.has("seed")) s.seed = static_cast<std::uint64_t>(to_int(sec.get("seed"), "seed"));
      if (sec.has("threads")) s.threads = static_cast<int>(to_int(sec.get("threads"), "threads"));
      s.out_dir = sec.get_or("out_dir", "");
    } else if (sec.name == "grid") {
      reject_unknown(sec, {"t_final", "dt"});
      if (sec.has("t_final")) s.market.t_final = to_double(sec.get("t_final"), "t_final");
      if (sec.has("dt")) s.market.dt = to_double(sec.get("dt"), "dt");
    } else if (sec.name == "market") {
      reject_unknown(sec, {"rho", "beta", "gamma_offset", "sigma", "x0"});
      if (sec.has("rho")) s.market.rho = to_double(sec.get("rho"), "rho");
      if (sec.has("beta")) s.market.beta = to_double(sec.get("beta"), "beta");
      if (sec.has("gamma_offset"))
        s.market.offset_gamma = to_double(sec.get("gamma_offset"), "gamma_offset");
      if (sec.has("sigma")) s.market.sigma = to_double(sec.get("sigma"), "sigma");
      if (sec.has("x0")) {
        const Vec x0 = to_vector(sec.get("x0"), "x0");
        if (x0.size() != 3) throw std::invalid_argument("market: x0 needs 3 components");
        s.market.x0 = MarketState{x0(0), x0(1), x0(2)};
      }
    } else if (sec.name == "loss") {
      reject_unknown(sec, {"v", "c_quad", "c_lin", "bo_coeff"});
      if (sec.has("v")) s.market.loss.value_per_unit = to_double(sec.get("v"), "v");
      if (sec.has("c_quad")) s.market.loss.c_quad = to_double(sec.get("c_quad"), "c_quad");
      if (sec.has("c_lin")) s.market.loss.c_lin = to_double(sec.get("c_lin"), "c_lin");
      if (sec.has("bo_coeff")) s.market.loss.bo_coeff = to_double(sec.get("bo_coeff"), "bo_coeff");
    } else if (sec.name == "fit") {
      reject_unknown(sec, {"box_d", "box_s", "box_p", "samples"});
      auto read_box = [&](const char* key, double& lo, double& hi) {
        if (!sec.has(key)) return;
        const auto vals = to_double_list(sec.get(key), key);
        if (vals.size() != 2) throw std::invalid_argument(std::string("fit: ") + key + " needs lo hi");
        lo = vals[0];
        hi = vals[1];
      };
      read_box("box_d", s.market.box_d_lo, s.market.box_d_hi);
      read_box("box_s", s.market.box_s_lo, s.market.box_s_hi);
      read_box("box_p", s.market.box_p_lo, s.market.box_p_hi);
      if (sec.has("samples"))
        s.market.fit_samples = static_cast<int>(to_int(sec.get("samples"), "samples"));
    } else if (sec.name == "sim") {
      reject_unknown(sec, {"r", "n_paths", "common_random_numbers"});
      if (sec.has("r")) s.sim_r = to_double(sec.get("r"), "sim r");
      if (sec.has("n_paths")) s.sim_paths = static_cast<int>(to_int(sec.get("n_paths"), "n_paths"));
      if (sec.has("common_random_numbers"))
        s.common_random_numbers = to_bool(sec.get("common_random_numbers"), "common_random_numbers");
    } else if (sec.name == "sweep") {
      reject_unknown(sec, {"variable", "values"});
      if (sec.has("variable")) s.sweep_variable = sec.get("variable");
      if (sec.has("values")) s.sweep_values = parse_sweep_values(sec.get("values"));
    } else if (sec.name == "game") {
      reject_unknown(sec, {"r", "n_consumers", "n_suppliers", "t_final", "dt",
                           "tol", "max_iters", "n_paths", "bid_penalty",
                           "population_file"});
      if (sec.has("r")) s.game_r = to_double(sec.get("r"), "game r");
      if (sec.has("n_consumers"))
        s.game_consumers = static_cast<int>(to_int(sec.get("n_consumers"), "n_consumers"));
      if (sec.has("n_suppliers"))
        s.game_suppliers = static_cast<int>(to_int(sec.get("n_suppliers"), "n_suppliers"));
      if (sec.has("t_final")) s.game_t_final = to_double(sec.get("t_final"), "game t_final");
      if (sec.has("dt")) s.game_dt = to_double(sec.get("dt"), "game dt");
      if (sec.has("tol")) s.game_tol = to_double(sec.get("tol"), "tol");
      if (sec.has("max_iters"))
        s.game_max_iters = static_cast<int>(to_int(sec.get("max_iters"), "max_iters"));
      if (sec.has("n_paths"))
        s.game_paths = static_cast<int>(to_int(sec.get("n_paths"), "game n_paths"));
      if (sec.has("bid_penalty")) s.bid_penalty = to_double(sec.get("bid_penalty"), "bid_penalty");
      s.population_file = sec.get_or("population_file", "");
    } else if (sec.name == "hjb") {
      reject_unknown(sec, {"nodes", "box_d", "box_s", "box_p", "t_final", "dt",
                           "epsilon", "u_max", "rollout_paths"});
      if (sec.has("nodes")) s.hjb_nodes = static_cast<int>(to_int(sec.get("nodes"), "nodes"));
      auto read_box = [&](const char* key, double& lo, double& hi) {
        if (!sec.has(key)) return;
        const auto vals = to_double_list(sec.get(key), key);
        if (vals.size() != 2) throw std::invalid_argument(std::string("hjb: ") + key + " needs lo hi");
        lo = vals[0];
        hi = vals[1];
      };
      read_box("box_d", s.hjb_box_d_lo, s.hjb_box_d_hi);
      read_box("box_s", s.hjb_box_s_lo, s.hjb_box_s_hi);
      read_box("box_p", s.hjb_box_p_lo, s.hjb_box_p_hi);
      if (sec.has("t_final")) s.hjb_t_final = to_double(sec.get("t_final"), "hjb t_final");
      if (sec.has("dt")) s.hjb_dt = to_double(sec.get("dt"), "hjb dt");
      if (sec.has("epsilon")) s.hjb_epsilon = to_double(sec.get("epsilon"), "epsilon");
      if (sec.has("u_max")) s.hjb_u_max = to_double(sec.get("u_max"), "u_max");
      if (sec.has("rollout_paths"))
        s.rollout_paths = static_cast<int>(to_int(sec.get("rollout_paths"), "rollout_paths"));
    } else if (sec.name == "derived") {
      // Emitted into manifests for the record; ignored on re-run.
    } else {
      throw std::invalid_argument("unknown section [" + sec.name + "] in scenario");
    }
  }
  if (!saw_scenario) throw std::invalid_argument("scenario: missing [scenario] section");
  s.validate();
  return s;
}

Scenario parse_scenario_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open scenario file " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_scenario_text(buf.str());
}

std::string serialize_scenario(const Scenario& s) {
  std::ostringstream os;
  os << "[scenario]\n";
  os << "name = " << s.name << '\n';
  if (!s.description.empty()) os << "description = " << s.description << '\n';
  os << "model = " << s.model << '\n';
  os << "kind = " << s.kind << '\n';
  os << "seed = " << s.seed << '\n';
  os << "threads = " << s.threads << '\n';
  // out_dir is an invocation property, not an experiment parameter; it is
  // accepted on parse but never echoed.
  os << "[grid]\n";
  os << "t_final = " << fmt_g17(s.market.t_final) << '\n';
  os << "dt = " << fmt_g17(s.market.dt) << '\n';
  os << "[market]\n";
  os << "rho = " << fmt_g17(s.market.rho) << '\n';
  os << "beta = " << fmt_g17(s.market.beta) << '\n';
  os << "gamma_offset = " << fmt_g17(s.market.offset_gamma) << '\n';
  os << "sigma = " << fmt_g17(s.market.sigma) << '\n';
  os << "x0 = " << fmt_g17(s.market.x0.demand) << ' ' << fmt_g17(s.market.x0.supply)
     << ' ' << fmt_g17(s.market.x0.price) << '\n';
  os << "[loss]\n";
  os << "v = " << fmt_g17(s.market.loss.value_per_unit) << '\n';
  os << "c_quad = " << fmt_g17(s.market.loss.c_quad) << '\n';
  os << "c_lin = " << fmt_g17(s.market.loss.c_lin) << '\n';
  os << "bo_coeff = " << fmt_g17(s.market.loss.bo_coeff) << '\n';
  os << "[fit]\n";
  os << "box_d = " << fmt_g17(s.market.box_d_lo) << ' ' << fmt_g17(s.market.box_d_hi) << '\n';
  os << "box_s = " << fmt_g17(s.market.box_s_lo) << ' ' << fmt_g17(s.market.box_s_hi) << '\n';
  os << "box_p = " << fmt_g17(s.market.box_p_lo) << ' ' << fmt_g17(s.market.box_p_hi) << '\n';
  os << "samples = " << s.market.fit_samples << '\n';
  os << "[sim]\n";
  os << "r = " << fmt_g17(s.sim_r) << '\n';
  os << "n_paths = " << s.sim_paths << '\n';
  os << "common_random_numbers = " << (s.common_random_numbers ? "true" : "false") << '\n';
  if (!s.sweep_values.empty()) {
    os << "[sweep]\n";
    os << "variable = " << s.sweep_variable << '\n';
    os << "values = ";
    for (std::size_t i = 0; i < s.sweep_values.size(); ++i) {
      if (i > 0) os << ", ";
      os << fmt_g17(s.sweep_values[i]);
    }
    os << '\n';
  }
  os << "[game]\n";
  os << "r = " << fmt_g17(s.game_r) << '\n';
  os << "n_consumers = " << s.game_consumers << '\n';
  os << "n_suppliers = " << s.game_suppliers << '\n';
  os << "t_final = " << fmt_g17(s.game_t_final) << '\n';
  os << "dt = " << fmt_g17(s.game_dt) << '\n';
  os << "tol = " << fmt_g17(s.game_tol) << '\n';
  os << "max_iters = " << s.game_max_iters << '\n';
  os << "n_paths = " << s.game_paths << '\n';
  os << "bid_penalty = " << fmt_g17(s.bid_penalty) << '\n';
  if (!s.population_file.empty()) os << "population_file = " << s.population_file << '\n';
  os << "[hjb]\n";
  os << "nodes = " << s.hjb_nodes << '\n';
  os << "box_d = " << fmt_g17(s.hjb_box_d_lo) << ' ' << fmt_g17(s.hjb_box_d_hi) << '\n';
  os << "box_s = " << fmt_g17(s.hjb_box_s_lo) << ' ' << fmt_g17(s.hjb_box_s_hi) << '\n';
  os << "box_p = " << fmt_g17(s.hjb_box_p_lo) << ' ' << fmt_g17(s.hjb_box_p_hi) << '\n';
  os << "t_final = " << fmt_g17(s.hjb_t_final) << '\n';
  os << "dt = " << fmt_g17(s.hjb_dt) << '\n';
  os << "epsilon = " << fmt_g17(s.hjb_epsilon) << '\n';
  os << "u_max = " << fmt_g17(s.hjb_u_max) << '\n';
  os << "rollout_paths = " << s.rollout_paths << '\n';
  return os.str();
}

namespace {

struct RunCtx {
  fs::path dir;
  RunResult result;
  std::ostringstream derived;  // extra resolved values for the manifest

  std::ofstream open(const std::string& file) {
    std::ofstream os(dir / file, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + (dir / file).string());
    result.files_written.push_back((dir / file).string());
    return os;
  }
};

// Fixed-order worker pool over sweep indices; results land by index.
void parallel_for_index(int n, int threads, const std::function<void(int)>& work) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) work(i);
    return;
  }
  std::vector<std::exception_ptr> errs(threads);
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (int i = t; i < n; i += threads) work(i);
      } catch (...) {
        errs[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errs) {
    if (e) std::rethrow_exception(e);
  }
}

std::uint64_t sweep_seed(const Scenario& s, int index) {
  // Common random numbers reuse one seed across the sweep; otherwise each
  // sweep point draws from an unrelated stream.
  if (s.common_random_numbers) return s.seed;
  return s.seed + 0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(index + 1);
}

void run_curve(const Scenario& s, const CentralizedMarket& mkt, RunCtx& ctx) {
  const int n = static_cast<int>(s.sweep_values.size());
  std::vector<double> djsp(n);
  parallel_for_index(n, s.threads, [&](int i) {
    const QuadraticCost cost = mkt.cost(s.sweep_values[i]);
    const RiccatiSolution sol = solve_riccati(mkt.sys, cost, mkt.grid);
    djsp[i] = solve_sensitivity_bundle(sol, mkt.sys, cost, mkt.grid).djsp_dr;
  });

  std::vector<double> sorted = s.sweep_values;
  std::sort(sorted.begin(), sorted.end());
  SimConfig cfg;
  cfg.grid = mkt.grid;
  const auto pts = tradeoff_curve(mkt.sys, mkt.fit.q, mkt.fit.d, sorted,
                                  mkt.x0.to_vec(), cfg);
  // Map normalized values back to the sweep order.
  auto norm_at = [&](double r) -> const TradeoffPoint& {
    for (const auto& p : pts) {
      if (p.r == r) return p;
    }
    throw std::logic_error("sweep value lost in normalization");
  };

  auto os = ctx.open("curve.csv");
  os << "r,djsp_dr,efficiency_norm,volatility_norm\n";
  for (int i = 0; i < n; ++i) {
    const TradeoffPoint& p = norm_at(s.sweep_values[i]);
    os << fmt_g17(s.sweep_values[i]) << ',' << fmt_g17(djsp[i]) << ','
       << fmt_g17(p.efficiency_norm) << ',' << fmt_g17(p.volatility_norm) << '\n';
  }
  // Curvature report for the sensitivity sweep (second differences in r).
  ctx.derived << "# second differences of djsp_dr over the sweep\n";
  for (int i = 1; i + 1 < n; ++i) {
    ctx.derived << "djsp_dr_dd_" << i << " = "
                << fmt_g17(djsp[i + 1] - 2.0 * djsp[i] + djsp[i - 1]) << '\n';
  }
}

void run_gap(const Scenario& s, const CentralizedMarket& mkt, RunCtx& ctx) {
  const int n = static_cast<int>(s.sweep_values.size());
  std::vector<double> gaps(n);
  parallel_for_index(n, s.threads, [&](int i) {
    const double r = s.sweep_values[i];
    QuadraticCost cost = mkt.cost(r);
    const RiccatiSolution sol = solve_riccati(mkt.sys, cost, mkt.grid);
    const StepPolicy pol = make_step_policy(mkt.sys, cost, sol, mkt.grid);
    EngineRequest req;
    req.policy = &pol;
    req.x0 = mkt.x0.to_vec();
    req.cfg.grid = mkt.grid;
    req.cfg.n_paths = s.sim_paths;
    req.cfg.seed = sweep_seed(s, i);
    req.cfg.common_random_numbers = s.common_random_numbers;
    gaps[i] = run_paths(req).mean_abs_gap;
  });
  auto os = ctx.open("gap.csv");
  os << "r,mean_abs_gap\n";
  for (int i = 0; i < n; ++i) {
    os << fmt_g17(s.sweep_values[i]) << ',' << fmt_g17(gaps[i]) << '\n';
  }
}

void run_trajectories(const Scenario& s, const CentralizedMarket& mkt, RunCtx& ctx) {
  const QuadraticCost cost = mkt.cost(s.sim_r);
  const RiccatiSolution sol = solve_riccati(mkt.sys, cost, mkt.grid);
  SimConfig cfg;
  cfg.grid = mkt.grid;
  cfg.n_paths = s.sim_paths;
  cfg.seed = s.seed;
  cfg.n_threads = s.threads;
  cfg.common_random_numbers = s.common_random_numbers;
  const auto trajs = simulate_closed_loop(mkt.sys, cost, sol, mkt.x0, cfg);
  const fs::path file = ctx.dir / "trajectories.csv";
  export_trajectories_csv(file.string(), trajs, {"d", "s", "p"});
  ctx.result.files_written.push_back(file.string());
  const CostEstimate est = estimate_costs(trajs, cost);
  ctx.derived << "cost_total = " << fmt_g17(est.total) << '\n';
  ctx.derived << "cost_state_penalizing = " << fmt_g17(est.state_penalizing) << '\n';
  ctx.derived << "cost_volatility = " << fmt_g17(est.volatility) << '\n';
  const char* relation = mkt.x0.demand > mkt.x0.supply  ? "demand_above_supply"
                         : mkt.x0.demand < mkt.x0.supply ? "supply_above_demand"
                                                         : "balanced";
  ctx.derived << "initial_imbalance = " << relation << '\n';
}

void run_game(const Scenario& s, RunCtx& ctx) {
  GamePopulation pop;
  if (!s.population_file.empty()) {
    pop = load_population(s.population_file);
  } else {
    DemoPopulationParams gp;
    gp.n_consumers = s.game_consumers;
    gp.n_suppliers = s.game_suppliers;
    gp.r = s.game_r;
    gp.rho = s.market.rho;
    gp.beta = s.market.beta;
    gp.offset_gamma = s.market.offset_gamma;
    gp.sigma = s.market.sigma;
    gp.loss = s.market.loss;
    gp.bid_penalty = s.bid_penalty;
    pop = make_demo_population(gp);
  }
  const TimeGrid grid = make_time_grid(s.game_t_final, s.game_dt);

  const ContractionReport rep = contraction_bound(pop, grid);
  ctx.derived << "contraction_bound = " << fmt_g17(rep.bound) << '\n';
  ctx.derived << "contraction_kappa = " << fmt_g17(rep.kappa) << '\n';
  ctx.derived << "contraction_rho = " << fmt_g17(rep.rho_decay) << '\n';
  if (rep.bound >= 1.0) {
    std::cerr << "warning: contraction certificate " << rep.bound
              << " >= 1; fixed point not guaranteed, proceeding\n";
  }

  // Full disclosure of the (possibly derived) agent parameters.
  {
    auto os = ctx.open("population.ini");
    os << population_to_config(pop);
  }

  const double p0 = 0.5 * (s.market.beta + s.market.offset_gamma);
  const EquilibriumResult eq =
      solve_equilibrium(pop, constant_price(p0, grid), grid, s.game_tol, s.game_max_iters);
  ctx.derived << "iterations = " << eq.iterations << '\n';
  ctx.derived << "final_residual = " << fmt_g17(eq.residual_history.back()) << '\n';

  SimConfig cfg;
  cfg.grid = grid;
  cfg.n_paths = s.game_paths;
  cfg.seed = s.seed;
  cfg.n_threads = s.threads;
  cfg.common_random_numbers = s.common_random_numbers;
  const SocialCosts sc = social_costs(pop, eq, cfg);

  const fs::path eq_file = ctx.dir / "equilibrium.csv";
  export_equilibrium_csv(eq_file.string(), pop, eq, grid);
  ctx.result.files_written.push_back(eq_file.string());
  const fs::path res_file = ctx.dir / "residuals.csv";
  export_residuals_csv(res_file.string(), eq);
  ctx.result.files_written.push_back(res_file.string());

  auto os = ctx.open("social_costs.csv");
  os << "scope,total,state_penalizing,volatility,se_total,se_state_penalizing,se_volatility\n";
  os << "social," << fmt_g17(sc.total) << ',' << fmt_g17(sc.state_penalizing) << ','
     << fmt_g17(sc.volatility) << ",,,\n";
  for (std::size_t i = 0; i < sc.per_agent.size(); ++i) {
    const CostEstimate& est = sc.per_agent[i];
    os << "agent" << i << ',' << fmt_g17(est.total) << ','
       << fmt_g17(est.state_penalizing) << ',' << fmt_g17(est.volatility) << ','
       << fmt_g17(est.se_total) << ',' << fmt_g17(est.se_state_penalizing) << ','
       << fmt_g17(est.se_volatility) << '\n';
  }
}

void run_hjb(const Scenario& s, const CentralizedMarket& mkt, RunCtx& ctx) {
  HjbProblem prob;
  prob.grid.lo = {s.hjb_box_d_lo, s.hjb_box_s_lo, s.hjb_box_p_lo};
  prob.grid.hi = {s.hjb_box_d_hi, s.hjb_box_s_hi, s.hjb_box_p_hi};
  prob.grid.n = {s.hjb_nodes, s.hjb_nodes, s.hjb_nodes};
  prob.drift = mkt.drift();
  prob.loss = s.market.loss;
  prob.sigma_d = s.market.sigma;
  prob.sigma_s = s.market.sigma;
  prob.epsilon = s.hjb_epsilon;
  prob.u_max = s.hjb_u_max;
  const TimeGrid tgrid = make_time_grid(s.hjb_t_final, s.hjb_dt);

  const ValueField field = solve_hjb(prob, tgrid);
  const PolicyField policy = extract_policy(field);
  ctx.derived << "cfl = " << fmt_g17(field.cfl) << '\n';
  ctx.derived << "bang_bang_fraction = " << fmt_g17(bang_bang_fraction(policy)) << '\n';

  const fs::path ffile = ctx.dir / "field.csv";
  export_hjb_csv(ffile.string(), field, policy);
  ctx.result.files_written.push_back(ffile.string());

  // Rollout check at five node-aligned probes around the box center.
  auto os = ctx.open("rollout.csv");
  os << "d,s,p,value,rollout,rel_gap\n";
  const int c0 = s.hjb_nodes / 2;
  const int off = s.hjb_nodes / 5;
  const int probes[5][3] = {{c0, c0, c0},
                            {c0 + off, c0, c0},
                            {c0, c0 + off, c0},
                            {c0 - off, c0 - off, c0},
                            {c0, c0, c0 + off}};
  for (const auto& pr : probes) {
    const MarketState x0{prob.grid.coord(0, pr[0]), prob.grid.coord(1, pr[1]),
                         prob.grid.coord(2, pr[2])};
    const double v = field.at(0, pr[0], pr[1], pr[2]);
    const double rolled =
        rollout_policy_cost(prob, policy, tgrid, x0, s.rollout_paths, s.seed);
    os << fmt_g17(x0.demand) << ',' << fmt_g17(x0.supply) << ',' << fmt_g17(x0.price)
       << ',' << fmt_g17(v) << ',' << fmt_g17(rolled) << ','
       << fmt_g17(std::fabs(rolled - v) / std::max(1.0, std::fabs(v))) << '\n';
  }
}

}  // namespace

RunResult run_scenario(const Scenario& s) {
  s.validate();
  std::string out_root = s.out_dir;
  if (out_root.empty()) {
    if (const char* env = std::getenv("PMKT_OUT_DIR")) out_root = env;
  }
  if (out_root.empty()) out_root = "out";

  RunCtx ctx;
  ctx.dir = fs::path(out_root) / s.name;
  fs::create_directories(ctx.dir);

  CentralizedMarket mkt;
  const bool needs_market = s.model == "centralized" || s.model == "hjb";
  if (needs_market) {
    mkt = make_centralized_market(s.market);
    ctx.derived << "# fitted quadratic cost\n";
    for (int i = 0; i < 3; ++i) {
      for (int j = i; j < 3; ++j) {
        ctx.derived << "fit_q_" << i << j << " = " << fmt_g17(mkt.fit.q(i, j)) << '\n';
      }
    }
    for (int i = 0; i < 3; ++i) {
      ctx.derived << "fit_d_" << i << " = " << fmt_g17(mkt.fit.d(i)) << '\n';
    }
    ctx.derived << "fit_residual_rms = " << fmt_g17(mkt.fit.residual_rms) << '\n';
  }

  if (s.kind == "curve") {
    run_curve(s, mkt, ctx);
  } else if (s.kind == "gap") {
    run_gap(s, mkt, ctx);
  } else if (s.kind == "trajectories") {
    run_trajectories(s, mkt, ctx);
  } else if (s.kind == "game") {
    run_game(s, ctx);
  } else if (s.kind == "hjb") {
    run_hjb(s, mkt, ctx);
  }

  // Manifest: the fully-resolved configuration (itself runnable) plus every
  // derived numeric parameter the run consumed.
  auto os = ctx.open("manifest.ini");
  os << serialize_scenario(s);
  os << "[derived]\n" << ctx.derived.str();
  return ctx.result;
}

}  // namespace pmkt::cli
