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

#include "pmkt/sde.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "pmkt/kernels.hpp"

namespace pmkt {

void SimConfig::validate() const {
  if (n_paths < 1) throw std::invalid_argument("SimConfig: n_paths must be >= 1");
  if (n_threads < 1) throw std::invalid_argument("SimConfig: n_threads must be >= 1");
  if (grid.n_steps < 1) throw std::invalid_argument("SimConfig: empty time grid");
}

StepPolicy make_step_policy(const LinearSystem& sys, const QuadraticCost& cost,
                            const RiccatiSolution& sol, const TimeGrid& grid) {
  return make_step_policy_tv(sys, cost, sol,
                             std::vector<Vec>(grid.n_points(), sys.h), grid);
}

StepPolicy make_step_policy_tv(const LinearSystem& sys, const QuadraticCost& cost,
                               const RiccatiSolution& sol,
                               const std::vector<Vec>& h_nodes,
                               const TimeGrid& grid) {
  sys.validate();
  cost.validate(sys.n());
  if (sol.grid.n_steps != grid.n_steps || sol.grid.dt != grid.dt) {
    throw std::invalid_argument("step policy: solution and simulation must share one grid");
  }
  if (static_cast<std::int64_t>(h_nodes.size()) != grid.n_points()) {
    throw std::invalid_argument("step policy: offset trajectory size mismatch");
  }
  const auto n = sys.n();
  const double dt = grid.dt;
  const Vec bcol = sys.b.col(0);

  StepPolicy p;
  p.n = static_cast<int>(n);
  p.grid = grid;
  p.m.resize(static_cast<std::size_t>(grid.n_steps) * n * n);
  p.c.resize(static_cast<std::size_t>(grid.n_steps) * n);
  p.frow.resize(static_cast<std::size_t>(grid.n_steps) * n);
  p.foff.resize(grid.n_steps);
  p.gs.resize(static_cast<std::size_t>(n) * n);

  const Mat gs = std::sqrt(dt) * sys.g;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      p.gs[static_cast<std::size_t>(i) * n + j] = gs(i, j);

  for (std::int64_t k = 0; k < grid.n_steps; ++k) {
    const Vec fr = -(sol.k[k] * bcol) / cost.r;  // feedback row, K symmetric
    const double fo = -bcol.dot(sol.s[k]) / cost.r;
    const Mat m = Mat::Identity(n, n) + dt * (sys.a + bcol * fr.transpose());
    const Vec c = dt * (bcol * fo + h_nodes[k]);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j)
        p.m[(static_cast<std::size_t>(k) * n + i) * n + j] = m(i, j);
      p.c[static_cast<std::size_t>(k) * n + i] = c(i);
      p.frow[static_cast<std::size_t>(k) * n + i] = fr(i);
    }
    p.foff[k] = fo;
  }
  return p;
}

namespace {

struct MetricAcc {
  double sum = 0.0;
  double sumsq = 0.0;
  void add(double v) {
    sum += v;
    sumsq += v * v;
  }
};

struct ChunkAcc {
  MetricAcc tot, sp, vol;
  double gap_sum = 0.0;
  double incr_sum = 0.0;
  double incr_sumsq = 0.0;
  std::int64_t incr_count = 0;
};

struct FlatCost {
  // Q and per-step D flattened for the accumulation loop.
  std::vector<double> q;          // n*n (empty: no cost accumulation)
  std::vector<double> d;          // n_steps*n
  double r = 1.0;
  int n = 0;
};

// Locates the first non-finite step of a failed path by replaying it alone;
// the counter-based noise keying makes the replay exact, so the hot loop
// never pays for step-level checks.
std::int64_t first_bad_step(const EngineRequest& req, int path) {
  namespace ker = pmkt::kernels;
  const auto& kt = ker::active();
  const StepPolicy& pol = *req.policy;
  const int n = pol.n;
  const int batch_base = (path / ker::kBatch) * ker::kBatch;
  const int lane = path - batch_base;
  alignas(32) double xa[4 * ker::kBatch];
  alignas(32) double xb[4 * ker::kBatch];
  alignas(32) double z[4 * ker::kBatch];
  alignas(32) double u[ker::kBatch];
  double* x_old = xa;
  double* x_next = xb;
  for (int i = 0; i < n; ++i)
    for (int l = 0; l < ker::kBatch; ++l) x_old[i * ker::kBatch + l] = req.x0(i);
  for (std::int64_t k = 0; k < pol.grid.n_steps; ++k) {
    kt.normal_fill(req.cfg.seed, static_cast<std::uint64_t>(batch_base),
                   static_cast<std::uint32_t>(k), req.cfg.lane_offset, n, z);
    kt.em_step(n, pol.m.data() + static_cast<std::size_t>(k) * n * n,
               pol.c.data() + static_cast<std::size_t>(k) * n, pol.gs.data(),
               pol.frow.data() + static_cast<std::size_t>(k) * n, pol.foff[k], z,
               x_old, x_next, u);
    for (int i = 0; i < n; ++i) {
      if (!std::isfinite(x_next[i * ker::kBatch + lane])) return k;
    }
    std::swap(x_old, x_next);
  }
  return pol.grid.n_steps;
}

void run_chunk(const EngineRequest& req, const FlatCost& fc, int chunk_begin,
               int chunk_end, ChunkAcc& acc, std::vector<Trajectory>* trajs,
               std::vector<double>* noise) {
  namespace ker = pmkt::kernels;
  const auto& kt = ker::active();
  const StepPolicy& pol = *req.policy;
  const int n = pol.n;
  const auto n_steps = pol.grid.n_steps;
  const double dt = pol.grid.dt;
  const bool do_cost = !fc.q.empty();

  alignas(32) double xa[4 * ker::kBatch];
  alignas(32) double xb[4 * ker::kBatch];
  alignas(32) double z[4 * ker::kBatch];
  alignas(32) double u[ker::kBatch];
  double path_tot[ker::kBatch], path_sp[ker::kBatch], path_vol[ker::kBatch];
  double path_gap[ker::kBatch];

  for (int base = chunk_begin; base < chunk_end; base += ker::kBatch) {
    const int live = std::min(ker::kBatch, chunk_end - base);
    double* x_old = xa;
    double* x_next = xb;
    for (int i = 0; i < n; ++i)
      for (int lane = 0; lane < ker::kBatch; ++lane)
        x_old[i * ker::kBatch + lane] = req.x0(i);
    for (int lane = 0; lane < ker::kBatch; ++lane) {
      path_tot[lane] = path_sp[lane] = path_vol[lane] = path_gap[lane] = 0.0;
    }

    for (std::int64_t k = 0; k < n_steps; ++k) {
      kt.normal_fill(req.cfg.seed, static_cast<std::uint64_t>(base),
                     static_cast<std::uint32_t>(k), req.cfg.lane_offset, n, z);
      kt.em_step(n, pol.m.data() + static_cast<std::size_t>(k) * n * n,
                 pol.c.data() + static_cast<std::size_t>(k) * n, pol.gs.data(),
                 pol.frow.data() + static_cast<std::size_t>(k) * n, pol.foff[k],
                 z, x_old, x_next, u);

      for (int lane = 0; lane < live; ++lane) {
        if (do_cost) {
          double quad = 0.0;
          for (int i = 0; i < n; ++i) {
            double row = 0.0;
            for (int j = 0; j < n; ++j)
              row += fc.q[static_cast<std::size_t>(i) * n + j] *
                     x_old[j * ker::kBatch + lane];
            quad += x_old[i * ker::kBatch + lane] * row;
          }
          double lin = 0.0;
          for (int i = 0; i < n; ++i)
            lin += fc.d[static_cast<std::size_t>(k) * n + i] *
                   x_old[i * ker::kBatch + lane];
          const double sp_int = quad + 2.0 * lin;
          const double uu = u[lane] * u[lane];
          path_sp[lane] += sp_int * dt;
          path_vol[lane] += uu * dt;
          path_tot[lane] += (sp_int + fc.r * uu) * dt;
        }
        if (n >= 2) {
          path_gap[lane] += std::fabs(x_old[req.gap_comp_a * ker::kBatch + lane] -
                                      x_old[req.gap_comp_b * ker::kBatch + lane]);
        }
        if (req.incr_comp >= 0) {
          const double delta = x_next[req.incr_comp * ker::kBatch + lane] -
                               x_old[req.incr_comp * ker::kBatch + lane];
          acc.incr_sum += delta;
          acc.incr_sumsq += delta * delta;
          ++acc.incr_count;
        }
        if (trajs != nullptr) {
          Trajectory& tr = (*trajs)[base + lane];
          for (int i = 0; i < n; ++i)
            tr.states(i, k) = x_old[i * ker::kBatch + lane];
          tr.controls(k) = u[lane];
        }
        if (noise != nullptr) {
          for (int i = 0; i < n; ++i) {
            (*noise)[((static_cast<std::size_t>(base + lane) * n_steps) + k) * n + i] =
                z[i * ker::kBatch + lane];
          }
        }
      }
      std::swap(x_old, x_next);
    }

    for (int lane = 0; lane < live; ++lane) {
      for (int i = 0; i < n; ++i) {
        if (!std::isfinite(x_old[i * ker::kBatch + lane])) {
          const std::int64_t bad = first_bad_step(req, base + lane);
          throw std::runtime_error("simulation: non-finite state on path " +
                                   std::to_string(base + lane) + " at step " +
                                   std::to_string(bad) + " (t=" +
                                   std::to_string(pol.grid.time(bad)) + ")");
        }
      }
      if (n >= 2) {
        path_gap[lane] += std::fabs(x_old[req.gap_comp_a * ker::kBatch + lane] -
                                    x_old[req.gap_comp_b * ker::kBatch + lane]);
      }
      if (trajs != nullptr) {
        Trajectory& tr = (*trajs)[base + lane];
        for (int i = 0; i < n; ++i)
          tr.states(i, n_steps) = x_old[i * ker::kBatch + lane];
      }
      acc.tot.add(path_tot[lane]);
      acc.sp.add(path_sp[lane]);
      acc.vol.add(path_vol[lane]);
      acc.gap_sum += path_gap[lane];
    }
  }
}

double se_from(const MetricAcc& m, int n) {
  if (n < 2) return 0.0;
  const double mean = m.sum / n;
  double var = (m.sumsq - static_cast<double>(n) * mean * mean) / (n - 1);
  if (var < 0.0) var = 0.0;
  return std::sqrt(var / n);
}

}  // namespace

EngineResult run_paths(const EngineRequest& req) {
  if (req.policy == nullptr) throw std::invalid_argument("run_paths: missing policy");
  req.cfg.validate();
  const StepPolicy& pol = *req.policy;
  if (req.x0.size() != pol.n) throw std::invalid_argument("run_paths: x0 size mismatch");

  FlatCost fc;
  fc.n = pol.n;
  fc.r = req.r;
  if (req.q != nullptr) {
    fc.q.resize(static_cast<std::size_t>(pol.n) * pol.n);
    for (int i = 0; i < pol.n; ++i)
      for (int j = 0; j < pol.n; ++j)
        fc.q[static_cast<std::size_t>(i) * pol.n + j] = (*req.q)(i, j);
    fc.d.assign(static_cast<std::size_t>(pol.grid.n_steps) * pol.n, 0.0);
    for (std::int64_t k = 0; k < pol.grid.n_steps; ++k) {
      const Vec& dk = req.d_nodes != nullptr
                          ? (*req.d_nodes)[k]
                          : (req.d_const != nullptr ? *req.d_const : Vec());
      if (dk.size() == pol.n) {
        for (int i = 0; i < pol.n; ++i)
          fc.d[static_cast<std::size_t>(k) * pol.n + i] = dk(i);
      }
    }
  }

  EngineResult out;
  if (req.want_trajectories) {
    out.trajectories.resize(req.cfg.n_paths);
    for (auto& tr : out.trajectories) {
      tr.states = Mat::Zero(pol.n, pol.grid.n_points());
      tr.controls = Vec::Zero(pol.grid.n_steps);
      tr.grid = pol.grid;
    }
  }
  if (req.want_noise) {
    out.noise.assign(static_cast<std::size_t>(req.cfg.n_paths) *
                         pol.grid.n_steps * pol.n,
                     0.0);
  }

  // Fixed-size chunks keep reductions deterministic on any thread count.
  constexpr int kChunk = 1024;
  const int n_chunks = (req.cfg.n_paths + kChunk - 1) / kChunk;
  std::vector<ChunkAcc> accs(n_chunks);

  auto worker = [&](int t, int n_threads, std::exception_ptr& err) {
    try {
      for (int ci = t; ci < n_chunks; ci += n_threads) {
        const int begin = ci * kChunk;
        const int end = std::min(req.cfg.n_paths, begin + kChunk);
        run_chunk(req, fc, begin, end, accs[ci],
                  req.want_trajectories ? &out.trajectories : nullptr,
                  req.want_noise ? &out.noise : nullptr);
      }
    } catch (...) {
      err = std::current_exception();
    }
  };

  const int n_threads = std::min(req.cfg.n_threads, n_chunks);
  std::vector<std::exception_ptr> errs(std::max(1, n_threads));
  if (n_threads <= 1) {
    worker(0, 1, errs[0]);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t)
      pool.emplace_back(worker, t, n_threads, std::ref(errs[t]));
    for (auto& th : pool) th.join();
  }
  for (auto& e : errs) {
    if (e) std::rethrow_exception(e);
  }

  // Merge in chunk order.
  ChunkAcc total;
  for (const auto& a : accs) {
    total.tot.sum += a.tot.sum;
    total.tot.sumsq += a.tot.sumsq;
    total.sp.sum += a.sp.sum;
    total.sp.sumsq += a.sp.sumsq;
    total.vol.sum += a.vol.sum;
    total.vol.sumsq += a.vol.sumsq;
    total.gap_sum += a.gap_sum;
    total.incr_sum += a.incr_sum;
    total.incr_sumsq += a.incr_sumsq;
    total.incr_count += a.incr_count;
  }

  const int np = req.cfg.n_paths;
  out.cost.n_paths = np;
  out.cost.total = total.tot.sum / np;
  out.cost.state_penalizing = total.sp.sum / np;
  out.cost.volatility = total.vol.sum / np;
  out.cost.se_total = se_from(total.tot, np);
  out.cost.se_state_penalizing = se_from(total.sp, np);
  out.cost.se_volatility = se_from(total.vol, np);
  out.mean_abs_gap =
      total.gap_sum / (static_cast<double>(np) * pol.grid.n_points());
  if (total.incr_count > 1) {
    const double mean = total.incr_sum / total.incr_count;
    out.incr_variance = (total.incr_sumsq - total.incr_count * mean * mean) /
                        (total.incr_count - 1);
  }
  return out;
}

std::vector<Trajectory> simulate_closed_loop(const LinearSystem& sys,
                                             const QuadraticCost& cost,
                                             const RiccatiSolution& sol,
                                             const Vec& x0, const SimConfig& cfg) {
  const StepPolicy pol = make_step_policy(sys, cost, sol, cfg.grid);
  EngineRequest req;
  req.policy = &pol;
  req.x0 = x0;
  req.cfg = cfg;
  req.want_trajectories = true;
  return run_paths(req).trajectories;
}

std::vector<Trajectory> simulate_closed_loop(const LinearSystem& sys,
                                             const QuadraticCost& cost,
                                             const RiccatiSolution& sol,
                                             const MarketState& x0,
                                             const SimConfig& cfg) {
  return simulate_closed_loop(sys, cost, sol, x0.to_vec(), cfg);
}

CostEstimate simulate_costs(const LinearSystem& sys, const QuadraticCost& cost,
                            const RiccatiSolution& sol, const Vec& x0,
                            const SimConfig& cfg) {
  const StepPolicy pol = make_step_policy(sys, cost, sol, cfg.grid);
  EngineRequest req;
  req.policy = &pol;
  req.x0 = x0;
  req.cfg = cfg;
  req.q = &cost.q;
  req.d_const = &cost.d;
  req.r = cost.r;
  return run_paths(req).cost;
}

CostEstimate estimate_costs(const std::vector<Trajectory>& trajs,
                            const QuadraticCost& cost) {
  if (trajs.empty()) throw std::invalid_argument("estimate_costs: empty trajectory list");
  MetricAcc tot, sp, vol;
  for (const auto& tr : trajs) {
    const double dt = tr.grid.dt;
    double p_tot = 0.0, p_sp = 0.0, p_vol = 0.0;
    for (std::int64_t k = 0; k < tr.grid.n_steps; ++k) {
      const Vec x = tr.states.col(k);
      const double sp_int = x.dot(cost.q * x) + 2.0 * x.dot(cost.d);
      const double uu = tr.controls(k) * tr.controls(k);
      p_sp += sp_int * dt;
      p_vol += uu * dt;
      p_tot += (sp_int + cost.r * uu) * dt;
    }
    tot.add(p_tot);
    sp.add(p_sp);
    vol.add(p_vol);
  }
  CostEstimate out;
  out.n_paths = static_cast<int>(trajs.size());
  out.total = tot.sum / out.n_paths;
  out.state_penalizing = sp.sum / out.n_paths;
  out.volatility = vol.sum / out.n_paths;
  out.se_total = se_from(tot, out.n_paths);
  out.se_state_penalizing = se_from(sp, out.n_paths);
  out.se_volatility = se_from(vol, out.n_paths);
  return out;
}

double mean_abs_gap(const std::vector<Trajectory>& trajs) {
  if (trajs.empty()) throw std::invalid_argument("mean_abs_gap: empty trajectory list");
  double sum = 0.0;
  std::int64_t count = 0;
  for (const auto& tr : trajs) {
    if (tr.states.rows() < 2)
      throw std::invalid_argument("mean_abs_gap: states lack demand/supply components");
    for (std::int64_t k = 0; k < tr.grid.n_points(); ++k) {
      sum += std::fabs(tr.states(0, k) - tr.states(1, k));
      ++count;
    }
  }
  return sum / static_cast<double>(count);
}

void export_trajectories_csv(const std::string& path,
                             const std::vector<Trajectory>& trajs,
                             const std::vector<std::string>& comp_names) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << "path,t";
  for (const auto& name : comp_names) os << ',' << name;
  os << ",u\n";
  char buf[64];
  for (std::size_t pi = 0; pi < trajs.size(); ++pi) {
    const auto& tr = trajs[pi];
    for (std::int64_t k = 0; k <= tr.grid.n_steps; ++k) {
      os << pi;
      std::snprintf(buf, sizeof buf, "%.17g", tr.grid.time(k));
      os << ',' << buf;
      for (Eigen::Index i = 0; i < tr.states.rows(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", tr.states(i, k));
        os << ',' << buf;
      }
      if (k < tr.grid.n_steps) {
        std::snprintf(buf, sizeof buf, "%.17g", tr.controls(k));
        os << ',' << buf;
      } else {
        os << ',';
      }
      os << '\n';
    }
  }
}

}  // namespace pmkt
