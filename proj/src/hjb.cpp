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

#include "pmkt/hjb.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "pmkt/kernels.hpp"
#include "pmkt/rng.hpp"

namespace pmkt {

void Grid3D::validate() const {
  if (boundary_padding < 1)
    throw std::invalid_argument("Grid3D: boundary_padding must be >= 1");
  for (int axis = 0; axis < 3; ++axis) {
    if (!(hi[axis] > lo[axis]))
      throw std::invalid_argument("Grid3D: degenerate axis " + std::to_string(axis));
    if (n[axis] - 2 * boundary_padding < 8)
      throw std::invalid_argument("Grid3D: need at least 8 interior nodes per axis");
  }
}

namespace {

struct AxisTerms {
  double adv = 0.0;
  double lap = 0.0;
  double dup = 0.0;
  double ddn = 0.0;
};

// One-sided differences and zero curvature on faces; upwind + central inside.
template <class ValueAt>
AxisTerms axis_terms(int idx, int count, ValueAt&& value_at, double vc, double f,
                     double cc, double dx) {
  AxisTerms t;
  if (idx == 0) {
    t.dup = t.ddn = (value_at(1) - vc) / dx;
    t.lap = 0.0;
  } else if (idx == count - 1) {
    t.dup = t.ddn = (vc - value_at(count - 2)) / dx;
    t.lap = 0.0;
  } else {
    t.dup = (value_at(idx + 1) - vc) / dx;
    t.ddn = (vc - value_at(idx - 1)) / dx;
    t.lap = cc * ((value_at(idx + 1) - vc) + (value_at(idx - 1) - vc));
  }
  t.adv = std::max(f, 0.0) * t.dup + std::min(f, 0.0) * t.ddn;
  return t;
}

double face_node(const HjbProblem& prob, const double* prev, const Grid3D& g,
                 double dt, double loss_ds, int id, int is, int ip) {
  const double dxd = g.step(0), dxs = g.step(1), dxp = g.step(2);
  const double d = g.coord(0, id), s = g.coord(1, is), p = g.coord(2, ip);
  const double vc = prev[g.index(id, is, ip)];
  const double cdd = 0.5 * prob.sigma_d * prob.sigma_d / (dxd * dxd);
  const double css = 0.5 * prob.sigma_s * prob.sigma_s / (dxs * dxs);
  const double cpp = 0.5 * prob.epsilon * prob.epsilon / (dxp * dxp);

  const AxisTerms td =
      axis_terms(id, g.n[0], [&](int i) { return prev[g.index(i, is, ip)]; }, vc,
                 prob.drift.fd(d, p), cdd, dxd);
  const AxisTerms ts =
      axis_terms(is, g.n[1], [&](int i) { return prev[g.index(id, i, ip)]; }, vc,
                 prob.drift.fs(s, p), css, dxs);
  const AxisTerms tp =
      axis_terms(ip, g.n[2], [&](int i) { return prev[g.index(id, is, i)]; }, vc,
                 0.0, cpp, dxp);
  const double bang = -prob.u_max * std::max(std::max(tp.ddn, -tp.dup), 0.0);
  const double rhs = td.adv + ts.adv + bang + td.lap + ts.lap + tp.lap + loss_ds;
  return vc + dt * rhs;
}

}  // namespace

ValueField solve_hjb(const HjbProblem& prob, const TimeGrid& tgrid) {
  prob.grid.validate();
  if (!prob.loss_override) prob.loss.validate();
  if (!(prob.u_max >= 0.0) || !(prob.epsilon >= 0.0) || !(prob.sigma_d >= 0.0) ||
      !(prob.sigma_s >= 0.0)) {
    throw std::invalid_argument("solve_hjb: negative coefficient");
  }
  const Grid3D& g = prob.grid;
  const double dxd = g.step(0), dxs = g.step(1), dxp = g.step(2);

  // Worst-case drift magnitudes over the box corners (affine drifts).
  double fd_max = 0.0, fs_max = 0.0;
  for (int c0 = 0; c0 < 2; ++c0) {
    for (int c1 = 0; c1 < 2; ++c1) {
      const double d = c0 ? g.hi[0] : g.lo[0];
      const double s = c0 ? g.hi[1] : g.lo[1];
      const double p = c1 ? g.hi[2] : g.lo[2];
      fd_max = std::max(fd_max, std::fabs(prob.drift.fd(d, p)));
      fs_max = std::max(fs_max, std::fabs(prob.drift.fs(s, p)));
    }
  }
  const double cfl =
      tgrid.dt * (fd_max / dxd + fs_max / dxs + prob.u_max / dxp +
                  prob.sigma_d * prob.sigma_d / (dxd * dxd) +
                  prob.sigma_s * prob.sigma_s / (dxs * dxs) +
                  prob.epsilon * prob.epsilon / (dxp * dxp));
  if (cfl > 1.0) {
    throw std::runtime_error("solve_hjb: explicit scheme unstable, CFL number " +
                             std::to_string(cfl) +
                             " > 1; shrink dt or coarsen the grid");
  }

  const std::int64_t nn = g.n_nodes();
  ValueField field;
  field.grid = g;
  field.tgrid = tgrid;
  field.epsilon = prob.epsilon;
  field.u_max = prob.u_max;
  field.cfl = cfl;
  field.v.assign(static_cast<std::size_t>(tgrid.n_points()) * nn, 0.0);

  // Running loss is independent of p: one value per (d, s) column.
  std::vector<double> loss_ds(static_cast<std::size_t>(g.n[0]) * g.n[1]);
  for (int id = 0; id < g.n[0]; ++id) {
    for (int is = 0; is < g.n[1]; ++is) {
      loss_ds[static_cast<std::size_t>(id) * g.n[1] + is] =
          prob.running_loss(g.coord(0, id), g.coord(1, is));
    }
  }

  const auto& kt = kernels::active();
  const double cdd = 0.5 * prob.sigma_d * prob.sigma_d / (dxd * dxd);
  const double css = 0.5 * prob.sigma_s * prob.sigma_s / (dxs * dxs);
  const double cpp = 0.5 * prob.epsilon * prob.epsilon / (dxp * dxp);

  for (std::int64_t t = tgrid.n_steps - 1; t >= 0; --t) {
    const double* prev = field.v.data() + (t + 1) * nn;
    double* cur = field.v.data() + t * nn;
    for (int id = 0; id < g.n[0]; ++id) {
      for (int is = 0; is < g.n[1]; ++is) {
        const double d = g.coord(0, id);
        const double s = g.coord(1, is);
        const double gl = loss_ds[static_cast<std::size_t>(id) * g.n[1] + is];
        const bool face_row =
            (id == 0 || id == g.n[0] - 1 || is == 0 || is == g.n[1] - 1);
        if (!face_row) {
          kernels::HjbRowArgs args;
          args.v = prev + g.index(id, is, 0);
          args.v_dp = prev + g.index(id + 1, is, 0);
          args.v_dm = prev + g.index(id - 1, is, 0);
          args.v_sp = prev + g.index(id, is + 1, 0);
          args.v_sm = prev + g.index(id, is - 1, 0);
          args.out = cur + g.index(id, is, 0);
          args.np = g.n[2];
          args.p0 = g.lo[2];
          args.dp = dxp;
          args.fd0 = prob.drift.add * d + prob.drift.bd;
          args.fdp = prob.drift.adp;
          args.fs0 = prob.drift.ass * s + prob.drift.bs;
          args.fsp = prob.drift.asp;
          args.inv_dxd = 1.0 / dxd;
          args.inv_dxs = 1.0 / dxs;
          args.inv_dxp = 1.0 / dxp;
          args.cdd = cdd;
          args.css = css;
          args.cpp = cpp;
          args.u_max = prob.u_max;
          args.g = gl;
          args.dt = tgrid.dt;
          kt.hjb_row(args);
          cur[g.index(id, is, 0)] = face_node(prob, prev, g, tgrid.dt, gl, id, is, 0);
          cur[g.index(id, is, g.n[2] - 1)] =
              face_node(prob, prev, g, tgrid.dt, gl, id, is, g.n[2] - 1);
        } else {
          for (int ip = 0; ip < g.n[2]; ++ip) {
            cur[g.index(id, is, ip)] =
                face_node(prob, prev, g, tgrid.dt, gl, id, is, ip);
          }
        }
      }
    }
    for (std::int64_t i = 0; i < nn; ++i) {
      if (!std::isfinite(cur[i])) {
        throw std::runtime_error("solve_hjb: non-finite value at t=" +
                                 std::to_string(tgrid.time(t)));
      }
    }
  }
  return field;
}

PolicyField extract_policy(const ValueField& field) {
  const Grid3D& g = field.grid;
  const std::int64_t nn = g.n_nodes();
  const double dxp = g.step(2);
  PolicyField pol;
  pol.grid = g;
  pol.tgrid = field.tgrid;
  pol.u_max = field.u_max;
  pol.u.assign(field.v.size(), 0.0);
  for (std::int64_t t = 0; t < field.tgrid.n_points(); ++t) {
    const double* v = field.v.data() + t * nn;
    double* u = pol.u.data() + t * nn;
    for (int id = 0; id < g.n[0]; ++id) {
      for (int is = 0; is < g.n[1]; ++is) {
        for (int ip = 0; ip < g.n[2]; ++ip) {
          double dvdp;
          if (ip == 0) {
            dvdp = (v[g.index(id, is, 1)] - v[g.index(id, is, 0)]) / dxp;
          } else if (ip == g.n[2] - 1) {
            dvdp = (v[g.index(id, is, ip)] - v[g.index(id, is, ip - 1)]) / dxp;
          } else {
            dvdp = (v[g.index(id, is, ip + 1)] - v[g.index(id, is, ip - 1)]) /
                   (2.0 * dxp);
          }
          double uc = 0.0;
          if (std::fabs(dvdp) >= 1e-12) {
            uc = dvdp > 0.0 ? -field.u_max : field.u_max;
          }
          u[g.index(id, is, ip)] = uc;
        }
      }
    }
  }
  return pol;
}

double bang_bang_fraction(const PolicyField& policy) {
  const Grid3D& g = policy.grid;
  std::int64_t at_bound = 0, interior = 0;
  for (int id = 0; id < g.n[0]; ++id) {
    for (int is = 0; is < g.n[1]; ++is) {
      for (int ip = 0; ip < g.n[2]; ++ip) {
        if (!g.interior(id, is, ip)) continue;
        ++interior;
        if (std::fabs(policy.at(0, id, is, ip)) == policy.u_max) ++at_bound;
      }
    }
  }
  return interior > 0 ? static_cast<double>(at_bound) / interior : 0.0;
}

double rollout_policy_cost(const HjbProblem& prob, const PolicyField& policy,
                           const TimeGrid& tgrid, const MarketState& x0,
                           int n_paths, std::uint64_t seed) {
  if (n_paths < 1) throw std::invalid_argument("rollout: n_paths must be >= 1");
  const Grid3D& g = policy.grid;
  const double dt = tgrid.dt;
  const double sdt = std::sqrt(dt);
  auto nearest = [&](int axis, double x) {
    int i = static_cast<int>(std::lround((x - g.lo[axis]) / g.step(axis)));
    if (i < 0) i = 0;
    if (i >= g.n[axis]) i = g.n[axis] - 1;
    return i;
  };
  // Policy slices and the rollout share the solver grid when steps match;
  // otherwise nearest-not-later lookup.
  const double slice_ratio =
      static_cast<double>(policy.tgrid.n_steps) / tgrid.n_steps;
  double acc = 0.0;
  for (int path = 0; path < n_paths; ++path) {
    double d = x0.demand, s = x0.supply, p = x0.price;
    double cost = 0.0;
    for (std::int64_t k = 0; k < tgrid.n_steps; ++k) {
      cost += prob.running_loss(d, s) * dt;
      const auto slice = static_cast<std::int64_t>(k * slice_ratio);
      const double u = policy.at(slice, nearest(0, d), nearest(1, s), nearest(2, p));
      const double zd = rng::normal_draw(seed, path, static_cast<std::uint32_t>(k), 0);
      const double zs = rng::normal_draw(seed, path, static_cast<std::uint32_t>(k), 1);
      const double zp = rng::normal_draw(seed, path, static_cast<std::uint32_t>(k), 2);
      const double dn = d + prob.drift.fd(d, p) * dt + prob.sigma_d * sdt * zd;
      const double sn = s + prob.drift.fs(s, p) * dt + prob.sigma_s * sdt * zs;
      const double pn = p + u * dt + prob.epsilon * sdt * zp;
      d = dn;
      s = sn;
      p = pn;
    }
    acc += cost;
  }
  return acc / n_paths;
}

void export_hjb_csv(const std::string& path, const ValueField& field,
                    const PolicyField& policy) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << "d,s,p,value,control\n";
  const Grid3D& g = field.grid;
  char buf[64];
  for (int id = 0; id < g.n[0]; ++id) {
    for (int is = 0; is < g.n[1]; ++is) {
      for (int ip = 0; ip < g.n[2]; ++ip) {
        std::snprintf(buf, sizeof buf, "%.17g", g.coord(0, id));
        os << buf;
        std::snprintf(buf, sizeof buf, "%.17g", g.coord(1, is));
        os << ',' << buf;
        std::snprintf(buf, sizeof buf, "%.17g", g.coord(2, ip));
        os << ',' << buf;
        std::snprintf(buf, sizeof buf, "%.17g", field.at(0, id, is, ip));
        os << ',' << buf;
        std::snprintf(buf, sizeof buf, "%.17g", policy.at(0, id, is, ip));
        os << ',' << buf << '\n';
      }
    }
  }
}

}  // namespace pmkt
