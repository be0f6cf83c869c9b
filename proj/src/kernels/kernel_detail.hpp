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

#ifndef PMKT_KERNEL_DETAIL_HPP
#define PMKT_KERNEL_DETAIL_HPP

#include <cmath>

#include "pmkt/kernels.hpp"
#include "pmkt/rng.hpp"

// Reference node/lane arithmetic shared by the scalar kernels and the tail
// paths of the vector kernels. Operation order and fma placement here define
// the bit pattern every variant must reproduce. min/max follow the x86
// vmaxpd/vminpd convention (second operand wins on ties) so scalar and
// vector agree on signed zeros.
namespace pmkt::kernels::detail {

inline double sel_max(double a, double b) { return a > b ? a : b; }
inline double sel_min(double a, double b) { return a < b ? a : b; }

inline double normal_one(std::uint64_t seed, std::uint64_t path,
                         std::uint32_t step, std::uint32_t lane) {
  const double u = rng::uniform_from_bits(rng::draw_bits(seed, path, step, lane));
  const double q = u - 0.5;
  if (std::fabs(q) <= 0.425) return rng::inv_normal_cdf_central(u);
  return rng::inv_normal_cdf_tail(u);
}

inline double em_lane_u(int n, const double* frow, double foff, const double* x,
                        int lane) {
  double acc = foff;
  for (int j = 0; j < n; ++j) acc = std::fma(frow[j], x[j * kBatch + lane], acc);
  return acc;
}

inline double em_lane_row(int n, const double* mrow, double ci,
                          const double* gsrow, const double* x, const double* z,
                          int lane) {
  double acc = ci;
  for (int j = 0; j < n; ++j) acc = std::fma(mrow[j], x[j * kBatch + lane], acc);
  for (int j = 0; j < n; ++j) acc = std::fma(gsrow[j], z[j * kBatch + lane], acc);
  return acc;
}

inline double hjb_node(const HjbRowArgs& a, int j) {
  const double vc = a.v[j];
  const double pj = std::fma(static_cast<double>(j), a.dp, a.p0);
  const double fd = std::fma(a.fdp, pj, a.fd0);
  const double fs = std::fma(a.fsp, pj, a.fs0);
  const double dup_d = (a.v_dp[j] - vc) * a.inv_dxd;
  const double ddn_d = (vc - a.v_dm[j]) * a.inv_dxd;
  const double dup_s = (a.v_sp[j] - vc) * a.inv_dxs;
  const double ddn_s = (vc - a.v_sm[j]) * a.inv_dxs;
  const double adv_d = sel_max(fd, 0.0) * dup_d + sel_min(fd, 0.0) * ddn_d;
  const double adv_s = sel_max(fs, 0.0) * dup_s + sel_min(fs, 0.0) * ddn_s;
  const double dup_p = (a.v[j + 1] - vc) * a.inv_dxp;
  const double ddn_p = (vc - a.v[j - 1]) * a.inv_dxp;
  const double bang = -a.u_max * sel_max(sel_max(ddn_p, -dup_p), 0.0);
  const double lap_d = a.cdd * ((a.v_dp[j] - vc) + (a.v_dm[j] - vc));
  const double lap_s = a.css * ((a.v_sp[j] - vc) + (a.v_sm[j] - vc));
  const double lap_p = a.cpp * ((a.v[j + 1] - vc) + (a.v[j - 1] - vc));
  const double rhs = adv_d + adv_s + bang + lap_d + lap_s + lap_p + a.g;
  return std::fma(a.dt, rhs, vc);
}

}  // namespace pmkt::kernels::detail

#endif  // PMKT_KERNEL_DETAIL_HPP
