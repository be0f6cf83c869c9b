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

#include "pmkt/kernels.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

#include "kernel_detail.hpp"

namespace pmkt::kernels {

namespace {

// Noise generation stays on the scalar reference path (Philox is integer
// work; the fp-heavy kernels below are the ones worth vectorizing here).
void normal_fill_neon(std::uint64_t seed, std::uint64_t path0,
                      std::uint32_t step, std::uint32_t lane0, int n_comp,
                      double* z) {
  for (int comp = 0; comp < n_comp; ++comp) {
    for (int lane = 0; lane < kBatch; ++lane) {
      z[comp * kBatch + lane] = detail::normal_one(
          seed, path0 + static_cast<std::uint64_t>(lane), step, lane0 + comp);
    }
  }
}

void em_step_neon(int n, const double* m, const double* c, const double* gs,
                  const double* frow, double foff, const double* z,
                  const double* x_old, double* x_next, double* u) {
  for (int off = 0; off < kBatch; off += 2) {
    float64x2_t xj[4];
    for (int j = 0; j < n; ++j) xj[j] = vld1q_f64(x_old + j * kBatch + off);
    float64x2_t acc_u = vdupq_n_f64(foff);
    for (int j = 0; j < n; ++j) {
      acc_u = vfmaq_f64(acc_u, vdupq_n_f64(frow[j]), xj[j]);
    }
    vst1q_f64(u + off, acc_u);
    for (int i = 0; i < n; ++i) {
      float64x2_t acc = vdupq_n_f64(c[i]);
      for (int j = 0; j < n; ++j) {
        acc = vfmaq_f64(acc, vdupq_n_f64(m[i * n + j]), xj[j]);
      }
      for (int j = 0; j < n; ++j) {
        acc = vfmaq_f64(acc, vdupq_n_f64(gs[i * n + j]),
                        vld1q_f64(z + j * kBatch + off));
      }
      vst1q_f64(x_next + i * kBatch + off, acc);
    }
  }
}

void hjb_row_neon(const HjbRowArgs& a) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  const float64x2_t vdt = vdupq_n_f64(a.dt);
  const float64x2_t vg = vdupq_n_f64(a.g);
  const float64x2_t vnum = vdupq_n_f64(-a.u_max);
  int j = 1;
  for (; j + 2 <= a.np - 1; j += 2) {
    const float64x2_t vc = vld1q_f64(a.v + j);
    const float64x2_t vr = vld1q_f64(a.v + j + 1);
    const float64x2_t vl = vld1q_f64(a.v + j - 1);
    const float64x2_t vdpj = vld1q_f64(a.v_dp + j);
    const float64x2_t vdmj = vld1q_f64(a.v_dm + j);
    const float64x2_t vspj = vld1q_f64(a.v_sp + j);
    const float64x2_t vsmj = vld1q_f64(a.v_sm + j);
    const float64x2_t jv = {static_cast<double>(j), static_cast<double>(j + 1)};
    const float64x2_t pj = vfmaq_f64(vdupq_n_f64(a.p0), jv, vdupq_n_f64(a.dp));
    const float64x2_t fd = vfmaq_f64(vdupq_n_f64(a.fd0), vdupq_n_f64(a.fdp), pj);
    const float64x2_t fs = vfmaq_f64(vdupq_n_f64(a.fs0), vdupq_n_f64(a.fsp), pj);
    const float64x2_t dup_d = vmulq_f64(vsubq_f64(vdpj, vc), vdupq_n_f64(a.inv_dxd));
    const float64x2_t ddn_d = vmulq_f64(vsubq_f64(vc, vdmj), vdupq_n_f64(a.inv_dxd));
    const float64x2_t dup_s = vmulq_f64(vsubq_f64(vspj, vc), vdupq_n_f64(a.inv_dxs));
    const float64x2_t ddn_s = vmulq_f64(vsubq_f64(vc, vsmj), vdupq_n_f64(a.inv_dxs));
    const float64x2_t adv_d = vaddq_f64(vmulq_f64(vmaxq_f64(fd, zero), dup_d),
                                        vmulq_f64(vminq_f64(fd, zero), ddn_d));
    const float64x2_t adv_s = vaddq_f64(vmulq_f64(vmaxq_f64(fs, zero), dup_s),
                                        vmulq_f64(vminq_f64(fs, zero), ddn_s));
    const float64x2_t dup_p = vmulq_f64(vsubq_f64(vr, vc), vdupq_n_f64(a.inv_dxp));
    const float64x2_t ddn_p = vmulq_f64(vsubq_f64(vc, vl), vdupq_n_f64(a.inv_dxp));
    const float64x2_t bang =
        vmulq_f64(vnum, vmaxq_f64(vmaxq_f64(ddn_p, vnegq_f64(dup_p)), zero));
    const float64x2_t lap_d = vmulq_f64(
        vdupq_n_f64(a.cdd), vaddq_f64(vsubq_f64(vdpj, vc), vsubq_f64(vdmj, vc)));
    const float64x2_t lap_s = vmulq_f64(
        vdupq_n_f64(a.css), vaddq_f64(vsubq_f64(vspj, vc), vsubq_f64(vsmj, vc)));
    const float64x2_t lap_p = vmulq_f64(
        vdupq_n_f64(a.cpp), vaddq_f64(vsubq_f64(vr, vc), vsubq_f64(vl, vc)));
    float64x2_t rhs = vaddq_f64(adv_d, adv_s);
    rhs = vaddq_f64(rhs, bang);
    rhs = vaddq_f64(rhs, lap_d);
    rhs = vaddq_f64(rhs, lap_s);
    rhs = vaddq_f64(rhs, lap_p);
    rhs = vaddq_f64(rhs, vg);
    vst1q_f64(a.out + j, vfmaq_f64(vc, vdt, rhs));
  }
  for (; j < a.np - 1; ++j) {
    a.out[j] = detail::hjb_node(a, j);
  }
}

}  // namespace

const KernelTable* neon_table() {
  static const KernelTable table{"neon", normal_fill_neon, em_step_neon,
                                 hjb_row_neon};
  return &table;
}

}  // namespace pmkt::kernels

#else

namespace pmkt::kernels {
const KernelTable* neon_table() { return nullptr; }
}  // namespace pmkt::kernels

#endif
