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

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include "kernel_detail.hpp"

namespace pmkt::kernels {

namespace {

constexpr std::uint32_t kM0 = 0xD2511F53u;
constexpr std::uint32_t kM1 = 0xCD9E8D57u;
constexpr std::uint32_t kW0 = 0x9E3779B9u;
constexpr std::uint32_t kW1 = 0xBB67AE85u;

inline void mulhilo8(__m256i v, __m256i mul, __m256i& hi, __m256i& lo) {
  const __m256i even = _mm256_mul_epu32(v, mul);
  const __m256i odd = _mm256_mul_epu32(_mm256_srli_epi64(v, 32), mul);
  lo = _mm256_blend_epi32(even, _mm256_slli_epi64(odd, 32), 0b10101010);
  hi = _mm256_blend_epi32(_mm256_srli_epi64(even, 32), odd, 0b10101010);
}

// 8 independent Philox4x32-10 streams; returns the (out0, out1) words packed
// as one u64 per lane in path-lane order.
inline void philox8(std::uint32_t step, std::uint32_t lane, __m256i c2,
                    __m256i c3, std::uint32_t seed_lo, std::uint32_t seed_hi,
                    __m256i& bits_lo, __m256i& bits_hi) {
  __m256i v0 = _mm256_set1_epi32(static_cast<int>(step));
  __m256i v1 = _mm256_set1_epi32(static_cast<int>(lane));
  __m256i v2 = c2;
  __m256i v3 = c3;
  __m256i k0 = _mm256_set1_epi32(static_cast<int>(seed_lo));
  __m256i k1 = _mm256_set1_epi32(static_cast<int>(seed_hi));
  const __m256i m0 = _mm256_set1_epi32(static_cast<int>(kM0));
  const __m256i m1 = _mm256_set1_epi32(static_cast<int>(kM1));
  const __m256i w0 = _mm256_set1_epi32(static_cast<int>(kW0));
  const __m256i w1 = _mm256_set1_epi32(static_cast<int>(kW1));
  for (int r = 0; r < 10; ++r) {
    if (r > 0) {
      k0 = _mm256_add_epi32(k0, w0);
      k1 = _mm256_add_epi32(k1, w1);
    }
    __m256i hi0, lo0, hi1, lo1;
    mulhilo8(v0, m0, hi0, lo0);
    mulhilo8(v2, m1, hi1, lo1);
    v0 = _mm256_xor_si256(_mm256_xor_si256(hi1, v1), k0);
    v1 = lo1;
    v2 = _mm256_xor_si256(_mm256_xor_si256(hi0, v3), k1);
    v3 = lo0;
  }
  // u64 = (out0 << 32) | out1 per lane.
  const __m256i a = _mm256_unpacklo_epi32(v1, v0);  // lanes 0,1,4,5
  const __m256i b = _mm256_unpackhi_epi32(v1, v0);  // lanes 2,3,6,7
  bits_lo = _mm256_permute2x128_si256(a, b, 0x20);  // lanes 0..3
  bits_hi = _mm256_permute2x128_si256(a, b, 0x31);  // lanes 4..7
}

inline __m256d uniform4(__m256i bits) {
  const __m256i shifted = _mm256_srli_epi64(bits, 12);
  const __m256i magic_i = _mm256_set1_epi64x(0x4330000000000000ll);
  const __m256d d = _mm256_sub_pd(
      _mm256_castsi256_pd(_mm256_or_si256(shifted, magic_i)),
      _mm256_set1_pd(0x1.0p52));
  return _mm256_add_pd(_mm256_mul_pd(d, _mm256_set1_pd(0x1.0p-52)),
                       _mm256_set1_pd(0x1.0p-53));
}

// Horner chain mirroring rng.cpp's ratio7.
inline __m256d ratio7(const double num[8], const double den[7], __m256d r) {
  __m256d p = _mm256_set1_pd(num[7]);
  for (int i = 6; i >= 0; --i) p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(num[i]));
  __m256d q = _mm256_set1_pd(den[6]);
  for (int i = 5; i >= 0; --i) q = _mm256_fmadd_pd(q, r, _mm256_set1_pd(den[i]));
  q = _mm256_fmadd_pd(q, r, _mm256_set1_pd(1.0));
  return _mm256_div_pd(p, q);
}

constexpr double kA[8] = {3.3871328727963666080e0, 1.3314166789178437745e2,
                          1.9715909503065514427e3, 1.3731693765509461125e4,
                          4.5921953931549871457e4, 6.7265770927008700853e4,
                          3.3430575583588128105e4, 2.5090809287301226727e3};
constexpr double kB[7] = {4.2313330701600911252e1, 6.8718700749205790830e2,
                          5.3941960214247511077e3, 2.1213794301586595867e4,
                          3.9307895800092710610e4, 2.8729085735721942674e4,
                          5.2264952788528545610e3};

inline void normal4(__m256d u, double* out) {
  const __m256d q = _mm256_sub_pd(u, _mm256_set1_pd(0.5));
  const __m256d r = _mm256_fnmadd_pd(q, q, _mm256_set1_pd(0.180625));
  const __m256d zc = _mm256_mul_pd(q, ratio7(kA, kB, r));
  const __m256d absq = _mm256_andnot_pd(_mm256_set1_pd(-0.0), q);
  const __m256d tail =
      _mm256_cmp_pd(absq, _mm256_set1_pd(0.425), _CMP_GT_OQ);
  _mm256_storeu_pd(out, zc);
  int mask = _mm256_movemask_pd(tail);
  if (mask != 0) {
    alignas(32) double uu[4];
    _mm256_storeu_pd(uu, u);
    for (int i = 0; i < 4; ++i) {
      if (mask & (1 << i)) out[i] = rng::inv_normal_cdf_tail(uu[i]);
    }
  }
}

void normal_fill_avx2(std::uint64_t seed, std::uint64_t path0,
                      std::uint32_t step, std::uint32_t lane0, int n_comp,
                      double* z) {
  alignas(32) std::uint32_t plo[kBatch], phi[kBatch];
  for (int lane = 0; lane < kBatch; ++lane) {
    const std::uint64_t p = path0 + static_cast<std::uint64_t>(lane);
    plo[lane] = static_cast<std::uint32_t>(p);
    phi[lane] = static_cast<std::uint32_t>(p >> 32);
  }
  const __m256i c2 = _mm256_load_si256(reinterpret_cast<const __m256i*>(plo));
  const __m256i c3 = _mm256_load_si256(reinterpret_cast<const __m256i*>(phi));
  const auto seed_lo = static_cast<std::uint32_t>(seed);
  const auto seed_hi = static_cast<std::uint32_t>(seed >> 32);
  for (int comp = 0; comp < n_comp; ++comp) {
    __m256i bits_lo, bits_hi;
    philox8(step, lane0 + static_cast<std::uint32_t>(comp), c2, c3, seed_lo,
            seed_hi, bits_lo, bits_hi);
    normal4(uniform4(bits_lo), z + comp * kBatch);
    normal4(uniform4(bits_hi), z + comp * kBatch + 4);
  }
}

void em_step_avx2(int n, const double* m, const double* c, const double* gs,
                  const double* frow, double foff, const double* z,
                  const double* x_old, double* x_next, double* u) {
  for (int half = 0; half < 2; ++half) {
    const int off = half * 4;
    __m256d xj[4];
    for (int j = 0; j < n; ++j) xj[j] = _mm256_loadu_pd(x_old + j * kBatch + off);
    __m256d acc_u = _mm256_set1_pd(foff);
    for (int j = 0; j < n; ++j) {
      acc_u = _mm256_fmadd_pd(_mm256_set1_pd(frow[j]), xj[j], acc_u);
    }
    _mm256_storeu_pd(u + off, acc_u);
    for (int i = 0; i < n; ++i) {
      __m256d acc = _mm256_set1_pd(c[i]);
      for (int j = 0; j < n; ++j) {
        acc = _mm256_fmadd_pd(_mm256_set1_pd(m[i * n + j]), xj[j], acc);
      }
      for (int j = 0; j < n; ++j) {
        acc = _mm256_fmadd_pd(_mm256_set1_pd(gs[i * n + j]),
                              _mm256_loadu_pd(z + j * kBatch + off), acc);
      }
      _mm256_storeu_pd(x_next + i * kBatch + off, acc);
    }
  }
}

void hjb_row_avx2(const HjbRowArgs& a) {
  const __m256d sign = _mm256_set1_pd(-0.0);
  const __m256d vdt = _mm256_set1_pd(a.dt);
  const __m256d vg = _mm256_set1_pd(a.g);
  const __m256d zero = _mm256_setzero_pd();
  const __m256d vdp = _mm256_set1_pd(a.dp);
  const __m256d vp0 = _mm256_set1_pd(a.p0);
  const __m256d vfd0 = _mm256_set1_pd(a.fd0);
  const __m256d vfdp = _mm256_set1_pd(a.fdp);
  const __m256d vfs0 = _mm256_set1_pd(a.fs0);
  const __m256d vfsp = _mm256_set1_pd(a.fsp);
  const __m256d vixd = _mm256_set1_pd(a.inv_dxd);
  const __m256d vixs = _mm256_set1_pd(a.inv_dxs);
  const __m256d vixp = _mm256_set1_pd(a.inv_dxp);
  const __m256d vcdd = _mm256_set1_pd(a.cdd);
  const __m256d vcss = _mm256_set1_pd(a.css);
  const __m256d vcpp = _mm256_set1_pd(a.cpp);
  const __m256d vnum = _mm256_set1_pd(-a.u_max);

  int j = 1;
  for (; j + 4 <= a.np - 1; j += 4) {
    const __m256d vc = _mm256_loadu_pd(a.v + j);
    const __m256d vr = _mm256_loadu_pd(a.v + j + 1);
    const __m256d vl = _mm256_loadu_pd(a.v + j - 1);
    const __m256d vdpj = _mm256_loadu_pd(a.v_dp + j);
    const __m256d vdmj = _mm256_loadu_pd(a.v_dm + j);
    const __m256d vspj = _mm256_loadu_pd(a.v_sp + j);
    const __m256d vsmj = _mm256_loadu_pd(a.v_sm + j);
    const __m256d jv = _mm256_set_pd(static_cast<double>(j + 3),
                                     static_cast<double>(j + 2),
                                     static_cast<double>(j + 1),
                                     static_cast<double>(j));
    const __m256d pj = _mm256_fmadd_pd(jv, vdp, vp0);
    const __m256d fd = _mm256_fmadd_pd(vfdp, pj, vfd0);
    const __m256d fs = _mm256_fmadd_pd(vfsp, pj, vfs0);
    const __m256d dup_d = _mm256_mul_pd(_mm256_sub_pd(vdpj, vc), vixd);
    const __m256d ddn_d = _mm256_mul_pd(_mm256_sub_pd(vc, vdmj), vixd);
    const __m256d dup_s = _mm256_mul_pd(_mm256_sub_pd(vspj, vc), vixs);
    const __m256d ddn_s = _mm256_mul_pd(_mm256_sub_pd(vc, vsmj), vixs);
    const __m256d adv_d =
        _mm256_add_pd(_mm256_mul_pd(_mm256_max_pd(fd, zero), dup_d),
                      _mm256_mul_pd(_mm256_min_pd(fd, zero), ddn_d));
    const __m256d adv_s =
        _mm256_add_pd(_mm256_mul_pd(_mm256_max_pd(fs, zero), dup_s),
                      _mm256_mul_pd(_mm256_min_pd(fs, zero), ddn_s));
    const __m256d dup_p = _mm256_mul_pd(_mm256_sub_pd(vr, vc), vixp);
    const __m256d ddn_p = _mm256_mul_pd(_mm256_sub_pd(vc, vl), vixp);
    const __m256d bang = _mm256_mul_pd(
        vnum, _mm256_max_pd(
                  _mm256_max_pd(ddn_p, _mm256_xor_pd(dup_p, sign)), zero));
    const __m256d lap_d = _mm256_mul_pd(
        vcdd, _mm256_add_pd(_mm256_sub_pd(vdpj, vc), _mm256_sub_pd(vdmj, vc)));
    const __m256d lap_s = _mm256_mul_pd(
        vcss, _mm256_add_pd(_mm256_sub_pd(vspj, vc), _mm256_sub_pd(vsmj, vc)));
    const __m256d lap_p = _mm256_mul_pd(
        vcpp, _mm256_add_pd(_mm256_sub_pd(vr, vc), _mm256_sub_pd(vl, vc)));
    __m256d rhs = _mm256_add_pd(adv_d, adv_s);
    rhs = _mm256_add_pd(rhs, bang);
    rhs = _mm256_add_pd(rhs, lap_d);
    rhs = _mm256_add_pd(rhs, lap_s);
    rhs = _mm256_add_pd(rhs, lap_p);
    rhs = _mm256_add_pd(rhs, vg);
    _mm256_storeu_pd(a.out + j, _mm256_fmadd_pd(vdt, rhs, vc));
  }
  for (; j < a.np - 1; ++j) {
    a.out[j] = detail::hjb_node(a, j);
  }
}

}  // namespace

const KernelTable* avx2_table() {
  if (!__builtin_cpu_supports("avx2") || !__builtin_cpu_supports("fma")) {
    return nullptr;
  }
  static const KernelTable table{"avx2", normal_fill_avx2, em_step_avx2,
                                 hjb_row_avx2};
  return &table;
}

}  // namespace pmkt::kernels

#else

namespace pmkt::kernels {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace pmkt::kernels

#endif
