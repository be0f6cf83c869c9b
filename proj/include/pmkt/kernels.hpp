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

#ifndef PMKT_KERNELS_HPP
#define PMKT_KERNELS_HPP

#include <cstdint>
#include <string>
#include <vector>

// Hot inner loops (noise generation, path stepping, HJB node sweeps) are
// implemented as scalar reference kernels plus SIMD variants selected at
// runtime. All variants are bit-for-bit equivalent: the vector code mirrors
// the scalar fma/rounding order exactly, and the equivalence suite asserts
// identical output. Kernel translation units are compiled with fp-contract
// disabled so the compiler cannot re-fuse operations differently per TU.
namespace pmkt::kernels {

// Paths are simulated in fixed batches of this many lanes.
inline constexpr int kBatch = 8;

// Fills z[comp*kBatch + lane] with standard normal draws keyed by
// (seed, path0+lane, step, lane0+comp) for comp in [0, n_comp).
using NormalFillFn = void (*)(std::uint64_t seed, std::uint64_t path0,
                              std::uint32_t step, std::uint32_t lane0,
                              int n_comp, double* z);

// One Euler-Maruyama step for a batch of paths in SoA layout
// (x[comp*kBatch + lane]).
//   u[lane]        = foff + frow . x_old[lane]
//   x_next[i]lane] = c[i] + sum_j m[i][j] x_old[j][lane]
//                         + sum_j gs[i][j] z[j][lane]
// m already folds the feedback into the drift; gs = sqrt(dt) * G.
using EmStepFn = void (*)(int n, const double* m, const double* c,
                          const double* gs, const double* frow, double foff,
                          const double* z, const double* x_old, double* x_next,
                          double* u);

// One backward-time update of an interior p-row of the HJB value field.
// f^d = fd0 + fdp*p and f^s = fs0 + fsp*p are upwinded by sign, second
// derivatives are central, and the extremal control contributes
// -u_max * max(D-V, -D+V, 0) along the price axis.
struct HjbRowArgs {
  const double* v;     // row at (id, is), length np
  const double* v_dp;  // row at id+1
  const double* v_dm;  // row at id-1
  const double* v_sp;  // row at is+1
  const double* v_sm;  // row at is-1
  double* out;
  int np;
  double p0, dp;        // p_j = p0 + j*dp
  double fd0, fdp;
  double fs0, fsp;
  double inv_dxd, inv_dxs, inv_dxp;
  double cdd, css, cpp;  // sigma^2 / (2 dx^2) diffusion weights
  double u_max;
  double g;              // running loss at (d, s); independent of p
  double dt;
};
// Updates nodes j in [1, np-1); faces are handled by the caller.
using HjbRowFn = void (*)(const HjbRowArgs& a);

struct KernelTable {
  const char* name;
  NormalFillFn normal_fill;
  EmStepFn em_step;
  HjbRowFn hjb_row;
};

// Currently selected table. First use picks the widest variant the CPU
// supports unless the PMKT_KERNELS environment variable names one.
const KernelTable& active();

// Force a variant by name ("scalar", "avx2", "neon"); false if the variant
// is not compiled in or not supported by this CPU.
bool select(const std::string& name);

std::vector<std::string> available();

const KernelTable& scalar_table();
const KernelTable* avx2_table();  // null when unsupported
const KernelTable* neon_table();  // null when unsupported

}  // namespace pmkt::kernels

#endif  // PMKT_KERNELS_HPP
