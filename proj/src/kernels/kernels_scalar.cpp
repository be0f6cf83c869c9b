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

#include "kernel_detail.hpp"
#include "pmkt/kernels.hpp"

namespace pmkt::kernels {

namespace {

void normal_fill_scalar(std::uint64_t seed, std::uint64_t path0,
                        std::uint32_t step, std::uint32_t lane0, int n_comp,
                        double* z) {
  for (int comp = 0; comp < n_comp; ++comp) {
    for (int lane = 0; lane < kBatch; ++lane) {
      z[comp * kBatch + lane] = detail::normal_one(
          seed, path0 + static_cast<std::uint64_t>(lane), step, lane0 + comp);
    }
  }
}

void em_step_scalar(int n, const double* m, const double* c, const double* gs,
                    const double* frow, double foff, const double* z,
                    const double* x_old, double* x_next, double* u) {
  for (int lane = 0; lane < kBatch; ++lane) {
    u[lane] = detail::em_lane_u(n, frow, foff, x_old, lane);
  }
  for (int i = 0; i < n; ++i) {
    for (int lane = 0; lane < kBatch; ++lane) {
      x_next[i * kBatch + lane] =
          detail::em_lane_row(n, m + i * n, c[i], gs + i * n, x_old, z, lane);
    }
  }
}

void hjb_row_scalar(const HjbRowArgs& a) {
  for (int j = 1; j < a.np - 1; ++j) {
    a.out[j] = detail::hjb_node(a, j);
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{"scalar", normal_fill_scalar, em_step_scalar,
                                 hjb_row_scalar};
  return table;
}

}  // namespace pmkt::kernels
