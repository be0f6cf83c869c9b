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

#ifndef PMKT_RNG_HPP
#define PMKT_RNG_HPP

#include <array>
#include <cstdint>

namespace pmkt::rng {

// Counter-based generator (Philox 4x32, 10 rounds). Every draw is a pure
// function of (seed, path, step, lane); streams are order-independent, so
// paths can run on any thread in any order and still see identical noise.
// The lane index separates state components and, in the game, agents.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::uint32_t key0, std::uint32_t key1);

std::uint64_t draw_bits(std::uint64_t seed, std::uint64_t path,
                        std::uint32_t step, std::uint32_t lane);

// Uniform in (0,1) with 52-bit resolution, never returning 0 or 1.
double uniform_from_bits(std::uint64_t bits);

// Inverse of the standard normal CDF (Wichura's rational approximations,
// accurate to ~1e-15). The central branch is pure fma/divide arithmetic and
// is mirrored bit-for-bit by the vector kernels.
double inv_normal_cdf(double u);

// Central branch only, valid for |u - 0.5| <= 0.425. Exposed so vector
// kernels can fall back to the identical scalar tail path.
double inv_normal_cdf_central(double u);
double inv_normal_cdf_tail(double u);

double normal_draw(std::uint64_t seed, std::uint64_t path, std::uint32_t step,
                   std::uint32_t lane);

}  // namespace pmkt::rng

#endif  // PMKT_RNG_HPP
