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

#include <doctest.h>

#include <cmath>
#include <set>

#include "pmkt/rng.hpp"
#include "support/oracles.hpp"

using namespace pmkt;

TEST_CASE("philox4x32-10 reference vectors") {
  // Known-answer vectors for counter/key all-zeros, all-ones, and the
  // standard pi-digit pattern.
  auto out = rng::philox4x32_10({0u, 0u, 0u, 0u}, 0u, 0u);
  CHECK(out[0] == 0x6627e8d5u);
  CHECK(out[1] == 0xe169c58du);
  CHECK(out[2] == 0xbc57ac4cu);
  CHECK(out[3] == 0x9b00dbd8u);

  out = rng::philox4x32_10({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                           0xffffffffu, 0xffffffffu);
  CHECK(out[0] == 0x408f276du);
  CHECK(out[1] == 0x41c83b0eu);
  CHECK(out[2] == 0xa20bc7c6u);
  CHECK(out[3] == 0x6d5451fdu);

  out = rng::philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                           0xa4093822u, 0x299f31d0u);
  CHECK(out[0] == 0xd16cfe09u);
  CHECK(out[1] == 0x94fdccebu);
  CHECK(out[2] == 0x5001e420u);
  CHECK(out[3] == 0x24126ea1u);
}

TEST_CASE("draws are pure functions of (seed, path, step, lane)") {
  CHECK(rng::draw_bits(7, 11, 13, 2) == rng::draw_bits(7, 11, 13, 2));
  std::set<std::uint64_t> seen;
  for (std::uint64_t path = 0; path < 4; ++path) {
    for (std::uint32_t step = 0; step < 4; ++step) {
      for (std::uint32_t lane = 0; lane < 4; ++lane) {
        seen.insert(rng::draw_bits(42, path, step, lane));
      }
    }
  }
  CHECK(seen.size() == 64);  // no collisions across the key space sample
  CHECK(rng::draw_bits(1, 0, 0, 0) != rng::draw_bits(2, 0, 0, 0));
}

TEST_CASE("uniform_from_bits lands strictly inside (0,1)") {
  CHECK(rng::uniform_from_bits(0) > 0.0);
  CHECK(rng::uniform_from_bits(~0ull) < 1.0);
  double sum = 0.0, sumsq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng::uniform_from_bits(rng::draw_bits(3, i, 0, 0));
    sum += u;
    sumsq += u * u;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(mean == doctest::Approx(0.5).epsilon(0.01));
  CHECK(var == doctest::Approx(1.0 / 12.0).epsilon(0.02));
}

TEST_CASE("inverse normal CDF inverts the normal CDF") {
  CHECK(rng::inv_normal_cdf(0.5) == 0.0);
  CHECK(rng::inv_normal_cdf(0.975) == doctest::Approx(1.959964).epsilon(1e-5));
  CHECK(rng::inv_normal_cdf(0.025) == doctest::Approx(-1.959964).epsilon(1e-5));
  // Round trip against an independent CDF over central and tail regions.
  for (double u = 1e-12; u < 1.0; u = u < 0.5 ? u * 3.7 : 1.0 - (1.0 - u) / 3.7) {
    const double z = rng::inv_normal_cdf(u);
    CHECK(test::normal_cdf(z) == doctest::Approx(u).epsilon(1e-9));
    if (u > 0.9999999) break;
  }
}

TEST_CASE("normal draws have standard moments") {
  double sum = 0.0, sumsq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng::normal_draw(99, i, 5, 1);
    sum += z;
    sumsq += z * z;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::fabs(mean) < 0.01);
  CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}
