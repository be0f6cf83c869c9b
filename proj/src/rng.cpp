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

#include "pmkt/rng.hpp"

#include <cmath>

namespace pmkt::rng {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                    std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

inline std::array<std::uint32_t, 4> round_once(std::array<std::uint32_t, 4> c,
                                               std::uint32_t k0, std::uint32_t k1) {
  std::uint32_t hi0, lo0, hi1, lo1;
  mulhilo(kPhiloxM0, c[0], hi0, lo0);
  mulhilo(kPhiloxM1, c[2], hi1, lo1);
  return {hi1 ^ c[1] ^ k0, lo1, hi0 ^ c[3] ^ k1, lo0};
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::uint32_t key0, std::uint32_t key1) {
  for (int r = 0; r < 10; ++r) {
    if (r > 0) {
      key0 += kPhiloxW0;
      key1 += kPhiloxW1;
    }
    ctr = round_once(ctr, key0, key1);
  }
  return ctr;
}

std::uint64_t draw_bits(std::uint64_t seed, std::uint64_t path,
                        std::uint32_t step, std::uint32_t lane) {
  const std::array<std::uint32_t, 4> ctr = {
      step, lane, static_cast<std::uint32_t>(path),
      static_cast<std::uint32_t>(path >> 32)};
  const auto out = philox4x32_10(ctr, static_cast<std::uint32_t>(seed),
                                 static_cast<std::uint32_t>(seed >> 32));
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

double uniform_from_bits(std::uint64_t bits) {
  return static_cast<double>(bits >> 12) * 0x1.0p-52 + 0x1.0p-53;
}

// Wichura's PPND16 coefficients.
namespace {
constexpr double kA[8] = {3.3871328727963666080e0, 1.3314166789178437745e2,
                          1.9715909503065514427e3, 1.3731693765509461125e4,
                          4.5921953931549871457e4, 6.7265770927008700853e4,
                          3.3430575583588128105e4, 2.5090809287301226727e3};
constexpr double kB[7] = {4.2313330701600911252e1, 6.8718700749205790830e2,
                          5.3941960214247511077e3, 2.1213794301586595867e4,
                          3.9307895800092710610e4, 2.8729085735721942674e4,
                          5.2264952788528545610e3};
constexpr double kC[8] = {1.42343711074968357734e0, 4.63033784615654529590e0,
                          5.76949722146069140550e0, 3.64784832476320460504e0,
                          1.27045825245236838258e0, 2.41780725177450611770e-1,
                          2.27238449892691845833e-2, 7.74545014278341407640e-4};
constexpr double kD[7] = {2.05319162663775882187e0, 1.67638483018380384940e0,
                          6.89767334985100004550e-1, 1.48103976427480074590e-1,
                          1.51986665636164571966e-2, 5.47593808499534494600e-4,
                          1.05075007164441684324e-9};
constexpr double kE[8] = {6.65790464350110377720e0, 5.46378491116411436990e0,
                          1.78482653991729133580e0, 2.96560571828504891230e-1,
                          2.65321895265761230930e-2, 1.24266094738807843860e-3,
                          2.71155556874348757815e-5, 2.01033439929228813265e-7};
constexpr double kF[7] = {5.99832206555887937690e-1, 1.36929880922735805310e-1,
                          1.48753612908506148525e-2, 7.86869131145613259100e-4,
                          1.84631831751005468180e-5, 1.42151175831644588870e-7,
                          2.04426310338993978564e-15};

// Horner with explicit fma so scalar and vector paths round identically.
inline double ratio7(const double num[8], const double den[7], double r) {
  double p = num[7];
  p = std::fma(p, r, num[6]);
  p = std::fma(p, r, num[5]);
  p = std::fma(p, r, num[4]);
  p = std::fma(p, r, num[3]);
  p = std::fma(p, r, num[2]);
  p = std::fma(p, r, num[1]);
  p = std::fma(p, r, num[0]);
  double q = den[6];
  q = std::fma(q, r, den[5]);
  q = std::fma(q, r, den[4]);
  q = std::fma(q, r, den[3]);
  q = std::fma(q, r, den[2]);
  q = std::fma(q, r, den[1]);
  q = std::fma(q, r, den[0]);
  q = std::fma(q, r, 1.0);
  return p / q;
}
}  // namespace

double inv_normal_cdf_central(double u) {
  const double q = u - 0.5;
  const double r = std::fma(-q, q, 0.180625);
  return q * ratio7(kA, kB, r);
}

double inv_normal_cdf_tail(double u) {
  const double q = u - 0.5;
  double r = q < 0.0 ? u : 1.0 - u;
  r = std::sqrt(-std::log(r));
  double z;
  if (r <= 5.0) {
    z = ratio7(kC, kD, r - 1.6);
  } else {
    z = ratio7(kE, kF, r - 5.0);
  }
  return q < 0.0 ? -z : z;
}

double inv_normal_cdf(double u) {
  const double q = u - 0.5;
  if (std::fabs(q) <= 0.425) return inv_normal_cdf_central(u);
  return inv_normal_cdf_tail(u);
}

double normal_draw(std::uint64_t seed, std::uint64_t path, std::uint32_t step,
                   std::uint32_t lane) {
  return inv_normal_cdf(uniform_from_bits(draw_bits(seed, path, step, lane)));
}

}  // namespace pmkt::rng
