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

#ifndef PMKT_LINALG_HPP
#define PMKT_LINALG_HPP

#include <Eigen/Dense>

namespace pmkt {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Matrix exponential via scaling-and-squaring (Pade approximant).
Mat expm(const Mat& a);

/// Largest real part over the eigenvalues of a (generally non-symmetric) matrix.
double spectral_abscissa(const Mat& a);

/// Operator 2-norm (largest singular value).
double operator_norm(const Mat& a);

/// Nearest (in Frobenius norm) positive semidefinite matrix to a symmetric
/// input: eigenvalues clipped at zero.
Mat psd_project(const Mat& sym);

bool is_symmetric(const Mat& a, double tol);
bool is_psd(const Mat& sym, double tol);
bool all_finite(const Mat& a);
bool all_finite(const Vec& v);

}  // namespace pmkt

#endif  // PMKT_LINALG_HPP
