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

#include "pmkt/linalg.hpp"

#include <unsupported/Eigen/MatrixFunctions>

namespace pmkt {

Mat expm(const Mat& a) { return a.exp(); }

double spectral_abscissa(const Mat& a) {
  Eigen::EigenSolver<Mat> es(a, /*computeEigenvectors=*/false);
  return es.eigenvalues().real().maxCoeff();
}

double operator_norm(const Mat& a) {
  if (a.size() == 0) return 0.0;
  return Eigen::JacobiSVD<Mat>(a).singularValues()(0);
}

Mat psd_project(const Mat& sym) {
  Eigen::SelfAdjointEigenSolver<Mat> es(sym);
  Vec ev = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

bool is_symmetric(const Mat& a, double tol) {
  if (a.rows() != a.cols()) return false;
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= tol;
}

bool is_psd(const Mat& sym, double tol) {
  Eigen::SelfAdjointEigenSolver<Mat> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -tol;
}

bool all_finite(const Mat& a) { return a.allFinite(); }
bool all_finite(const Vec& v) { return v.allFinite(); }

}  // namespace pmkt
