#pragma once

#include <Eigen/Dense>
#include <complex>

namespace nlsid {

/// Discrete-time SISO linear state-space model (A, B, C, D).
struct LinearSsModel {
  Eigen::MatrixXd a;
  Eigen::VectorXd b;
  Eigen::RowVectorXd c;
  double d = 0.0;
  double sample_rate = 0.0;

  int order() const { return static_cast<int>(a.rows()); }

  /// D + C (zI - A)^-1 B.
  std::complex<double> frequency_response(std::complex<double> z) const;

  static LinearSsModel zero(int n_x, double sample_rate);
};

}  // namespace nlsid
