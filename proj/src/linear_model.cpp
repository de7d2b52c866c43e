#include "nlsid/linear_model.hpp"

namespace nlsid {

std::complex<double> LinearSsModel::frequency_response(std::complex<double> z) const {
  const int n = order();
  if (n == 0) return {d, 0.0};
  Eigen::MatrixXcd zi_a = -a.cast<std::complex<double>>();
  for (int i = 0; i < n; ++i) zi_a(i, i) += z;
  const Eigen::VectorXcd x = zi_a.partialPivLu().solve(b.cast<std::complex<double>>());
  return d + (c.cast<std::complex<double>>() * x)(0);
}

LinearSsModel LinearSsModel::zero(int n_x, double sample_rate) {
  LinearSsModel m;
  m.a = Eigen::MatrixXd::Zero(n_x, n_x);
  m.b = Eigen::VectorXd::Zero(n_x);
  m.c = Eigen::RowVectorXd::Zero(n_x);
  m.d = 0.0;
  m.sample_rate = sample_rate;
  return m;
}

}  // namespace nlsid
