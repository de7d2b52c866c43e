#include "nlsid/freqid.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <stdexcept>

#include "json.hpp"
#include "nlsid/dsp.hpp"

namespace nlsid::freqid {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
using cd = std::complex<double>;

// Per-line regression weights 1/var, floored so that noise-free estimates
// (var == 0) degrade to an unweighted fit, and normalized to max 1 so that a
// common rescaling of the variances leaves the fit unchanged.
std::vector<double> line_weights(const FrfEstimate& frf) {
  double max_var = 0.0;
  for (std::size_t k = 0; k < frf.size(); ++k)
    if (frf.valid[k]) max_var = std::max(max_var, frf.var_total[k]);
  const double floor = max_var > 0.0 ? 1e-14 * max_var : 1.0;

  std::vector<double> w(frf.size(), 0.0);
  double max_w = 0.0;
  for (std::size_t k = 0; k < frf.size(); ++k) {
    if (!frf.valid[k]) continue;
    w[k] = 1.0 / std::max(frf.var_total[k], floor);
    max_w = std::max(max_w, w[k]);
  }
  if (max_w > 0.0)
    for (double& v : w) v /= max_w;
  return w;
}

cd unit_z(double freq_hz, double sample_rate) {
  const double ang = kTwoPi * freq_hz / sample_rate;
  return {std::cos(ang), std::sin(ang)};
}

// Complex weighted least squares |diag(sqrt(w)) (M x - rhs)|^2 as a stacked
// real problem.
Eigen::VectorXd solve_complex_ls(const Eigen::MatrixXcd& m, const Eigen::VectorXcd& rhs,
                                 const std::vector<double>& sqrt_w, int* rank_out = nullptr) {
  const Eigen::Index rows = m.rows(), cols = m.cols();
  Eigen::MatrixXd a(2 * rows, cols);
  Eigen::VectorXd b(2 * rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double s = sqrt_w[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < cols; ++j) {
      a(2 * i, j) = s * m(i, j).real();
      a(2 * i + 1, j) = s * m(i, j).imag();
    }
    b(2 * i) = s * rhs(i).real();
    b(2 * i + 1) = s * rhs(i).imag();
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (rank_out) *rank_out = static_cast<int>(qr.rank());
  return qr.solve(b);
}

}  // namespace

std::size_t FrfEstimate::suspicious_variance_lines() const {
  std::size_t count = 0;
  for (std::size_t k = 0; k < size(); ++k)
    if (valid[k] && n_periods > 0 && var_total[k] < var_noise[k] / n_periods) ++count;
  return count;
}

FrfEstimate estimate_bla(const std::vector<TimeSeries>& records, int n_excited_lines) {
  if (records.empty()) throw std::invalid_argument("estimate_bla: no records");
  const TimeSeries& first = records.front();
  if (!first.is_periodic()) throw std::invalid_argument("estimate_bla: aperiodic records");
  const std::size_t period = first.period_length;
  const std::size_t n_periods = first.n_periods;
  const double fs = first.sample_rate;
  if (n_periods < 2) throw std::invalid_argument("estimate_bla: need >= 2 periods");
  if (n_excited_lines < 1 || static_cast<std::size_t>(n_excited_lines) >= period / 2)
    throw std::invalid_argument("estimate_bla: excited line count out of range");

  for (const TimeSeries& r : records) {
    r.validate();
    if (!r.has_output()) throw std::invalid_argument("estimate_bla: record without output");
    if (r.period_length != period || r.n_periods != n_periods || r.sample_rate != fs)
      throw std::invalid_argument("estimate_bla: records do not share the period structure");
  }

  const std::size_t n_lines = static_cast<std::size_t>(n_excited_lines);
  const std::size_t m_count = records.size();
  const std::size_t p_count = n_periods;

  FrfEstimate frf;
  frf.n_realizations = static_cast<int>(m_count);
  frf.n_periods = static_cast<int>(p_count);
  frf.sample_rate = fs;
  frf.frequencies.resize(n_lines);
  frf.g_bla.assign(n_lines, cd{0.0, 0.0});
  frf.var_noise.assign(n_lines, 0.0);
  frf.var_total.assign(n_lines, 0.0);
  frf.valid.assign(n_lines, 1);

  const double f0 = fs / static_cast<double>(period);
  for (std::size_t k = 0; k < n_lines; ++k) frf.frequencies[k] = f0 * static_cast<double>(k + 1);

  // frf_m[m][k]: per-realization FRF from period-averaged spectra (Eq. of the
  // ratio of averaged DFTs); per-period FRFs feed the noise variance.
  std::vector<std::vector<cd>> frf_m(m_count, std::vector<cd>(n_lines));
  std::vector<double> noise_var_of_mean(n_lines, 0.0);

  for (std::size_t m = 0; m < m_count; ++m) {
    std::vector<std::vector<cd>> g_mp(p_count, std::vector<cd>(n_lines));
    for (std::size_t k = 0; k < n_lines; ++k) {
      cd y_avg{0.0, 0.0}, c_avg{0.0, 0.0};
      for (std::size_t p = 0; p < p_count; ++p) {
        const cd y = dsp::dft_bin(records[m].input.data() + p * period, period, k + 1);
        const cd c = dsp::dft_bin(records[m].output.data() + p * period, period, k + 1);
        y_avg += y;
        c_avg += c;
        g_mp[p][k] = std::abs(y) > 0.0 ? c / y : cd{0.0, 0.0};
      }
      if (std::abs(y_avg) == 0.0) {
        frf.valid[k] = 0;
        frf_m[m][k] = cd{0.0, 0.0};
        continue;
      }
      frf_m[m][k] = c_avg / y_avg;
    }
    if (p_count >= 2) {
      for (std::size_t k = 0; k < n_lines; ++k) {
        cd mean{0.0, 0.0};
        for (std::size_t p = 0; p < p_count; ++p) mean += g_mp[p][k];
        mean /= static_cast<double>(p_count);
        double scatter = 0.0;
        for (std::size_t p = 0; p < p_count; ++p) scatter += std::norm(g_mp[p][k] - mean);
        noise_var_of_mean[k] +=
            scatter / static_cast<double>(p_count * (p_count - 1));
      }
    }
  }

  for (std::size_t k = 0; k < n_lines; ++k) {
    cd acc{0.0, 0.0};
    for (std::size_t m = 0; m < m_count; ++m) acc += frf_m[m][k];
    frf.g_bla[k] = acc / static_cast<double>(m_count);
    frf.var_noise[k] = noise_var_of_mean[k] / static_cast<double>(m_count * m_count);
    if (m_count >= 2) {
      double scatter = 0.0;
      for (std::size_t m = 0; m < m_count; ++m) scatter += std::norm(frf_m[m][k] - frf.g_bla[k]);
      frf.var_total[k] = scatter / static_cast<double>(m_count * (m_count - 1));
    }
  }
  return frf;
}

LinearSsModel fit_fir(const FrfEstimate& frf, int n_taps) {
  if (n_taps < 1) throw std::invalid_argument("fit_fir: n_taps must be >= 1");
  const std::vector<double> w = line_weights(frf);

  std::vector<std::size_t> lines;
  for (std::size_t k = 0; k < frf.size(); ++k)
    if (frf.valid[k]) lines.push_back(k);
  const int n_params = n_taps + 1;
  if (static_cast<int>(lines.size()) < n_params)
    throw std::invalid_argument("fit_fir: fewer valid lines than taps");

  Eigen::MatrixXcd m(static_cast<Eigen::Index>(lines.size()), n_params);
  Eigen::VectorXcd rhs(static_cast<Eigen::Index>(lines.size()));
  std::vector<double> sqrt_w(lines.size());
  for (std::size_t r = 0; r < lines.size(); ++r) {
    const std::size_t k = lines[r];
    const cd zinv = 1.0 / unit_z(frf.frequencies[k], frf.sample_rate);
    cd zj{1.0, 0.0};
    for (int j = 0; j < n_params; ++j) {
      m(static_cast<Eigen::Index>(r), j) = zj;
      zj *= zinv;
    }
    rhs(static_cast<Eigen::Index>(r)) = frf.g_bla[k];
    sqrt_w[r] = std::sqrt(w[k]);
  }

  int rank = 0;
  const Eigen::VectorXd h = solve_complex_ls(m, rhs, sqrt_w, &rank);
  if (rank < n_params)
    throw std::runtime_error("fit_fir: normal equations rank-deficient on " +
                             std::to_string(n_params - rank) + " of " +
                             std::to_string(n_params) + " tap directions");

  // Delay-line realization: x_i(t) = u(t - i), so A shifts, B injects u.
  LinearSsModel ss = LinearSsModel::zero(n_taps, frf.sample_rate);
  for (int i = 1; i < n_taps; ++i) ss.a(i, i - 1) = 1.0;
  ss.b(0) = 1.0;
  for (int j = 1; j <= n_taps; ++j) ss.c(j - 1) = h(j);
  ss.d = h(0);
  return ss;
}

namespace {

// Real polynomial coefficients (monic, descending powers of z) from roots.
std::vector<double> poly_from_roots(const std::vector<cd>& roots) {
  std::vector<cd> coeff{cd{1.0, 0.0}};
  for (const cd& r : roots) {
    coeff.push_back(cd{0.0, 0.0});
    for (std::size_t i = coeff.size() - 1; i > 0; --i) coeff[i] = coeff[i] - r * coeff[i - 1];
  }
  std::vector<double> out(coeff.size());
  for (std::size_t i = 0; i < coeff.size(); ++i) out[i] = coeff[i].real();
  return out;
}

std::vector<cd> denominator_roots(const std::vector<double>& a_coeffs) {
  const int n = static_cast<int>(a_coeffs.size());
  if (n == 0) return {};
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
  for (int j = 0; j < n; ++j) companion(0, j) = -a_coeffs[static_cast<std::size_t>(j)];
  for (int i = 1; i < n; ++i) companion(i, i - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(companion, false);
  std::vector<cd> roots(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) roots[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
  return roots;
}

}  // namespace

LinearSsModel fit_rational(const FrfEstimate& frf, int n_num, int n_den, int n_sk_iters) {
  if (n_den < 1) throw std::invalid_argument("fit_rational: n_den must be >= 1");
  if (n_num < 0 || n_num > n_den)
    throw std::invalid_argument("fit_rational: need 0 <= n_num <= n_den (proper model)");
  if (n_sk_iters < 1) throw std::invalid_argument("fit_rational: n_sk_iters must be >= 1");

  const std::vector<double> w = line_weights(frf);
  std::vector<std::size_t> lines;
  for (std::size_t k = 0; k < frf.size(); ++k)
    if (frf.valid[k]) lines.push_back(k);
  const int n_params = n_num + 1 + n_den;
  if (static_cast<int>(lines.size()) < n_params)
    throw std::invalid_argument("fit_rational: fewer valid lines than parameters");

  std::vector<cd> zinv(lines.size());
  for (std::size_t r = 0; r < lines.size(); ++r)
    zinv[r] = 1.0 / unit_z(frf.frequencies[lines[r]], frf.sample_rate);

  std::vector<double> b_coeffs(static_cast<std::size_t>(n_num) + 1, 0.0);
  std::vector<double> a_coeffs(static_cast<std::size_t>(n_den), 0.0);

  auto eval_poly = [](const std::vector<double>& c, cd zi, bool monic) {
    cd acc = monic ? cd{1.0, 0.0} : cd{0.0, 0.0};
    cd zp = monic ? zi : cd{1.0, 0.0};
    for (double v : c) {
      acc += v * zp;
      zp *= zi;
    }
    return acc;
  };

  // Sanathanan-Koerner passes: pass 1 is the Levy linearization, later
  // passes reweight by 1 / |A_prev|^2.
  for (int iter = 0; iter < n_sk_iters; ++iter) {
    Eigen::MatrixXcd m(static_cast<Eigen::Index>(lines.size()), n_params);
    Eigen::VectorXcd rhs(static_cast<Eigen::Index>(lines.size()));
    std::vector<double> sqrt_w(lines.size());
    for (std::size_t r = 0; r < lines.size(); ++r) {
      const std::size_t k = lines[r];
      const cd g = frf.g_bla[k];
      cd zp{1.0, 0.0};
      for (int j = 0; j <= n_num; ++j) {
        m(static_cast<Eigen::Index>(r), j) = zp;
        zp *= zinv[r];
      }
      zp = zinv[r];
      for (int j = 0; j < n_den; ++j) {
        m(static_cast<Eigen::Index>(r), n_num + 1 + j) = -g * zp;
        zp *= zinv[r];
      }
      rhs(static_cast<Eigen::Index>(r)) = g;
      double weight = w[k];
      if (iter > 0) {
        const cd a_prev = eval_poly(a_coeffs, zinv[r], true);
        weight /= std::max(std::norm(a_prev), 1e-30);
      }
      sqrt_w[r] = std::sqrt(weight);
    }
    const Eigen::VectorXd theta = solve_complex_ls(m, rhs, sqrt_w);
    for (int j = 0; j <= n_num; ++j) b_coeffs[static_cast<std::size_t>(j)] = theta(j);
    for (int j = 0; j < n_den; ++j) a_coeffs[static_cast<std::size_t>(j)] = theta(n_num + 1 + j);
  }

  // Stability: reflect poles outside the unit circle, then refit the
  // numerator against the FRF with the denominator fixed.
  std::vector<cd> roots = denominator_roots(a_coeffs);
  bool reflected = false;
  for (cd& p : roots) {
    if (std::abs(p) > 1.0) {
      p = 1.0 / std::conj(p);
      reflected = true;
    }
  }
  if (reflected) {
    std::cerr << "fit_rational: unstable poles reflected inside the unit circle\n";
    const std::vector<double> monic = poly_from_roots(roots);
    for (int j = 0; j < n_den; ++j) a_coeffs[static_cast<std::size_t>(j)] = monic[static_cast<std::size_t>(j) + 1];

    Eigen::MatrixXcd m(static_cast<Eigen::Index>(lines.size()), n_num + 1);
    Eigen::VectorXcd rhs(static_cast<Eigen::Index>(lines.size()));
    std::vector<double> sqrt_w(lines.size());
    for (std::size_t r = 0; r < lines.size(); ++r) {
      const std::size_t k = lines[r];
      const cd a_val = eval_poly(a_coeffs, zinv[r], true);
      cd zp{1.0, 0.0};
      for (int j = 0; j <= n_num; ++j) {
        m(static_cast<Eigen::Index>(r), j) = zp / a_val;
        zp *= zinv[r];
      }
      rhs(static_cast<Eigen::Index>(r)) = frf.g_bla[k];
      sqrt_w[r] = std::sqrt(w[k]);
    }
    const Eigen::VectorXd bb = solve_complex_ls(m, rhs, sqrt_w);
    for (int j = 0; j <= n_num; ++j) b_coeffs[static_cast<std::size_t>(j)] = bb(j);
  }

  // Controllable canonical form; C_j = b_j - b_0 a_j with b padded to n_den.
  LinearSsModel ss = LinearSsModel::zero(n_den, frf.sample_rate);
  for (int j = 0; j < n_den; ++j) ss.a(0, j) = -a_coeffs[static_cast<std::size_t>(j)];
  for (int i = 1; i < n_den; ++i) ss.a(i, i - 1) = 1.0;
  ss.b(0) = 1.0;
  const double b0 = b_coeffs[0];
  for (int j = 1; j <= n_den; ++j) {
    const double bj = j <= n_num ? b_coeffs[static_cast<std::size_t>(j)] : 0.0;
    ss.c(j - 1) = bj - b0 * a_coeffs[static_cast<std::size_t>(j) - 1];
  }
  ss.d = b0;
  return ss;
}

double weighted_fit_cost(const FrfEstimate& frf, const LinearSsModel& model) {
  const std::vector<double> w = line_weights(frf);
  double cost = 0.0;
  for (std::size_t k = 0; k < frf.size(); ++k) {
    if (!frf.valid[k]) continue;
    const cd g_par = model.frequency_response(unit_z(frf.frequencies[k], frf.sample_rate));
    cost += w[k] * std::norm(frf.g_bla[k] - g_par);
  }
  return cost;
}

std::vector<std::pair<int, double>> scan_model_order(const FrfEstimate& frf,
                                                     const std::vector<int>& candidate_orders,
                                                     FitKind kind) {
  if (candidate_orders.empty()) throw std::invalid_argument("scan_model_order: no candidates");
  std::vector<std::pair<int, double>> out;
  for (int order : candidate_orders) {
    const LinearSsModel model = kind == FitKind::Fir
                                    ? fit_fir(frf, order)
                                    : fit_rational(frf, order, order, 10);
    out.emplace_back(order, weighted_fit_cost(frf, model));
  }
  return out;
}

void save_frf_csv(const FrfEstimate& frf, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "freq_hz,re_g,im_g,var_noise,var_total\n";
  out.precision(17);
  for (std::size_t k = 0; k < frf.size(); ++k) {
    if (!frf.valid[k]) continue;
    out << frf.frequencies[k] << ',' << frf.g_bla[k].real() << ',' << frf.g_bla[k].imag()
        << ',' << frf.var_noise[k] << ',' << frf.var_total[k] << '\n';
  }
  nlohmann::json meta = {{"n_realizations", frf.n_realizations},
                         {"n_periods", frf.n_periods},
                         {"sample_rate", frf.sample_rate}};
  std::ofstream side(path + ".meta.json");
  side << meta.dump(2) << '\n';
}

FrfEstimate load_frf_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string line;
  std::getline(in, line);
  FrfEstimate frf;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double f, re, im, vn, vt;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf", &f, &re, &im, &vn, &vt) != 5)
      throw std::runtime_error("malformed FRF CSV row: " + line);
    frf.frequencies.push_back(f);
    frf.g_bla.emplace_back(re, im);
    frf.var_noise.push_back(vn);
    frf.var_total.push_back(vt);
    frf.valid.push_back(1);
  }
  std::ifstream side(path + ".meta.json");
  if (!side) throw std::runtime_error("missing FRF sidecar: " + path + ".meta.json");
  const nlohmann::json meta = nlohmann::json::parse(side);
  frf.n_realizations = meta.at("n_realizations").get<int>();
  frf.n_periods = meta.at("n_periods").get<int>();
  frf.sample_rate = meta.at("sample_rate").get<double>();
  return frf;
}

}  // namespace nlsid::freqid
