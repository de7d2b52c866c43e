#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "nlsid/linear_model.hpp"
#include "nlsid/timeseries.hpp"

namespace nlsid::freqid {

/// Nonparametric Best Linear Approximation at the excited lines k*f0 with
/// noise and total-distortion variances, both scaled to the mean FRF.
struct FrfEstimate {
  std::vector<double> frequencies;             // Hz
  std::vector<std::complex<double>> g_bla;
  std::vector<double> var_noise;               // within-realization period scatter
  std::vector<double> var_total;               // across-realization scatter
  std::vector<std::uint8_t> valid;             // 0: flagged invalid (zero input line)
  int n_realizations = 0;
  int n_periods = 0;
  double sample_rate = 0.0;

  std::size_t size() const { return frequencies.size(); }
  /// Lines where var_total < var_noise / P; the estimate is stochastic, so a
  /// few such lines are expected, but more than 20% is suspicious.
  std::size_t suspicious_variance_lines() const;
};

/// Spectral-averaging BLA over periodic records: per realization the period
/// DFTs are averaged, the per-realization FRF is the ratio of the averaged
/// spectra, and the BLA is the mean over realizations. All records must share
/// sample rate and period structure and carry >= 2 periods; >= 2 realizations
/// are required for the total variance.
FrfEstimate estimate_bla(const std::vector<TimeSeries>& records, int n_excited_lines);

/// Weighted FIR fit: minimizes sum_k |G_k - sum_j h_j z_k^-j|^2 / var_k over
/// taps h_0..h_n_taps and returns the delay-line state-space form (n_x =
/// n_taps).
LinearSsModel fit_fir(const FrfEstimate& frf, int n_taps);

/// Sanathanan-Koerner iteratively reweighted rational fit B(z)/A(z), n_sk_iters
/// passes, converted to controllable canonical state space. Unstable poles are
/// reflected inside the unit circle with a warning and the numerator refit.
LinearSsModel fit_rational(const FrfEstimate& frf, int n_num, int n_den, int n_sk_iters);

/// Weighted cost sum_k |G_k - G_par(z_k)|^2 / var_k of a parametric model
/// against the nonparametric estimate.
double weighted_fit_cost(const FrfEstimate& frf, const LinearSsModel& model);

enum class FitKind { Fir, Rational };

/// Fits every candidate order and reports (order, weighted cost); no
/// automatic selection. Rational candidates use n_num = n_den = order.
std::vector<std::pair<int, double>> scan_model_order(const FrfEstimate& frf,
                                                     const std::vector<int>& candidate_orders,
                                                     FitKind kind);

/// CSV export: freq_hz, re_g, im_g, var_noise, var_total.
void save_frf_csv(const FrfEstimate& frf, const std::string& path);
FrfEstimate load_frf_csv(const std::string& path);

}  // namespace nlsid::freqid
