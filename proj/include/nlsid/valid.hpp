#pragma once

#include <functional>
#include <string>
#include <vector>

#include "nlsid/pnlss.hpp"
#include "nlsid/timeseries.hpp"

namespace nlsid::valid {

/// Weighted relative rms error over matched record parts: per part the
/// relative rms e_i = |e| / |y_true|, combined as sum_i (N_i / N) e_i.
/// Throws on an all-zero reference part.
double weighted_rms_error(const std::vector<TimeSeries>& true_parts,
                          const std::vector<TimeSeries>& model_parts);
double weighted_rms_error(const std::vector<std::vector<double>>& true_parts,
                          const std::vector<std::vector<double>>& model_parts);

/// Pearson correlation coefficient. Throws on zero-variance input.
double correlation(const std::vector<double>& truth, const std::vector<double>& model);

/// (max|truth| - max|model|) / max|truth|. Throws when the reference peak is 0.
double max_amplitude_error(const std::vector<double>& truth, const std::vector<double>& model);

/// sqrt( sum (|Y| - |Y_mod|)^2 / sum |Y|^2 ) over the full DFT grid of the
/// segment; invariant under circular time shifts. Throws on a zero-energy
/// reference.
double dft_magnitude_error(const std::vector<double>& truth, const std::vector<double>& model);

struct ExperimentResult {
  std::string label;
  double rel_frequency = 0.0;  // f_ex / f_ref
  double amplitude = 0.0;
  double e_rms = 0.0;
  double r = 0.0;
  double e_max_a = 0.0;
  double e_dft = 0.0;
  bool ok = false;
  std::string error;  // set when a truth source failed; metrics then unset
};

struct ValidationReport {
  std::vector<ExperimentResult> experiments;
  double mean_e_rms = 0.0, std_e_rms = 0.0;
  double mean_r = 0.0, std_r = 0.0;
  double mean_e_max_a = 0.0, std_e_max_a = 0.0;
  double mean_e_dft = 0.0, std_e_dft = 0.0;
  double f_ref = 0.0;
  double ramp_duration = 0.0;
  double hold_duration = 0.0;
};

struct SuiteConfig {
  double f_ref = 0.0;          // Hz; excitation frequency = rel_freq * f_ref
  double sample_rate = 0.0;    // Hz
  double ramp_duration = 8.0;  // seconds of frequency ramp
  double hold_duration = 20.0; // seconds at constant frequency
  bool estimate_u0 = false;

  void validate() const;
};

/// Truth provider: given the excitation record (input channel is the
/// excitation derivative, the model input) and the grid point, returns the
/// reference output record on the same grid. May throw; the suite records the
/// failure and continues.
using TruthSource = std::function<TimeSeries(const TimeSeries& excitation, double rel_freq,
                                             double amplitude)>;

/// Runs the model against the truth source on a grid of ramped single sines.
/// Per experiment the initial state is estimated on the ramp, the model is
/// simulated over the full record, and all four metrics are computed on the
/// hold segment (ramp end plus one settling period of f_ref onward).
ValidationReport run_validation_suite(const pnlss::PnlssModel& model,
                                      const std::vector<std::pair<double, double>>& experiments,
                                      const TruthSource& truth, const SuiteConfig& config);

/// CSV: rel_freq, amplitude, e_rms, R, e_maxA, e_dft (one row per successful
/// experiment); JSON carries everything including failures and aggregates.
void save_report_csv(const ValidationReport& report, const std::string& path);
std::string report_to_json(const ValidationReport& report);

}  // namespace nlsid::valid
