#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace nlsid {

/// Uniformly sampled input/output record.
///
/// Periodic records carry their period structure so that spectra can be
/// averaged per period. Concatenated records keep part boundaries, which the
/// weighted rms error needs.
struct TimeSeries {
  double sample_rate = 0.0;
  std::vector<double> input;
  std::vector<double> output;  // empty until measured
  std::size_t period_length = 0;  // 0: aperiodic
  std::size_t n_periods = 1;
  std::vector<std::size_t> part_lengths;  // empty: single part
  std::string label;

  std::size_t size() const { return input.size(); }
  bool has_output() const { return !output.empty(); }
  bool is_periodic() const { return period_length > 0; }
  double duration() const {
    return sample_rate > 0.0 ? static_cast<double>(size()) / sample_rate : 0.0;
  }

  /// Throws std::invalid_argument when an invariant is broken:
  /// equal channel lengths, period bookkeeping, positive sample rate.
  void validate() const;
};

/// CSV format: header `time,input,output`, one row per sample. A JSON sidecar
/// (same path with extension `.meta.json`) holds sample_rate, period_length,
/// n_periods, label and part lengths.
void save_timeseries_csv(const TimeSeries& ts, const std::string& path);

/// Loads a CSV written by save_timeseries_csv. Uniform time spacing is
/// asserted with relative tolerance 1e-9.
TimeSeries load_timeseries_csv(const std::string& path);

std::string sidecar_path(const std::string& csv_path);

}  // namespace nlsid
