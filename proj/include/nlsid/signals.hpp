#pragma once

#include <cstdint>
#include <vector>

#include "nlsid/timeseries.hpp"

namespace nlsid::signals {

/// Random-phase multisine: y(t) = (1/sqrt(N)) * sum_n A_n sin(2 pi n f0 t + phi_n),
/// phases uniform in [0, 2 pi) and independent per realization.
struct MultisineSpec {
  double f0 = 0.0;           // Hz
  int n_lines = 0;           // N
  std::vector<double> amplitudes;  // length N
  double sample_rate = 0.0;  // Hz
  int n_periods = 1;         // P
  int n_realizations = 1;    // M
  std::uint64_t rng_seed = 0;

  void validate() const;
  /// Samples per period; throws when f0 does not divide sample_rate into an
  /// integer count.
  std::size_t samples_per_period() const;
};

enum class SweepDirection { Up, Down, UpThenDown };

/// Linear chirp between f_start and f_end over `duration` seconds per
/// direction, with optional zero tail.
struct SweepSpec {
  double f_start = 0.0;
  double f_end = 0.0;
  double duration = 0.0;  // seconds, per direction
  double amplitude = 0.0;
  double sample_rate = 0.0;
  SweepDirection direction = SweepDirection::Up;
  double hold_tail = 0.0;  // seconds of zeros appended

  void validate() const;
};

/// Per-realization phases, deterministic given rng_seed.
std::vector<std::vector<double>> multisine_phases(const MultisineSpec& spec);

/// M realizations, each P identical periods. Samples within a realization are
/// bit-identical across periods (one period is generated and tiled).
std::vector<TimeSeries> generate_multisine(const MultisineSpec& spec);

/// Time derivative of the same realizations (same phases as
/// generate_multisine for the same spec).
std::vector<TimeSeries> generate_multisine_derivative(const MultisineSpec& spec);

/// Instantaneous phase of the sweep at time t (starts at 0).
double sweep_phase(const SweepSpec& spec, double t);
/// Commanded instantaneous frequency at time t (Hz).
double sweep_frequency(const SweepSpec& spec, double t);

TimeSeries generate_sweep(const SweepSpec& spec);
TimeSeries generate_sweep_derivative(const SweepSpec& spec);

/// Sweep from 0 to f_target over ramp_duration, then constant-frequency hold;
/// phase continuous at the junction.
TimeSeries generate_ramped_sine(double f_target, double amplitude, double ramp_duration,
                                double hold_duration, double sample_rate);
TimeSeries generate_ramped_sine_derivative(double f_target, double amplitude,
                                           double ramp_duration, double hold_duration,
                                           double sample_rate);
/// Phase of the ramped sine at time t.
double ramped_sine_phase(double f_target, double ramp_duration, double t);

enum class Channel { Input, Output };

/// Instantaneous frequency in Hz via the phase derivative of the analytic
/// signal, smoothed by a centered moving average. Edge samples (half a
/// window plus one) are flagged invalid with NaN.
std::vector<double> estimate_instantaneous_frequency(const TimeSeries& ts, Channel channel,
                                                     int smoothing_window);

/// Drops the first n_discard periods of a periodic record.
TimeSeries remove_transient_periods(const TimeSeries& ts, std::size_t n_discard);

/// Joins records of equal sample rate into one record; part boundaries are
/// kept as metadata for the weighted rms error.
TimeSeries concatenate(const std::vector<TimeSeries>& parts);

}  // namespace nlsid::signals
