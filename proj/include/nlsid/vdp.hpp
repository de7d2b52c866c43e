#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "nlsid/pnlss.hpp"
#include "nlsid/timeseries.hpp"

namespace nlsid::vdp {

/// Forced Van der Pol oscillator
///   cy'' + mu * W * (cy^2 - 1) * cy' + W^2 * cy = ydot,   W = 2 pi f_aut.
struct VdpConfig {
  double mu = 0.3;
  double f_aut = 3.0;               // Hz
  double integrator_step = 1e-3;    // seconds
  double output_sample_rate = 50.0; // Hz

  double omega_aut() const;
  void validate() const;  // requires integrator_step <= 1/(50 f_aut)
};

/// Integrates the oscillator with fixed-step RK4 and resamples the output to
/// output_sample_rate by linear interpolation. The forcing is the time
/// derivative of the displacement record; pass `input_derivative` when it is
/// known analytically, otherwise central differences of the sampled input are
/// used. Zero initial conditions unless overridden.
TimeSeries simulate_vdp(const VdpConfig& config, const TimeSeries& input,
                        std::array<double, 2> x0 = {0.0, 0.0},
                        const std::function<double(double)>& input_derivative = {});

/// Exact Euler-discretized PNLSS equivalent with step T_s: the single cubic
/// monomial x1^2 x2 carries coefficient -T_s mu W in the second state
/// equation; the output basis is empty. mu = 0 collapses to a plain linear
/// oscillator with an empty state basis.
pnlss::PnlssModel vdp_to_pnlss(const VdpConfig& config, double step);

/// Synchronization map over a (relative frequency, amplitude) grid.
struct LockinGrid {
  std::vector<double> relative_frequencies;  // f_ex / f_aut
  std::vector<double> amplitudes;
  std::vector<std::vector<bool>> locked;  // [amplitude][frequency]
};

/// Drives y(t) = A sin(2 pi f_ex t) for each grid cell, discards settle_time,
/// and marks the cell locked when the dominant output frequency matches f_ex
/// within the relative tolerance.
LockinGrid map_lockin(const VdpConfig& config, const std::vector<double>& rel_freqs,
                      const std::vector<double>& amplitudes, double settle_time,
                      double observe_time, double tolerance = 1e-2);

/// CSV matrix: header row of relative frequencies, first column amplitudes,
/// cells 0/1.
void save_lockin_csv(const LockinGrid& grid, const std::string& path);

}  // namespace nlsid::vdp
