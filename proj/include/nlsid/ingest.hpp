#pragma once

#include <string>

#include "nlsid/timeseries.hpp"

namespace nlsid::ingest {

/// Flow parameters for nondimensionalization and blockage correction.
struct FlowConditions {
  double diameter = 0.0;              // D, m
  double free_stream_velocity = 0.0;  // U, m/s
  double density = 0.0;               // rho, kg/m^3
  double domain_height = 0.0;         // H, m
  double mean_drag_coefficient = 0.0; // c_d, uncorrected

  void validate() const;
};

/// Loads a two- or three-column CSV (time,input[,output]) with a possibly
/// nonuniform, strictly increasing time grid and resamples both channels onto
/// a uniform grid at target_sample_rate by linear interpolation. Resampling
/// an already-uniform record to its own rate reproduces it within 1e-12.
/// Targets above the Nyquist rate implied by the median raw step only warn.
TimeSeries load_external_csv(const std::string& path, double target_sample_rate);

/// c_y = F_y / (1/2 rho U^2 D), per unit span.
double force_coefficient(double force_per_span, const FlowConditions& cond);

/// f_St = S U / D.
double strouhal_frequency(double strouhal_number, double diameter, double velocity);

/// U' = U (1 + 1/4 c_d D/H + 0.82 (D/H)^2).
double blockage_correct_velocity(const FlowConditions& cond);

/// c'_d = c_d (1 - 1/2 c_d D/H - 2.5 (D/H)^2).
double blockage_correct_drag(const FlowConditions& cond);

/// Reynolds number at the corrected velocity, Re' = U' D / nu.
double corrected_reynolds(const FlowConditions& cond, double kinematic_viscosity);

}  // namespace nlsid::ingest
