#include "nlsid/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <vector>

namespace nlsid::ingest {

void FlowConditions::validate() const {
  if (diameter <= 0.0 || free_stream_velocity <= 0.0 || density <= 0.0 ||
      domain_height <= 0.0 || mean_drag_coefficient <= 0.0)
    throw std::invalid_argument("FlowConditions: all fields must be positive");
}

TimeSeries load_external_csv(const std::string& path, double target_sample_rate) {
  if (target_sample_rate <= 0.0)
    throw std::invalid_argument("load_external_csv: sample rate must be positive");
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);

  std::vector<double> time, input, output;
  std::string line;
  std::size_t row = 0;
  bool has_output = false;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    double t, u, y;
    const int got = std::sscanf(line.c_str(), "%lf,%lf,%lf", &t, &u, &y);
    if (got < 2) {
      if (row == 1) continue;  // header
      throw std::runtime_error("malformed row " + std::to_string(row) + " in " + path);
    }
    if (!time.empty() && t <= time.back())
      throw std::runtime_error("non-monotone time at row " + std::to_string(row) + " in " +
                               path);
    if (time.empty()) has_output = got == 3;
    else if ((got == 3) != has_output)
      throw std::runtime_error("inconsistent column count at row " + std::to_string(row) +
                               " in " + path);
    time.push_back(t);
    input.push_back(u);
    if (got == 3) output.push_back(y);
  }
  if (time.size() < 2) throw std::runtime_error("too few samples in " + path);

  std::vector<double> steps(time.size() - 1);
  for (std::size_t i = 0; i + 1 < time.size(); ++i) steps[i] = time[i + 1] - time[i];
  std::nth_element(steps.begin(), steps.begin() + static_cast<std::ptrdiff_t>(steps.size() / 2),
                   steps.end());
  const double median_step = steps[steps.size() / 2];
  if (target_sample_rate * median_step > 1.0 + 1e-9)
    std::cerr << "load_external_csv: target rate " << target_sample_rate
              << " Hz exceeds the raw rate implied by the median step (" << median_step
              << " s); interpolation cannot add bandwidth\n";

  const double t0 = time.front(), t_end = time.back();
  const std::size_t n_out =
      static_cast<std::size_t>(std::floor((t_end - t0) * target_sample_rate)) + 1;

  auto interpolate = [&](const std::vector<double>& values, double t) {
    const auto it = std::upper_bound(time.begin(), time.end(), t);
    std::size_t hi = static_cast<std::size_t>(it - time.begin());
    hi = std::clamp<std::size_t>(hi, 1, time.size() - 1);
    const std::size_t lo = hi - 1;
    const double w = (t - time[lo]) / (time[hi] - time[lo]);
    return values[lo] + w * (values[hi] - values[lo]);
  };

  TimeSeries ts;
  ts.sample_rate = target_sample_rate;
  ts.label = path;
  ts.input.resize(n_out);
  if (has_output) ts.output.resize(n_out);
  for (std::size_t i = 0; i < n_out; ++i) {
    const double t = t0 + static_cast<double>(i) / target_sample_rate;
    ts.input[i] = interpolate(input, std::min(t, t_end));
    if (has_output) ts.output[i] = interpolate(output, std::min(t, t_end));
  }
  ts.validate();
  return ts;
}

double force_coefficient(double force_per_span, const FlowConditions& cond) {
  cond.validate();
  return force_per_span / (0.5 * cond.density * cond.free_stream_velocity *
                           cond.free_stream_velocity * cond.diameter);
}

double strouhal_frequency(double strouhal_number, double diameter, double velocity) {
  if (strouhal_number < 0.0 || diameter <= 0.0 || velocity <= 0.0)
    throw std::invalid_argument("strouhal_frequency: bad arguments");
  return strouhal_number * velocity / diameter;
}

double blockage_correct_velocity(const FlowConditions& cond) {
  cond.validate();
  const double ratio = cond.diameter / cond.domain_height;
  return cond.free_stream_velocity *
         (1.0 + 0.25 * cond.mean_drag_coefficient * ratio + 0.82 * ratio * ratio);
}

double blockage_correct_drag(const FlowConditions& cond) {
  cond.validate();
  const double ratio = cond.diameter / cond.domain_height;
  return cond.mean_drag_coefficient *
         (1.0 - 0.5 * cond.mean_drag_coefficient * ratio - 2.5 * ratio * ratio);
}

double corrected_reynolds(const FlowConditions& cond, double kinematic_viscosity) {
  if (kinematic_viscosity <= 0.0)
    throw std::invalid_argument("corrected_reynolds: viscosity must be positive");
  return blockage_correct_velocity(cond) * cond.diameter / kinematic_viscosity;
}

}  // namespace nlsid::ingest
