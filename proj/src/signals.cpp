#include "nlsid/signals.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include "nlsid/dsp.hpp"

namespace nlsid::signals {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

void MultisineSpec::validate() const {
  if (f0 <= 0.0 || sample_rate <= 0.0)
    throw std::invalid_argument("MultisineSpec: f0 and sample_rate must be > 0");
  if (n_lines < 1) throw std::invalid_argument("MultisineSpec: n_lines must be >= 1");
  if (static_cast<int>(amplitudes.size()) != n_lines)
    throw std::invalid_argument("MultisineSpec: amplitudes must have n_lines entries");
  for (double a : amplitudes)
    if (a < 0.0) throw std::invalid_argument("MultisineSpec: amplitudes must be >= 0");
  if (f0 * n_lines >= sample_rate / 2.0)
    throw std::invalid_argument("MultisineSpec: highest excited line is not below Nyquist");
  if (n_periods < 1 || n_realizations < 1)
    throw std::invalid_argument("MultisineSpec: counts must be positive");
}

std::size_t MultisineSpec::samples_per_period() const {
  const double ratio = sample_rate / f0;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-9 * ratio || rounded < 2.0)
    throw std::invalid_argument(
        "MultisineSpec: f0 must divide sample_rate into an integer number of "
        "samples per period");
  return static_cast<std::size_t>(rounded);
}

std::vector<std::vector<double>> multisine_phases(const MultisineSpec& spec) {
  spec.validate();
  std::vector<std::vector<double>> phases(spec.n_realizations);
  for (int m = 0; m < spec.n_realizations; ++m) {
    std::seed_seq seq{static_cast<std::uint64_t>(spec.rng_seed),
                      static_cast<std::uint64_t>(m)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> uniform(0.0, kTwoPi);
    phases[m].resize(spec.n_lines);
    for (int n = 0; n < spec.n_lines; ++n) phases[m][n] = uniform(rng);
  }
  return phases;
}

namespace {

std::vector<TimeSeries> generate_multisine_impl(const MultisineSpec& spec, bool derivative) {
  const std::size_t period = spec.samples_per_period();
  const auto phases = multisine_phases(spec);
  const double scale = 1.0 / std::sqrt(static_cast<double>(spec.n_lines));

  std::vector<TimeSeries> out(spec.n_realizations);
  for (int m = 0; m < spec.n_realizations; ++m) {
    std::vector<double> one(period, 0.0);
    for (std::size_t i = 0; i < period; ++i) {
      const double t = static_cast<double>(i) / spec.sample_rate;
      double acc = 0.0;
      for (int n = 0; n < spec.n_lines; ++n) {
        const double w = kTwoPi * (n + 1) * spec.f0;
        const double arg = w * t + phases[m][n];
        acc += derivative ? spec.amplitudes[n] * w * std::cos(arg)
                          : spec.amplitudes[n] * std::sin(arg);
      }
      one[i] = scale * acc;
    }
    TimeSeries ts;
    ts.sample_rate = spec.sample_rate;
    ts.period_length = period;
    ts.n_periods = spec.n_periods;
    ts.label = (derivative ? "multisine_dot_" : "multisine_") + std::to_string(m);
    ts.input.reserve(period * spec.n_periods);
    for (int p = 0; p < spec.n_periods; ++p)
      ts.input.insert(ts.input.end(), one.begin(), one.end());
    out[m] = std::move(ts);
  }
  return out;
}

}  // namespace

std::vector<TimeSeries> generate_multisine(const MultisineSpec& spec) {
  return generate_multisine_impl(spec, false);
}

std::vector<TimeSeries> generate_multisine_derivative(const MultisineSpec& spec) {
  return generate_multisine_impl(spec, true);
}

void SweepSpec::validate() const {
  if (sample_rate <= 0.0) throw std::invalid_argument("SweepSpec: sample_rate must be > 0");
  if (f_start < 0.0 || f_start >= sample_rate / 2.0 || f_end < 0.0 ||
      f_end >= sample_rate / 2.0)
    throw std::invalid_argument("SweepSpec: endpoints must lie in [0, sample_rate/2)");
  if (duration <= 0.0) throw std::invalid_argument("SweepSpec: duration must be > 0");
  if (hold_tail < 0.0) throw std::invalid_argument("SweepSpec: hold_tail must be >= 0");
}

double sweep_phase(const SweepSpec& spec, double t) {
  const double rate = (spec.f_end - spec.f_start) / spec.duration;
  auto up = [&](double tau) {
    return kTwoPi * (spec.f_start * tau + 0.5 * rate * tau * tau);
  };
  auto down = [&](double tau) {
    return kTwoPi * (spec.f_end * tau - 0.5 * rate * tau * tau);
  };
  switch (spec.direction) {
    case SweepDirection::Up:
      return up(t);
    case SweepDirection::Down:
      return down(t);
    case SweepDirection::UpThenDown:
      if (t <= spec.duration) return up(t);
      return up(spec.duration) + down(t - spec.duration);
  }
  return 0.0;
}

double sweep_frequency(const SweepSpec& spec, double t) {
  const double rate = (spec.f_end - spec.f_start) / spec.duration;
  switch (spec.direction) {
    case SweepDirection::Up:
      return spec.f_start + rate * t;
    case SweepDirection::Down:
      return spec.f_end - rate * t;
    case SweepDirection::UpThenDown:
      if (t <= spec.duration) return spec.f_start + rate * t;
      return spec.f_end - rate * (t - spec.duration);
  }
  return 0.0;
}

namespace {

TimeSeries generate_sweep_impl(const SweepSpec& spec, bool derivative) {
  spec.validate();
  const double sweep_time =
      spec.direction == SweepDirection::UpThenDown ? 2.0 * spec.duration : spec.duration;
  const std::size_t n_sweep =
      static_cast<std::size_t>(std::llround(sweep_time * spec.sample_rate));
  const std::size_t n_tail =
      static_cast<std::size_t>(std::llround(spec.hold_tail * spec.sample_rate));

  TimeSeries ts;
  ts.sample_rate = spec.sample_rate;
  ts.label = derivative ? "sweep_dot" : "sweep";
  ts.input.resize(n_sweep + n_tail, 0.0);
  for (std::size_t i = 0; i < n_sweep; ++i) {
    const double t = static_cast<double>(i) / spec.sample_rate;
    const double phi = sweep_phase(spec, t);
    ts.input[i] = derivative
                      ? spec.amplitude * kTwoPi * sweep_frequency(spec, t) * std::cos(phi)
                      : spec.amplitude * std::sin(phi);
  }
  return ts;
}

}  // namespace

TimeSeries generate_sweep(const SweepSpec& spec) { return generate_sweep_impl(spec, false); }

TimeSeries generate_sweep_derivative(const SweepSpec& spec) {
  return generate_sweep_impl(spec, true);
}

double ramped_sine_phase(double f_target, double ramp_duration, double t) {
  if (ramp_duration <= 0.0) return kTwoPi * f_target * t;
  if (t <= ramp_duration)
    return kTwoPi * 0.5 * f_target * t * t / ramp_duration;
  return kTwoPi * (0.5 * f_target * ramp_duration + f_target * (t - ramp_duration));
}

namespace {

TimeSeries generate_ramped_sine_impl(double f_target, double amplitude, double ramp_duration,
                                     double hold_duration, double sample_rate,
                                     bool derivative) {
  if (sample_rate <= 0.0) throw std::invalid_argument("ramped sine: sample_rate must be > 0");
  if (f_target < 0.0 || f_target >= sample_rate / 2.0)
    throw std::invalid_argument("ramped sine: f_target must lie in [0, sample_rate/2)");
  if (ramp_duration < 0.0 || hold_duration < 0.0)
    throw std::invalid_argument("ramped sine: durations must be >= 0");

  const std::size_t n = static_cast<std::size_t>(
      std::llround((ramp_duration + hold_duration) * sample_rate));
  TimeSeries ts;
  ts.sample_rate = sample_rate;
  ts.label = derivative ? "ramped_sine_dot" : "ramped_sine";
  ts.input.resize(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    const double phi = ramped_sine_phase(f_target, ramp_duration, t);
    if (derivative) {
      const double f =
          (ramp_duration > 0.0 && t < ramp_duration) ? f_target * t / ramp_duration : f_target;
      ts.input[i] = amplitude * kTwoPi * f * std::cos(phi);
    } else {
      ts.input[i] = amplitude * std::sin(phi);
    }
  }
  return ts;
}

}  // namespace

TimeSeries generate_ramped_sine(double f_target, double amplitude, double ramp_duration,
                                double hold_duration, double sample_rate) {
  return generate_ramped_sine_impl(f_target, amplitude, ramp_duration, hold_duration,
                                   sample_rate, false);
}

TimeSeries generate_ramped_sine_derivative(double f_target, double amplitude,
                                           double ramp_duration, double hold_duration,
                                           double sample_rate) {
  return generate_ramped_sine_impl(f_target, amplitude, ramp_duration, hold_duration,
                                   sample_rate, true);
}

std::vector<double> estimate_instantaneous_frequency(const TimeSeries& ts, Channel channel,
                                                     int smoothing_window) {
  const std::vector<double>& x = channel == Channel::Input ? ts.input : ts.output;
  if (x.empty()) throw std::invalid_argument("instantaneous frequency: empty channel");
  if (smoothing_window < 1)
    throw std::invalid_argument("instantaneous frequency: window must be >= 1");
  if (x.size() < 4 * static_cast<std::size_t>(smoothing_window))
    throw std::invalid_argument("instantaneous frequency: signal shorter than 4 windows");

  bool all_zero = true;
  for (double v : x)
    if (v != 0.0) {
      all_zero = false;
      break;
    }
  if (all_zero)
    throw std::invalid_argument("instantaneous frequency: phase of an all-zero signal");

  const auto z = dsp::analytic_signal(x);
  std::vector<double> phase(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) phase[i] = std::arg(z[i]);
  dsp::unwrap_phase(phase);

  const std::size_t n = phase.size();
  std::vector<double> freq(n, 0.0);
  const double scale = ts.sample_rate / (2.0 * kTwoPi);
  for (std::size_t i = 1; i + 1 < n; ++i) freq[i] = (phase[i + 1] - phase[i - 1]) * scale;
  freq[0] = freq[1];
  freq[n - 1] = freq[n - 2];

  freq = dsp::moving_average(freq, smoothing_window);

  const std::size_t edge = static_cast<std::size_t>(smoothing_window / 2) + 1;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < edge && i < n; ++i) {
    freq[i] = nan;
    freq[n - 1 - i] = nan;
  }
  return freq;
}

TimeSeries remove_transient_periods(const TimeSeries& ts, std::size_t n_discard) {
  ts.validate();
  if (!ts.is_periodic())
    throw std::invalid_argument("remove_transient_periods: record is aperiodic");
  if (n_discard >= ts.n_periods)
    throw std::invalid_argument("remove_transient_periods: nothing would remain");
  if (n_discard == 0) return ts;

  const std::size_t skip = n_discard * ts.period_length;
  TimeSeries out = ts;
  out.input.assign(ts.input.begin() + static_cast<std::ptrdiff_t>(skip), ts.input.end());
  if (ts.has_output())
    out.output.assign(ts.output.begin() + static_cast<std::ptrdiff_t>(skip), ts.output.end());
  out.n_periods = ts.n_periods - n_discard;
  out.part_lengths.clear();
  return out;
}

TimeSeries concatenate(const std::vector<TimeSeries>& parts) {
  if (parts.empty()) throw std::invalid_argument("concatenate: no parts");
  TimeSeries out;
  out.sample_rate = parts.front().sample_rate;
  const bool with_output = parts.front().has_output();
  for (const TimeSeries& p : parts) {
    p.validate();
    if (p.sample_rate != out.sample_rate)
      throw std::invalid_argument("concatenate: mismatched sample rates");
    if (p.has_output() != with_output)
      throw std::invalid_argument("concatenate: inconsistent output channels");
    out.input.insert(out.input.end(), p.input.begin(), p.input.end());
    if (with_output) out.output.insert(out.output.end(), p.output.begin(), p.output.end());
    if (p.part_lengths.empty()) {
      out.part_lengths.push_back(p.size());
    } else {
      out.part_lengths.insert(out.part_lengths.end(), p.part_lengths.begin(),
                              p.part_lengths.end());
    }
    if (!out.label.empty()) out.label += "+";
    out.label += p.label;
  }
  return out;
}

}  // namespace nlsid::signals
