#include "nlsid/vdp.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "nlsid/dsp.hpp"

namespace nlsid::vdp {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

double VdpConfig::omega_aut() const { return kTwoPi * f_aut; }

void VdpConfig::validate() const {
  if (mu <= 0.0) throw std::invalid_argument("VdpConfig: mu must be > 0");
  if (f_aut <= 0.0) throw std::invalid_argument("VdpConfig: f_aut must be > 0");
  if (output_sample_rate <= 0.0)
    throw std::invalid_argument("VdpConfig: output_sample_rate must be > 0");
  if (integrator_step <= 0.0 || integrator_step > 1.0 / (50.0 * f_aut))
    throw std::invalid_argument("VdpConfig: integrator_step must satisfy h <= 1/(50 f_aut)");
}

namespace {

// RK4 run over [0, duration]; returns cy at every integrator step
// (duration/h + 1 values).
std::vector<double> integrate(const VdpConfig& cfg, double duration,
                              const std::function<double(double)>& forcing,
                              std::array<double, 2> x0) {
  const double h = cfg.integrator_step;
  const double w = cfg.omega_aut();
  const double mu_w = cfg.mu * w;
  const double w2 = w * w;

  auto deriv = [&](double t, double c, double cd, double& dc, double& dcd) {
    dc = cd;
    dcd = forcing(t) - mu_w * (c * c - 1.0) * cd - w2 * c;
  };

  const std::size_t steps = static_cast<std::size_t>(std::ceil(duration / h - 1e-12));
  std::vector<double> cy(steps + 1);
  double c = x0[0], cd = x0[1];
  cy[0] = c;
  for (std::size_t s = 0; s < steps; ++s) {
    const double t = static_cast<double>(s) * h;
    double k1c, k1d, k2c, k2d, k3c, k3d, k4c, k4d;
    deriv(t, c, cd, k1c, k1d);
    deriv(t + 0.5 * h, c + 0.5 * h * k1c, cd + 0.5 * h * k1d, k2c, k2d);
    deriv(t + 0.5 * h, c + 0.5 * h * k2c, cd + 0.5 * h * k2d, k3c, k3d);
    deriv(t + h, c + h * k3c, cd + h * k3d, k4c, k4d);
    c += h / 6.0 * (k1c + 2.0 * k2c + 2.0 * k3c + k4c);
    cd += h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
    cy[s + 1] = c;
  }
  return cy;
}

double sample_linear(const std::vector<double>& values, double step, double t) {
  const double pos = t / step;
  const std::size_t i0 = std::min(static_cast<std::size_t>(std::max(pos, 0.0)),
                                  values.size() - 1);
  const std::size_t i1 = std::min(i0 + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(i0);
  return values[i0] + frac * (values[i1] - values[i0]);
}

}  // namespace

TimeSeries simulate_vdp(const VdpConfig& config, const TimeSeries& input,
                        std::array<double, 2> x0,
                        const std::function<double(double)>& input_derivative) {
  config.validate();
  input.validate();
  if (std::abs(input.sample_rate - config.output_sample_rate) >
      1e-9 * config.output_sample_rate)
    throw std::invalid_argument("simulate_vdp: input sampled at a different rate");

  std::function<double(double)> forcing;
  std::vector<double> ydot;
  if (input_derivative) {
    forcing = input_derivative;
  } else {
    // Central differences, one-sided at the edges, linear interpolation in t.
    const double fs = input.sample_rate;
    const std::size_t n = input.size();
    ydot.resize(n);
    if (n >= 2) {
      ydot[0] = (input.input[1] - input.input[0]) * fs;
      ydot[n - 1] = (input.input[n - 1] - input.input[n - 2]) * fs;
      for (std::size_t i = 1; i + 1 < n; ++i)
        ydot[i] = (input.input[i + 1] - input.input[i - 1]) * fs * 0.5;
    }
    forcing = [&ydot, fs](double t) { return sample_linear(ydot, 1.0 / fs, t); };
  }

  const double duration = static_cast<double>(input.size() - 1) / input.sample_rate;
  const std::vector<double> cy = integrate(config, duration, forcing, x0);

  TimeSeries out = input;
  out.output.resize(input.size());
  for (std::size_t i = 0; i < input.size(); ++i) {
    const double t = static_cast<double>(i) / input.sample_rate;
    out.output[i] = sample_linear(cy, config.integrator_step, t);
  }
  return out;
}

pnlss::PnlssModel vdp_to_pnlss(const VdpConfig& config, double step) {
  if (step <= 0.0) throw std::invalid_argument("vdp_to_pnlss: step must be > 0");
  const double w = config.omega_aut();

  LinearSsModel lin;
  lin.a.resize(2, 2);
  lin.a << 1.0, step, -step * w * w, 1.0 + step * config.mu * w;
  lin.b.resize(2);
  lin.b << 0.0, step;
  lin.c.resize(2);
  lin.c << 1.0, 0.0;
  lin.d = 0.0;
  lin.sample_rate = 1.0 / step;

  const std::vector<int> cubic = config.mu == 0.0 ? std::vector<int>{} : std::vector<int>{3};
  pnlss::PnlssModel model = pnlss::from_linear(lin, cubic, {});
  if (config.mu != 0.0) {
    for (std::size_t m = 0; m < model.state_basis.size(); ++m) {
      if (model.state_basis.exponents[m] == std::vector<int>{2, 1, 0})
        model.e(1, static_cast<Eigen::Index>(m)) = -step * config.mu * w;
    }
  }
  return model;
}

LockinGrid map_lockin(const VdpConfig& config, const std::vector<double>& rel_freqs,
                      const std::vector<double>& amplitudes, double settle_time,
                      double observe_time, double tolerance) {
  config.validate();
  LockinGrid grid;
  grid.relative_frequencies = rel_freqs;
  grid.amplitudes = amplitudes;
  grid.locked.assign(amplitudes.size(),
                     std::vector<bool>(rel_freqs.size(), false));

  const double fs = config.output_sample_rate;
  for (std::size_t ai = 0; ai < amplitudes.size(); ++ai) {
    for (std::size_t fi = 0; fi < rel_freqs.size(); ++fi) {
      const double f_ex = rel_freqs[fi] * config.f_aut;
      if (f_ex <= 0.0) continue;
      if (observe_time * f_ex < 20.0)
        throw std::invalid_argument("map_lockin: observe_time covers fewer than 20 cycles");

      const double amp = amplitudes[ai];
      const double total = settle_time + observe_time;
      TimeSeries drive;
      drive.sample_rate = fs;
      drive.input.resize(static_cast<std::size_t>(std::llround(total * fs)), 0.0);
      for (std::size_t i = 0; i < drive.input.size(); ++i) {
        const double t = static_cast<double>(i) / fs;
        drive.input[i] = amp * std::sin(kTwoPi * f_ex * t);
      }
      auto ydot = [amp, f_ex](double t) {
        return amp * kTwoPi * f_ex * std::cos(kTwoPi * f_ex * t);
      };
      // Start on the limit cycle so the settle window is spent on entrainment
      // rather than on escaping the unstable origin.
      const TimeSeries resp = simulate_vdp(config, drive, {2.0, 0.0}, ydot);

      const std::size_t skip = static_cast<std::size_t>(std::llround(settle_time * fs));
      std::vector<double> tail(resp.output.begin() + static_cast<std::ptrdiff_t>(skip),
                               resp.output.end());
      const double f_peak = dsp::dominant_frequency(tail, fs);
      grid.locked[ai][fi] = std::abs(f_peak - f_ex) / f_ex < tolerance;
    }
  }
  return grid;
}

void save_lockin_csv(const LockinGrid& grid, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "amplitude";
  for (double f : grid.relative_frequencies) out << ',' << f;
  out << '\n';
  for (std::size_t ai = 0; ai < grid.amplitudes.size(); ++ai) {
    out << grid.amplitudes[ai];
    for (std::size_t fi = 0; fi < grid.relative_frequencies.size(); ++fi)
      out << ',' << (grid.locked[ai][fi] ? 1 : 0);
    out << '\n';
  }
}

}  // namespace nlsid::vdp
