#include "nlsid/valid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "nlsid/dsp.hpp"
#include "nlsid/optim.hpp"
#include "nlsid/signals.hpp"

namespace nlsid::valid {

double weighted_rms_error(const std::vector<std::vector<double>>& true_parts,
                          const std::vector<std::vector<double>>& model_parts) {
  if (true_parts.empty() || true_parts.size() != model_parts.size())
    throw std::invalid_argument("weighted_rms_error: mismatched part lists");
  std::size_t total = 0;
  for (const auto& p : true_parts) total += p.size();
  if (total == 0) throw std::invalid_argument("weighted_rms_error: empty parts");

  double combined = 0.0;
  for (std::size_t i = 0; i < true_parts.size(); ++i) {
    const auto& t = true_parts[i];
    const auto& m = model_parts[i];
    if (t.size() != m.size() || t.empty())
      throw std::invalid_argument("weighted_rms_error: part length mismatch");
    double sse = 0.0, ref = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
      const double e = t[k] - m[k];
      sse += e * e;
      ref += t[k] * t[k];
    }
    if (ref == 0.0)
      throw std::invalid_argument("weighted_rms_error: all-zero reference part " +
                                  std::to_string(i));
    const double weight = static_cast<double>(t.size()) / static_cast<double>(total);
    combined += weight * std::sqrt(sse / ref);
  }
  return combined;
}

double weighted_rms_error(const std::vector<TimeSeries>& true_parts,
                          const std::vector<TimeSeries>& model_parts) {
  std::vector<std::vector<double>> t, m;
  t.reserve(true_parts.size());
  m.reserve(model_parts.size());
  for (const TimeSeries& p : true_parts) t.push_back(p.output);
  for (const TimeSeries& p : model_parts) m.push_back(p.output);
  return weighted_rms_error(t, m);
}

double correlation(const std::vector<double>& truth, const std::vector<double>& model) {
  if (truth.size() != model.size() || truth.size() < 2)
    throw std::invalid_argument("correlation: need two equal-length sequences");
  const double n = static_cast<double>(truth.size());
  double mt = 0.0, mm = 0.0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    mt += truth[k];
    mm += model[k];
  }
  mt /= n;
  mm /= n;
  double stt = 0.0, smm = 0.0, stm = 0.0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    const double a = truth[k] - mt, b = model[k] - mm;
    stt += a * a;
    smm += b * b;
    stm += a * b;
  }
  if (stt == 0.0 || smm == 0.0) throw std::invalid_argument("correlation: zero-variance signal");
  return stm / std::sqrt(stt * smm);
}

double max_amplitude_error(const std::vector<double>& truth, const std::vector<double>& model) {
  if (truth.empty() || model.empty()) throw std::invalid_argument("max_amplitude_error: empty");
  double pt = 0.0, pm = 0.0;
  for (double v : truth) pt = std::max(pt, std::abs(v));
  for (double v : model) pm = std::max(pm, std::abs(v));
  if (pt == 0.0) throw std::invalid_argument("max_amplitude_error: zero reference peak");
  return (pt - pm) / pt;
}

double dft_magnitude_error(const std::vector<double>& truth, const std::vector<double>& model) {
  if (truth.size() != model.size() || truth.empty())
    throw std::invalid_argument("dft_magnitude_error: need equal nonempty sequences");
  const dsp::cvec ft = dsp::fft(truth);
  const dsp::cvec fm = dsp::fft(model);
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < ft.size(); ++k) {
    const double d = std::abs(ft[k]) - std::abs(fm[k]);
    num += d * d;
    den += std::abs(ft[k]) * std::abs(ft[k]);
  }
  if (den == 0.0) throw std::invalid_argument("dft_magnitude_error: zero-energy reference");
  return std::sqrt(num / den);
}

void SuiteConfig::validate() const {
  if (f_ref <= 0.0 || sample_rate <= 0.0)
    throw std::invalid_argument("SuiteConfig: f_ref and sample_rate must be positive");
  if (ramp_duration < 0.0 || hold_duration <= 0.0)
    throw std::invalid_argument("SuiteConfig: bad segment durations");
}

namespace {

struct Stats {
  double mean = 0.0, std_dev = 0.0;
};

Stats stats_of(const std::vector<double>& v) {
  Stats s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double acc = 0.0;
    for (double x : v) acc += (x - s.mean) * (x - s.mean);
    s.std_dev = std::sqrt(acc / static_cast<double>(v.size() - 1));
  }
  return s;
}

}  // namespace

ValidationReport run_validation_suite(const pnlss::PnlssModel& model,
                                      const std::vector<std::pair<double, double>>& experiments,
                                      const TruthSource& truth, const SuiteConfig& config) {
  if (experiments.empty()) throw std::invalid_argument("run_validation_suite: no experiments");
  if (!truth) throw std::invalid_argument("run_validation_suite: no truth source");
  config.validate();

  ValidationReport report;
  report.f_ref = config.f_ref;
  report.ramp_duration = config.ramp_duration;
  report.hold_duration = config.hold_duration;

  std::vector<double> all_rms, all_r, all_maxa, all_dft;

  for (const auto& [rel_freq, amplitude] : experiments) {
    ExperimentResult res;
    res.rel_frequency = rel_freq;
    res.amplitude = amplitude;
    res.label = "f" + std::to_string(rel_freq) + "_a" + std::to_string(amplitude);
    try {
      const double f_ex = rel_freq * config.f_ref;
      // The model input is the excitation derivative; the displacement record
      // itself only parameterizes the truth source.
      TimeSeries excitation = signals::generate_ramped_sine_derivative(
          f_ex, amplitude, config.ramp_duration, config.hold_duration, config.sample_rate);
      excitation.label = res.label;
      const TimeSeries reference = truth(excitation, rel_freq, amplitude);
      if (reference.size() != excitation.size())
        throw std::runtime_error("truth source returned a mismatched record");

      const std::size_t ramp_samples = static_cast<std::size_t>(
          std::llround(config.ramp_duration * config.sample_rate));
      const std::size_t settle =
          static_cast<std::size_t>(std::llround(config.sample_rate / config.f_ref));
      const std::size_t hold_start = std::min(ramp_samples + settle, excitation.size());
      if (hold_start + 2 > excitation.size())
        throw std::runtime_error("hold segment too short for metrics");

      TimeSeries to_fit = excitation;
      to_fit.output = reference.output;
      const std::size_t window = std::max<std::size_t>(ramp_samples, settle);
      const pnlss::SimulationState init = optim::estimate_initial_state(
          model, to_fit, std::min(window, to_fit.size()), config.estimate_u0);
      const TimeSeries simulated = pnlss::simulate(model, excitation, init);

      const std::vector<double> t(reference.output.begin() +
                                      static_cast<std::ptrdiff_t>(hold_start),
                                  reference.output.end());
      const std::vector<double> m(simulated.output.begin() +
                                      static_cast<std::ptrdiff_t>(hold_start),
                                  simulated.output.end());
      res.e_rms = weighted_rms_error(std::vector<std::vector<double>>{t},
                                     std::vector<std::vector<double>>{m});
      res.r = correlation(t, m);
      res.e_max_a = max_amplitude_error(t, m);
      res.e_dft = dft_magnitude_error(t, m);
      res.ok = true;
      all_rms.push_back(res.e_rms);
      all_r.push_back(res.r);
      all_maxa.push_back(res.e_max_a);
      all_dft.push_back(res.e_dft);
    } catch (const std::exception& ex) {
      res.ok = false;
      res.error = ex.what();
    }
    report.experiments.push_back(std::move(res));
  }

  const Stats s_rms = stats_of(all_rms), s_r = stats_of(all_r), s_maxa = stats_of(all_maxa),
              s_dft = stats_of(all_dft);
  report.mean_e_rms = s_rms.mean;
  report.std_e_rms = s_rms.std_dev;
  report.mean_r = s_r.mean;
  report.std_r = s_r.std_dev;
  report.mean_e_max_a = s_maxa.mean;
  report.std_e_max_a = s_maxa.std_dev;
  report.mean_e_dft = s_dft.mean;
  report.std_e_dft = s_dft.std_dev;
  return report;
}

void save_report_csv(const ValidationReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "rel_freq,amplitude,e_rms,R,e_maxA,e_dft\n";
  out.precision(17);
  for (const ExperimentResult& res : report.experiments) {
    if (!res.ok) continue;
    out << res.rel_frequency << ',' << res.amplitude << ',' << res.e_rms << ',' << res.r << ','
        << res.e_max_a << ',' << res.e_dft << '\n';
  }
}

std::string report_to_json(const ValidationReport& report) {
  nlohmann::json experiments = nlohmann::json::array();
  for (const ExperimentResult& res : report.experiments) {
    nlohmann::json j = {{"label", res.label},
                        {"rel_freq", res.rel_frequency},
                        {"amplitude", res.amplitude},
                        {"ok", res.ok}};
    if (res.ok) {
      j["e_rms"] = res.e_rms;
      j["R"] = res.r;
      j["e_maxA"] = res.e_max_a;
      j["e_dft"] = res.e_dft;
    } else {
      j["error"] = res.error;
    }
    experiments.push_back(std::move(j));
  }
  const nlohmann::json doc = {
      {"f_ref", report.f_ref},
      {"ramp_duration", report.ramp_duration},
      {"hold_duration", report.hold_duration},
      {"aggregate",
       {{"e_rms", {{"mean", report.mean_e_rms}, {"std", report.std_e_rms}}},
        {"R", {{"mean", report.mean_r}, {"std", report.std_r}}},
        {"e_maxA", {{"mean", report.mean_e_max_a}, {"std", report.std_e_max_a}}},
        {"e_dft", {{"mean", report.mean_e_dft}, {"std", report.std_e_dft}}}}},
      {"experiments", std::move(experiments)}};
  return doc.dump(2);
}

}  // namespace nlsid::valid
