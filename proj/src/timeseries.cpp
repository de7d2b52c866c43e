#include "nlsid/timeseries.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace nlsid {

void TimeSeries::validate() const {
  if (sample_rate <= 0.0)
    throw std::invalid_argument("TimeSeries: sample_rate must be > 0");
  if (has_output() && output.size() != input.size())
    throw std::invalid_argument("TimeSeries: input/output length mismatch");
  if (period_length > 0 && size() != period_length * n_periods)
    throw std::invalid_argument(
        "TimeSeries: length does not equal period_length * n_periods");
  if (!part_lengths.empty()) {
    std::size_t total = 0;
    for (std::size_t n : part_lengths) total += n;
    if (total != size())
      throw std::invalid_argument("TimeSeries: part lengths do not sum to length");
  }
}

std::string sidecar_path(const std::string& csv_path) {
  return csv_path + ".meta.json";
}

void save_timeseries_csv(const TimeSeries& ts, const std::string& path) {
  ts.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "time,input,output\n";
  char buf[96];
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double t = static_cast<double>(i) / ts.sample_rate;
    const double y = ts.has_output() ? ts.output[i] : 0.0;
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", t, ts.input[i], y);
    out << buf;
  }
  nlohmann::json meta = {{"sample_rate", ts.sample_rate},
                         {"period_length", ts.period_length},
                         {"n_periods", ts.n_periods},
                         {"label", ts.label},
                         {"has_output", ts.has_output()},
                         {"part_lengths", ts.part_lengths}};
  std::ofstream side(sidecar_path(path));
  if (!side) throw std::runtime_error("cannot open for writing: " + sidecar_path(path));
  side << meta.dump(2) << '\n';
}

TimeSeries load_timeseries_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty file: " + path);

  TimeSeries ts;
  std::vector<double> times;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double t, u, y;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &t, &u, &y) != 3)
      throw std::runtime_error("malformed CSV row in " + path + ": " + line);
    times.push_back(t);
    ts.input.push_back(u);
    ts.output.push_back(y);
  }
  if (times.size() < 2) throw std::runtime_error("too few samples in " + path);

  const double dt = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double step = times[i] - times[i - 1];
    if (std::abs(step - dt) > 1e-9 * std::max(std::abs(dt), 1.0))
      throw std::runtime_error("non-uniform time grid in " + path + " near row " +
                               std::to_string(i + 1));
  }
  ts.sample_rate = 1.0 / dt;

  std::ifstream side(sidecar_path(path));
  if (side) {
    nlohmann::json meta = nlohmann::json::parse(side);
    ts.sample_rate = meta.value("sample_rate", ts.sample_rate);
    ts.period_length = meta.value("period_length", std::size_t{0});
    ts.n_periods = meta.value("n_periods", std::size_t{1});
    ts.label = meta.value("label", std::string{});
    ts.part_lengths = meta.value("part_lengths", std::vector<std::size_t>{});
    if (!meta.value("has_output", true)) ts.output.clear();
  }
  ts.validate();
  return ts;
}

}  // namespace nlsid
