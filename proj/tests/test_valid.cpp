#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "doctest.h"
#include "nlsid/valid.hpp"

using namespace nlsid;
namespace valid = nlsid::valid;

namespace {

std::vector<double> sine(std::size_t n, double cycles, double phase = 0.0, double amp = 1.0,
                         double offset = 0.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i)
    x[i] = offset + amp * std::sin(2.0 * std::numbers::pi * cycles * static_cast<double>(i) /
                                       static_cast<double>(n) +
                                   phase);
  return x;
}

}  // namespace

TEST_CASE("weighted rms error basics") {
  const std::vector<double> y = sine(100, 3.0);
  CHECK(valid::weighted_rms_error({y}, {y}) == 0.0);

  std::vector<double> twice = y;
  for (double& v : twice) v *= 2.0;
  CHECK(valid::weighted_rms_error({y}, {twice}) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("weighted rms combines parts by relative length") {
  // Part 1 (length N) with relative error 0.1, part 2 (length 3N) with 0.2:
  // 0.25 * 0.1 + 0.75 * 0.2 = 0.175.
  const std::size_t n = 200;
  const std::vector<double> y1 = sine(n, 4.0), y2 = sine(3 * n, 12.0);
  std::vector<double> m1 = y1, m2 = y2;
  for (double& v : m1) v *= 1.1;  // relative rms error exactly 0.1
  for (double& v : m2) v *= 1.2;
  CHECK(valid::weighted_rms_error({y1, y2}, {m1, m2}) ==
        doctest::Approx(0.175).epsilon(1e-12));
}

TEST_CASE("weighted rms is invariant to common scaling") {
  const std::vector<double> y = sine(128, 5.0);
  const std::vector<double> m = sine(128, 5.0, 0.3);
  const double base = valid::weighted_rms_error({y}, {m});
  std::vector<double> ys = y, ms = m;
  for (double& v : ys) v *= 7.5;
  for (double& v : ms) v *= 7.5;
  CHECK(valid::weighted_rms_error({ys}, {ms}) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("weighted rms rejects an all-zero reference part") {
  const std::vector<double> z(50, 0.0), m(50, 1.0);
  CHECK_THROWS_AS(valid::weighted_rms_error({z}, {m}), std::invalid_argument);
}

TEST_CASE("correlation endpoints and affine invariance") {
  const std::vector<double> y = sine(256, 3.0);
  std::vector<double> neg = y, affine = y;
  for (double& v : neg) v = -v;
  for (double& v : affine) v = 2.5 * v + 4.0;
  CHECK(valid::correlation(y, y) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(valid::correlation(y, neg) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(valid::correlation(y, affine) == doctest::Approx(1.0).epsilon(1e-12));

  const std::vector<double> flat(256, 3.0);
  CHECK_THROWS_AS(valid::correlation(y, flat), std::invalid_argument);
}

TEST_CASE("max amplitude error") {
  const std::vector<double> y = sine(500, 7.0);
  CHECK(valid::max_amplitude_error(y, y) == 0.0);
  std::vector<double> low = y;
  for (double& v : low) v *= 0.9;
  CHECK(valid::max_amplitude_error(y, low) == doctest::Approx(0.10).epsilon(1e-9));
  const std::vector<double> z(500, 0.0);
  CHECK_THROWS_AS(valid::max_amplitude_error(z, y), std::invalid_argument);
}

TEST_CASE("dft magnitude error is zero under circular shifts") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  std::vector<double> y(240);
  for (double& v : y) v = uniform(rng);

  CHECK(valid::dft_magnitude_error(y, y) == 0.0);
  for (std::size_t shift : {1u, 17u, 120u}) {
    std::vector<double> rotated(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) rotated[i] = y[(i + shift) % y.size()];
    CHECK(valid::dft_magnitude_error(y, rotated) < 1e-12);
  }
  const std::vector<double> z(240, 0.0);
  CHECK_THROWS_AS(valid::dft_magnitude_error(z, y), std::invalid_argument);
}

TEST_CASE("validation suite runs experiments and aggregates") {
  // Plant: a pure gain of 2 on the excitation. Model: the same gain encoded
  // as a trivial state-space model, so every metric is ideal.
  LinearSsModel lin = LinearSsModel::zero(1, 50.0);
  lin.d = 2.0;
  const pnlss::PnlssModel model = pnlss::from_linear(lin, {}, {});

  valid::SuiteConfig cfg;
  cfg.f_ref = 3.0;
  cfg.sample_rate = 50.0;
  cfg.ramp_duration = 2.0;
  cfg.hold_duration = 4.0;

  valid::TruthSource truth = [](const TimeSeries& excitation, double, double) {
    TimeSeries out = excitation;
    out.output.resize(excitation.size());
    for (std::size_t i = 0; i < excitation.size(); ++i)
      out.output[i] = 2.0 * excitation.input[i];
    return out;
  };

  const valid::ValidationReport report =
      valid::run_validation_suite(model, {{0.9, 0.1}, {1.1, 0.2}}, truth, cfg);
  REQUIRE(report.experiments.size() == 2);
  for (const valid::ExperimentResult& res : report.experiments) {
    REQUIRE(res.ok);
    CHECK(res.e_rms < 1e-9);
    CHECK(res.r == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(res.e_max_a) < 1e-9);
    CHECK(res.e_dft < 1e-9);
  }
  CHECK(report.mean_r == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("validation suite records failures and continues") {
  LinearSsModel lin = LinearSsModel::zero(1, 50.0);
  lin.d = 1.0;
  const pnlss::PnlssModel model = pnlss::from_linear(lin, {}, {});

  valid::SuiteConfig cfg;
  cfg.f_ref = 3.0;
  cfg.sample_rate = 50.0;
  cfg.ramp_duration = 1.0;
  cfg.hold_duration = 3.0;

  int call = 0;
  valid::TruthSource truth = [&call](const TimeSeries& excitation, double, double) {
    if (call++ == 0) throw std::runtime_error("missing truth record");
    TimeSeries out = excitation;
    out.output = excitation.input;
    return out;
  };
  const valid::ValidationReport report =
      valid::run_validation_suite(model, {{1.0, 0.1}, {1.0, 0.2}}, truth, cfg);
  REQUIRE(report.experiments.size() == 2);
  CHECK_FALSE(report.experiments[0].ok);
  CHECK(report.experiments[0].error == "missing truth record");
  CHECK(report.experiments[1].ok);
}

TEST_CASE("report serialization") {
  valid::ValidationReport report;
  valid::ExperimentResult ok;
  ok.label = "a";
  ok.rel_frequency = 1.0;
  ok.amplitude = 0.1;
  ok.e_rms = 0.02;
  ok.r = 0.99;
  ok.e_max_a = 0.01;
  ok.e_dft = 0.05;
  ok.ok = true;
  valid::ExperimentResult bad;
  bad.label = "b";
  bad.error = "no data";
  report.experiments = {ok, bad};

  const std::string json = valid::report_to_json(report);
  CHECK(json.find("\"e_rms\": 0.02") != std::string::npos);
  CHECK(json.find("no data") != std::string::npos);

  const auto path = std::filesystem::temp_directory_path() / "nlsid_validation.csv";
  valid::save_report_csv(report, path.string());
  std::ifstream in(path);
  std::string header, row, extra;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "rel_freq,amplitude,e_rms,R,e_maxA,e_dft");
  CHECK_FALSE(row.empty());
  CHECK_FALSE(std::getline(in, extra));  // the failed experiment is omitted
  std::filesystem::remove(path);
}
