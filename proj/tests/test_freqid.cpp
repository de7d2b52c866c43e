#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>
#include <random>

#include "doctest.h"
#include "nlsid/freqid.hpp"
#include "nlsid/pnlss.hpp"
#include "nlsid/signals.hpp"

using namespace nlsid;
namespace freqid = nlsid::freqid;
namespace sig = nlsid::signals;
using cd = std::complex<double>;

namespace {

LinearSsModel reference_system() {
  // Lightly damped second-order resonance around 3 Hz at fs = 50 Hz.
  LinearSsModel lin = LinearSsModel::zero(2, 50.0);
  lin.a << 1.85, -0.93, 1.0, 0.0;
  lin.b << 1.0, 0.0;
  lin.c << 0.3, -0.25;
  lin.d = 0.05;
  return lin;
}

// Steady-state periodic records of a linear system under a multisine:
// simulate extra periods and keep the last ones.
std::vector<TimeSeries> steady_records(const LinearSsModel& lin, const sig::MultisineSpec& spec,
                                       int discard, double noise = 0.0, unsigned seed = 99) {
  const pnlss::PnlssModel model = pnlss::from_linear(lin, {}, {});
  std::vector<TimeSeries> records = sig::generate_multisine(spec);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, noise);
  for (TimeSeries& r : records) {
    TimeSeries sim = pnlss::simulate(model, r, pnlss::SimulationState::zero(lin.order()));
    r = sig::remove_transient_periods(sim, static_cast<std::size_t>(discard));
    if (noise > 0.0)
      for (double& v : r.output) v += gauss(rng);
  }
  return records;
}

cd z_at(double f, double fs) {
  const double ang = 2.0 * std::numbers::pi * f / fs;
  return {std::cos(ang), std::sin(ang)};
}

// The reference poles sit at |z| = sqrt(0.93) ~ 0.964, so a transient decays
// by only ~4e-2 per 100-sample period; exactness tests must discard several.
sig::MultisineSpec test_spec(int n_periods = 4, int n_realizations = 3, int discard = 6) {
  sig::MultisineSpec spec;
  spec.f0 = 0.5;
  spec.n_lines = 40;
  spec.amplitudes.assign(40, 1.0);
  spec.sample_rate = 50.0;
  spec.n_periods = n_periods + discard;
  spec.n_realizations = n_realizations;
  spec.rng_seed = 7;
  return spec;
}

}  // namespace

TEST_CASE("bla recovers a linear system exactly in the noise-free case") {
  const LinearSsModel lin = reference_system();
  const std::vector<TimeSeries> records = steady_records(lin, test_spec(), 6);
  const freqid::FrfEstimate frf = freqid::estimate_bla(records, 40);

  REQUIRE(frf.size() == 40);
  for (std::size_t k = 0; k < frf.size(); ++k) {
    REQUIRE(frf.valid[k]);
    const cd g_true = lin.frequency_response(z_at(frf.frequencies[k], 50.0));
    CHECK(std::abs(frf.g_bla[k] - g_true) < 1e-6 * std::abs(g_true));
    CHECK(frf.var_total[k] < 1e-12 * std::norm(frf.g_bla[k]));
  }
}

TEST_CASE("bla of a static gain is flat") {
  LinearSsModel lin = LinearSsModel::zero(1, 50.0);
  lin.a(0, 0) = 0.0;
  lin.d = 2.0;
  const std::vector<TimeSeries> records = steady_records(lin, test_spec(2, 2), 1);
  const freqid::FrfEstimate frf = freqid::estimate_bla(records, 40);
  for (std::size_t k = 0; k < frf.size(); ++k)
    CHECK(std::abs(frf.g_bla[k] - cd{2.0, 0.0}) < 1e-9);
}

TEST_CASE("noise shows up in var_noise and the variances stay consistent") {
  const LinearSsModel lin = reference_system();
  const std::vector<TimeSeries> records = steady_records(lin, test_spec(6, 5), 2, 1e-3);
  const freqid::FrfEstimate frf = freqid::estimate_bla(records, 40);
  std::size_t positive = 0;
  for (std::size_t k = 0; k < frf.size(); ++k)
    if (frf.var_noise[k] > 0.0) ++positive;
  CHECK(positive == frf.size());
  // For a linear plant the total variance is noise-driven, so the two
  // estimates agree in order of magnitude on most lines.
  CHECK(frf.suspicious_variance_lines() < frf.size() / 2);
}

TEST_CASE("bla input contract checks") {
  CHECK_THROWS_AS(freqid::estimate_bla({}, 10), std::invalid_argument);
  const std::vector<TimeSeries> records = steady_records(reference_system(), test_spec(), 2);
  CHECK_THROWS_AS(freqid::estimate_bla(records, 0), std::invalid_argument);
  CHECK_THROWS_AS(freqid::estimate_bla(records, 100), std::invalid_argument);
  std::vector<TimeSeries> aperiodic = records;
  aperiodic[0].period_length = 0;
  aperiodic[0].n_periods = 1;
  CHECK_THROWS_AS(freqid::estimate_bla(aperiodic, 10), std::invalid_argument);
}

TEST_CASE("fir fit of a pure delay") {
  freqid::FrfEstimate frf;
  frf.sample_rate = 50.0;
  frf.n_realizations = 2;
  frf.n_periods = 2;
  for (int k = 1; k <= 20; ++k) {
    const double f = 0.5 * k;
    frf.frequencies.push_back(f);
    const cd z = z_at(f, 50.0);
    frf.g_bla.push_back(1.0 / (z * z));  // y(t) = u(t-2)
    frf.var_noise.push_back(0.0);
    frf.var_total.push_back(0.0);
    frf.valid.push_back(1);
  }
  const LinearSsModel ss = freqid::fit_fir(frf, 3);
  CHECK(ss.d == doctest::Approx(0.0).epsilon(1e-9));  // h0
  for (std::size_t k = 0; k < frf.size(); ++k) {
    const cd g = ss.frequency_response(z_at(frf.frequencies[k], 50.0));
    CHECK(std::abs(g - frf.g_bla[k]) < 1e-9);
  }
  CHECK(freqid::weighted_fit_cost(frf, ss) < 1e-16);
}

TEST_CASE("rational fit recovers the reference system") {
  const LinearSsModel lin = reference_system();
  const std::vector<TimeSeries> records = steady_records(lin, test_spec(), 6);
  const freqid::FrfEstimate frf = freqid::estimate_bla(records, 40);
  const LinearSsModel fit = freqid::fit_rational(frf, 2, 2, 10);
  for (std::size_t k = 0; k < frf.size(); ++k) {
    const cd z = z_at(frf.frequencies[k], 50.0);
    CHECK(std::abs(fit.frequency_response(z) - lin.frequency_response(z)) <
          1e-6 * std::abs(lin.frequency_response(z)));
  }
  // Fitted poles are stable.
  CHECK(fit.a.eigenvalues().cwiseAbs().maxCoeff() < 1.0);
}

TEST_CASE("rational fit of a constant frf gives the dc gain") {
  freqid::FrfEstimate frf;
  frf.sample_rate = 50.0;
  for (int k = 1; k <= 10; ++k) {
    frf.frequencies.push_back(0.5 * k);
    frf.g_bla.push_back(cd{3.5, 0.0});
    frf.var_noise.push_back(0.0);
    frf.var_total.push_back(0.0);
    frf.valid.push_back(1);
  }
  const LinearSsModel fit = freqid::fit_rational(frf, 0, 1, 3);
  CHECK(std::abs(fit.frequency_response(cd{1.0, 0.0}) - cd{3.5, 0.0}) < 1e-9);
}

TEST_CASE("rational fit argument checks") {
  freqid::FrfEstimate frf;
  frf.sample_rate = 50.0;
  for (int k = 1; k <= 10; ++k) {
    frf.frequencies.push_back(0.5 * k);
    frf.g_bla.push_back(cd{1.0, 0.0});
    frf.var_noise.push_back(0.0);
    frf.var_total.push_back(0.0);
    frf.valid.push_back(1);
  }
  CHECK_THROWS_AS(freqid::fit_rational(frf, 3, 2, 10), std::invalid_argument);
  CHECK_THROWS_AS(freqid::fit_rational(frf, 1, 2, 0), std::invalid_argument);
  CHECK_THROWS_AS(freqid::fit_fir(frf, 0), std::invalid_argument);
}

TEST_CASE("order scan reports one cost per candidate without selecting") {
  const LinearSsModel lin = reference_system();
  const std::vector<TimeSeries> records = steady_records(lin, test_spec(), 2);
  const freqid::FrfEstimate frf = freqid::estimate_bla(records, 40);
  const auto scan = freqid::scan_model_order(frf, {1, 2, 3}, freqid::FitKind::Rational);
  REQUIRE(scan.size() == 3);
  CHECK(scan[0].first == 1);
  CHECK(scan[1].first == 2);
  // The true order wins by a wide margin over the first-order fit.
  CHECK(scan[1].second < 1e-3 * scan[0].second);
}

TEST_CASE("frf csv round trip") {
  const LinearSsModel lin = reference_system();
  const std::vector<TimeSeries> records = steady_records(lin, test_spec(), 2, 1e-3);
  const freqid::FrfEstimate frf = freqid::estimate_bla(records, 40);
  const auto path = std::filesystem::temp_directory_path() / "nlsid_frf.csv";
  freqid::save_frf_csv(frf, path.string());
  const freqid::FrfEstimate back = freqid::load_frf_csv(path.string());
  REQUIRE(back.size() == frf.size());
  CHECK(back.sample_rate == frf.sample_rate);
  CHECK(back.n_realizations == frf.n_realizations);
  for (std::size_t k = 0; k < frf.size(); ++k) {
    CHECK(back.frequencies[k] == frf.frequencies[k]);
    CHECK(back.g_bla[k] == frf.g_bla[k]);
    CHECK(back.var_noise[k] == frf.var_noise[k]);
    CHECK(back.var_total[k] == frf.var_total[k]);
  }
  std::filesystem::remove(path);
  std::filesystem::remove(path.string() + ".meta.json");
}
