#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "doctest.h"
#include "nlsid/dsp.hpp"

using nlsid::dsp::cvec;
namespace dsp = nlsid::dsp;

namespace {

// O(n^2) reference DFT used as the oracle for the fast paths.
cvec naive_dft(const cvec& x) {
  const std::size_t n = x.size();
  cvec out(n, {0.0, 0.0});
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t t = 0; t < n; ++t) {
      const double ang = -2.0 * std::numbers::pi * static_cast<double>(k) *
                         static_cast<double>(t) / static_cast<double>(n);
      out[k] += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
  return out;
}

cvec random_signal(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  cvec x(n);
  for (auto& v : x) v = {uniform(rng), uniform(rng)};
  return x;
}

}  // namespace

TEST_CASE("fft matches the naive dft on power-of-two lengths") {
  for (std::size_t n : {2u, 8u, 64u, 256u}) {
    const cvec x = random_signal(n, 1);
    const cvec fast = dsp::fft(x);
    const cvec slow = naive_dft(x);
    for (std::size_t k = 0; k < n; ++k)
      CHECK(std::abs(fast[k] - slow[k]) < 1e-10 * static_cast<double>(n));
  }
}

TEST_CASE("fft matches the naive dft on arbitrary lengths") {
  for (std::size_t n : {3u, 5u, 12u, 100u, 101u, 1000u}) {
    const cvec x = random_signal(n, 2);
    const cvec fast = dsp::fft(x);
    const cvec slow = naive_dft(x);
    for (std::size_t k = 0; k < n; ++k)
      CHECK(std::abs(fast[k] - slow[k]) < 1e-9 * static_cast<double>(n));
  }
}

TEST_CASE("ifft inverts fft") {
  const cvec x = random_signal(101, 3);
  const cvec back = dsp::ifft(dsp::fft(x));
  for (std::size_t k = 0; k < x.size(); ++k) CHECK(std::abs(back[k] - x[k]) < 1e-12);
}

TEST_CASE("dft_bin equals the matching fft bin") {
  std::vector<double> x(250);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  for (double& v : x) v = uniform(rng);
  const cvec spectrum = dsp::fft(x);
  for (std::size_t k : {0u, 1u, 7u, 124u})
    CHECK(std::abs(dsp::dft_bin(x.data(), x.size(), k) - spectrum[k]) < 1e-10);
}

TEST_CASE("analytic signal of a cosine has unit envelope") {
  const std::size_t n = 1024;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i)
    x[i] = std::cos(2.0 * std::numbers::pi * 37.0 * static_cast<double>(i) /
                    static_cast<double>(n));
  const cvec a = dsp::analytic_signal(x);
  for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(a[i]) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("phase unwrap removes 2 pi jumps") {
  std::vector<double> phase;
  for (int i = 0; i < 200; ++i) {
    const double p = 0.15 * i;
    phase.push_back(std::remainder(p, 2.0 * std::numbers::pi));
  }
  dsp::unwrap_phase(phase);
  for (int i = 1; i < 200; ++i)
    CHECK(phase[static_cast<std::size_t>(i)] - phase[static_cast<std::size_t>(i - 1)] ==
          doctest::Approx(0.15).epsilon(1e-9));
}

TEST_CASE("moving average smooths a constant exactly") {
  const std::vector<double> x(50, 3.25);
  const std::vector<double> y = dsp::moving_average(x, 7);
  for (double v : y) CHECK(v == doctest::Approx(3.25));
}

TEST_CASE("dominant frequency of a pure sine") {
  const double fs = 50.0;
  const double f = 3.17;
  std::vector<double> x(4000);
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = std::sin(2.0 * std::numbers::pi * f * static_cast<double>(i) / fs);
  CHECK(dsp::dominant_frequency(x, fs) == doctest::Approx(f).epsilon(1e-3));
}

TEST_CASE("dominant frequency ignores a dc offset") {
  const double fs = 50.0;
  std::vector<double> x(4000);
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = 5.0 + std::sin(2.0 * std::numbers::pi * 2.5 * static_cast<double>(i) / fs);
  CHECK(dsp::dominant_frequency(x, fs) == doctest::Approx(2.5).epsilon(1e-3));
}
