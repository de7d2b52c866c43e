#include "nlsid/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace nlsid::dsp {

namespace {

constexpr double kPi = std::numbers::pi;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 FFT with a precomputed root table; the table
// keeps twiddle errors at the eps level instead of accumulating per stage.
void fft_radix2(std::complex<double>* a, std::size_t n, bool inverse) {
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j |= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  std::vector<std::complex<double>> root(n / 2);
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double ang = sign * 2.0 * kPi * static_cast<double>(k) / static_cast<double>(n);
    root[k] = {std::cos(ang), std::sin(ang)};
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t stride = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t j = 0; j < len / 2; ++j) {
        const std::complex<double> u = a[i + j];
        const std::complex<double> v = a[i + j + len / 2] * root[j * stride];
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
      }
    }
  }
}

// Bluestein chirp-z transform for arbitrary N. Phase arguments use k^2 mod 2N
// in integer arithmetic so large indices do not lose precision.
cvec fft_bluestein(const cvec& x, bool inverse) {
  const std::size_t n = x.size();
  const double sign = inverse ? 1.0 : -1.0;
  std::size_t m = 1;
  while (m < 2 * n - 1) m <<= 1;

  cvec chirp(n);
  for (std::size_t k = 0; k < n; ++k) {
    const long long kk = static_cast<long long>(k) * static_cast<long long>(k) %
                         (2 * static_cast<long long>(n));
    const double ang = sign * kPi * static_cast<double>(kk) / static_cast<double>(n);
    chirp[k] = {std::cos(ang), std::sin(ang)};
  }

  cvec a(m, {0.0, 0.0}), b(m, {0.0, 0.0});
  for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * chirp[k];
  b[0] = std::conj(chirp[0]);
  for (std::size_t k = 1; k < n; ++k) b[k] = b[m - k] = std::conj(chirp[k]);

  fft_radix2(a.data(), m, false);
  fft_radix2(b.data(), m, false);
  for (std::size_t k = 0; k < m; ++k) a[k] *= b[k];
  fft_radix2(a.data(), m, true);

  cvec out(n);
  const double scale = 1.0 / static_cast<double>(m);
  for (std::size_t k = 0; k < n; ++k) out[k] = a[k] * scale * chirp[k];
  return out;
}

cvec fft_any(const cvec& x, bool inverse) {
  if (x.empty()) return {};
  if (x.size() == 1) return x;
  if (is_pow2(x.size())) {
    cvec a = x;
    fft_radix2(a.data(), a.size(), inverse);
    return a;
  }
  return fft_bluestein(x, inverse);
}

}  // namespace

cvec fft(const cvec& x) { return fft_any(x, false); }

cvec fft(const std::vector<double>& x) {
  cvec c(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) c[i] = {x[i], 0.0};
  return fft_any(c, false);
}

cvec ifft(const cvec& x) {
  cvec a = fft_any(x, true);
  const double scale = 1.0 / static_cast<double>(x.size());
  for (auto& v : a) v *= scale;
  return a;
}

std::complex<double> dft_bin(const double* x, std::size_t n, std::size_t k) {
  const double w = -2.0 * kPi * static_cast<double>(k) / static_cast<double>(n);
  std::complex<double> acc{0.0, 0.0};
  for (std::size_t t = 0; t < n; ++t) {
    const double ang = w * static_cast<double>(t);
    acc += x[t] * std::complex<double>{std::cos(ang), std::sin(ang)};
  }
  return acc;
}

cvec analytic_signal(const std::vector<double>& x) {
  const std::size_t n = x.size();
  cvec spec = fft(x);
  // One-sided spectrum: keep DC (and Nyquist for even n), double positives.
  for (std::size_t k = 1; k < (n + 1) / 2; ++k) spec[k] *= 2.0;
  for (std::size_t k = n / 2 + (n % 2 == 0 ? 1 : 0); k < n; ++k) spec[k] = {0.0, 0.0};
  return ifft(spec);
}

void unwrap_phase(std::vector<double>& phase) {
  double offset = 0.0;
  for (std::size_t i = 1; i < phase.size(); ++i) {
    const double raw = phase[i] + offset;
    double d = raw - phase[i - 1];
    while (d > kPi) {
      offset -= 2.0 * kPi;
      d -= 2.0 * kPi;
    }
    while (d < -kPi) {
      offset += 2.0 * kPi;
      d += 2.0 * kPi;
    }
    phase[i] = phase[i - 1] + d;
  }
}

std::vector<double> moving_average(const std::vector<double>& x, int window) {
  if (window < 1) throw std::invalid_argument("moving_average: window must be >= 1");
  if (window % 2 == 0) ++window;
  const int half = window / 2;
  const int n = static_cast<int>(x.size());
  std::vector<double> out = x;
  if (n < window) return out;
  double acc = 0.0;
  for (int i = 0; i < window; ++i) acc += x[i];
  for (int i = half; i + half < n; ++i) {
    out[i] = acc / window;
    if (i + half + 1 < n) acc += x[i + half + 1] - x[i - half];
  }
  return out;
}

double dominant_frequency(const std::vector<double>& x, double sample_rate) {
  const std::size_t n = x.size();
  if (n < 8) throw std::invalid_argument("dominant_frequency: signal too short");
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);

  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double hann =
        0.5 * (1.0 - std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n - 1)));
    w[i] = (x[i] - mean) * hann;
  }
  cvec spec = fft(w);

  std::size_t peak = 1;
  double peak_mag = 0.0;
  for (std::size_t k = 1; k < n / 2; ++k) {
    const double m = std::abs(spec[k]);
    if (m > peak_mag) {
      peak_mag = m;
      peak = k;
    }
  }
  if (peak_mag == 0.0) return 0.0;

  double delta = 0.0;
  if (peak > 1 && peak + 1 < n / 2) {
    const double eps = 1e-300;
    const double alpha = std::log(std::abs(spec[peak - 1]) + eps);
    const double beta = std::log(peak_mag + eps);
    const double gamma = std::log(std::abs(spec[peak + 1]) + eps);
    const double denom = alpha - 2.0 * beta + gamma;
    if (denom != 0.0) delta = 0.5 * (alpha - gamma) / denom;
    delta = std::clamp(delta, -0.5, 0.5);
  }
  return (static_cast<double>(peak) + delta) * sample_rate / static_cast<double>(n);
}

}  // namespace nlsid::dsp
