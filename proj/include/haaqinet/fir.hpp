#pragma once

#include <functional>
#include <vector>

#include "haaqinet/common.hpp"
#include "haaqinet/fft.hpp"

namespace haaqi {

// Linear-phase FIR design by frequency sampling: sample the desired magnitude
// on a dense grid, take a zero-phase inverse FFT, then window the impulse
// response down to an odd tap count. A unity magnitude yields an exact unit
// impulse, so gain-free paths reconstruct the input bit-for-bit (minus float
// rounding), which several contracts in this library rely on.

inline std::vector<double> hamming_window(std::size_t n) {
  std::vector<double> w(n);
  if (n == 1) {
    w[0] = 1.0;
    return w;
  }
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * double(i) / double(n - 1));
  return w;
}

// mag: N/2+1 desired linear magnitudes on bins 0..N/2 of an N-point grid.
inline std::vector<double> design_fir_from_grid(const std::vector<double>& mag,
                                                int taps) {
  require(taps >= 1 && taps % 2 == 1, "fir: taps must be odd and >= 1");
  const std::size_t n = 2 * (mag.size() - 1);
  require((n & (n - 1)) == 0, "fir: grid must be a power of two");
  require(std::size_t(taps) <= n, "fir: taps exceed design grid");

  std::vector<cplx> half(mag.begin(), mag.end());
  std::vector<double> impulse = irfft(half, n);

  // Zero-phase impulse is symmetric around index 0 with wraparound; center it.
  const int half_taps = (taps - 1) / 2;
  std::vector<double> h(std::size_t(taps), 0.0);
  auto win = hamming_window(std::size_t(taps));
  for (int k = -half_taps; k <= half_taps; ++k) {
    std::size_t src = std::size_t((k + int(n)) % int(n));
    h[std::size_t(k + half_taps)] = impulse[src] * win[std::size_t(k + half_taps)];
  }
  return h;
}

// mag_at_hz is evaluated on [0, fs/2].
inline std::vector<double> design_fir(
    const std::function<double(double)>& mag_at_hz, double fs, int taps,
    std::size_t grid = 8192) {
  std::vector<double> mag(grid / 2 + 1);
  for (std::size_t k = 0; k < mag.size(); ++k)
    mag[k] = mag_at_hz(double(k) * fs / double(grid));
  return design_fir_from_grid(mag, taps);
}

inline std::vector<double> design_lowpass(double fc, double fs, int taps) {
  require(fc > 0 && fc < fs / 2, "fir: cutoff must lie below Nyquist");
  return design_fir([fc](double f) { return f <= fc ? 1.0 : 0.0; }, fs, taps);
}

inline std::vector<double> design_highpass(double fc, double fs, int taps) {
  require(fc > 0 && fc < fs / 2, "fir: cutoff must lie below Nyquist");
  return design_fir([fc](double f) { return f >= fc ? 1.0 : 0.0; }, fs, taps);
}

inline std::vector<double> design_bandpass(double f1, double f2, double fs,
                                           int taps) {
  require(0 < f1 && f1 < f2 && f2 < fs / 2, "fir: bad bandpass corners");
  return design_fir([f1, f2](double f) { return (f >= f1 && f <= f2) ? 1.0 : 0.0; },
                    fs, taps);
}

inline std::vector<double> convolve_full(const std::vector<double>& x,
                                         const std::vector<double>& h) {
  std::vector<double> y(x.size() + h.size() - 1, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    for (std::size_t j = 0; j < h.size(); ++j) y[i + j] += xi * h[j];
  }
  return y;
}

// Apply a linear-phase FIR and remove its group delay, so the output is
// time-aligned with the input and has the same length.
inline std::vector<double> filter_zero_phase(const std::vector<double>& x,
                                             const std::vector<double>& h) {
  require(h.size() % 2 == 1, "fir: zero-phase apply needs odd tap count");
  auto full = convolve_full(x, h);
  std::size_t delay = (h.size() - 1) / 2;
  return std::vector<double>(full.begin() + std::ptrdiff_t(delay),
                             full.begin() + std::ptrdiff_t(delay + x.size()));
}

// DTFT magnitude of an FIR at one frequency; used by response probes in tests
// and by filter verification.
inline double fir_response_at(const std::vector<double>& h, double fs, double hz) {
  double re = 0.0, im = 0.0;
  for (std::size_t n = 0; n < h.size(); ++n) {
    double ang = -2.0 * M_PI * hz * double(n) / fs;
    re += h[n] * std::cos(ang);
    im += h[n] * std::sin(ang);
  }
  return std::sqrt(re * re + im * im);
}

}  // namespace haaqi
