#pragma once

#include <array>
#include <vector>

#include "haaqinet/audiogram.hpp"
#include "haaqinet/fir.hpp"

namespace haaqi {

// Intrusive proxy quality oracle for desk-scale end-to-end runs: a
// frequency-weighted envelope correlation between the processed signal and
// the clean reference, mapped through a normalized logistic so identical
// signals score exactly 1.0. It deliberately does NOT claim to match any
// published quality metric; its testable property is monotonicity under
// increasing degradation.
struct ProxyConfig {
  // Octave-ish analysis bands centered on the audiogram frequencies.
  std::array<double, 8> band_weights = {0.5, 0.8, 1.0, 1.0, 1.0, 0.9, 0.7, 0.5};
  double env_tau_ms = 10.0;  // envelope smoother
  int env_decim = 80;        // envelope sample every 5 ms at 16 kHz
  double logistic_k = 8.0;
  double logistic_mid = 0.6;
  int band_taps = 255;
};

namespace detail {

inline std::vector<double> band_envelope(const std::vector<double>& x,
                                         const std::vector<double>& band,
                                         double fs, const ProxyConfig& cfg) {
  auto filtered = filter_zero_phase(x, band);
  double a = std::exp(-1.0 / (fs * cfg.env_tau_ms * 1e-3));
  std::vector<double> env;
  env.reserve(filtered.size() / std::size_t(cfg.env_decim) + 1);
  double state = 0.0;
  for (std::size_t i = 0; i < filtered.size(); ++i) {
    state = a * state + (1.0 - a) * std::abs(filtered[i]);
    if (i % std::size_t(cfg.env_decim) == 0) env.push_back(state);
  }
  return env;
}

inline double envelope_correlation(const std::vector<double>& a,
                                   const std::vector<double>& b) {
  double ma = 0, mb = 0;
  for (double v : a) ma += v;
  for (double v : b) mb += v;
  ma /= double(a.size());
  mb /= double(b.size());
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 1e-20 && sbb <= 1e-20) return 1.0;  // both silent in this band
  if (saa <= 1e-20 || sbb <= 1e-20) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

inline std::vector<std::vector<double>> proxy_bands(int sample_rate,
                                                    const ProxyConfig& cfg) {
  // Telescoping lowpass differences at the geometric midpoints between the
  // audiogram centers; sums to an exact allpass.
  std::vector<double> cross;
  for (int i = 0; i + 1 < 8; ++i)
    cross.push_back(std::sqrt(kAudiogramFreqs[std::size_t(i)] *
                              kAudiogramFreqs[std::size_t(i) + 1]));
  std::vector<std::vector<double>> lows;
  for (double fc : cross)
    lows.push_back(design_lowpass(fc, sample_rate, cfg.band_taps));
  std::vector<std::vector<double>> bands;
  std::size_t taps = std::size_t(cfg.band_taps);
  std::vector<double> delta(taps, 0.0);
  delta[(taps - 1) / 2] = 1.0;
  std::vector<double> prev(taps, 0.0);
  for (int b = 0; b < 8; ++b) {
    std::vector<double> hi = (b == 7) ? delta : lows[std::size_t(b)];
    std::vector<double> band(taps);
    for (std::size_t i = 0; i < taps; ++i) band[i] = hi[i] - prev[i];
    bands.push_back(band);
    prev = hi;
  }
  return bands;
}

}  // namespace detail

inline double proxy_score(const Waveform& processed, const Waveform& clean,
                          const ProxyConfig& cfg = ProxyConfig{}) {
  require(processed.sample_rate == clean.sample_rate,
          "proxy: sample rate mismatch");
  require(processed.samples.size() == clean.samples.size(),
          "proxy: length mismatch");
  require(rms(clean) > 0.0, "proxy: silent reference");

  auto bands = detail::proxy_bands(clean.sample_rate, cfg);
  double fs = double(clean.sample_rate);
  double acc = 0.0, wsum = 0.0;
  for (int b = 0; b < 8; ++b) {
    auto ea = detail::band_envelope(processed.samples, bands[std::size_t(b)],
                                    fs, cfg);
    auto eb = detail::band_envelope(clean.samples, bands[std::size_t(b)], fs,
                                    cfg);
    double r = detail::envelope_correlation(ea, eb);
    acc += cfg.band_weights[std::size_t(b)] * r;
    wsum += cfg.band_weights[std::size_t(b)];
  }
  double r = clamp(acc / wsum, -1.0, 1.0);

  auto logistic = [&](double x) {
    return 1.0 / (1.0 + std::exp(-cfg.logistic_k * (x - cfg.logistic_mid)));
  };
  double score = logistic(r) / logistic(1.0);
  return clamp(score, 0.0, 1.0);
}

}  // namespace haaqi
