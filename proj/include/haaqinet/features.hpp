#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "haaqinet/common.hpp"
#include "haaqinet/fft.hpp"

namespace haaqi {

// Frame-level features are T x F row-major matrices; rows are frames.
using FeatureMatrix = Mat;

// 512-point STFT magnitudes, Hamming window of 512, hop 256 -> 257 bins.
inline FeatureMatrix spectrogram(const Waveform& w) {
  require(w.sample_rate == 16000, "spectrogram: expected 16 kHz input");
  const std::size_t win = 512, hop = 256, bins = win / 2 + 1;
  require(w.samples.size() >= win, "spectrogram: input shorter than one window");
  const std::size_t frames = (w.samples.size() - win) / hop + 1;

  std::vector<double> window(win);
  for (std::size_t i = 0; i < win; ++i)
    window[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * double(i) / double(win - 1));

  FeatureMatrix out(frames, bins);
  std::vector<double> frame(win);
  for (std::size_t m = 0; m < frames; ++m) {
    for (std::size_t i = 0; i < win; ++i)
      frame[i] = w.samples[m * hop + i] * window[i];
    auto spec = rfft(frame);
    for (std::size_t k = 0; k < bins; ++k) out(Eigen::Index(m), Eigen::Index(k)) = std::abs(spec[k]);
  }
  return out;
}

struct FbankConfig {
  int mel_bins = 64;
  double window_ms = 25.0;
  double hop_ms = 10.0;
  double fmin_hz = 20.0;
  double log_floor = 1e-10;
};

namespace detail {

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

// Triangular mel filterbank over an n_fft/2+1 bin grid.
inline Mat mel_filters(int mel_bins, std::size_t n_fft, double fs, double fmin) {
  const std::size_t bins = n_fft / 2 + 1;
  double mel_lo = hz_to_mel(fmin), mel_hi = hz_to_mel(fs / 2.0);
  std::vector<double> centers(std::size_t(mel_bins) + 2);
  for (std::size_t i = 0; i < centers.size(); ++i)
    centers[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * double(i) /
                                        double(mel_bins + 1));
  Mat filt = Mat::Zero(mel_bins, Eigen::Index(bins));
  for (int m = 0; m < mel_bins; ++m) {
    double lo = centers[std::size_t(m)], mid = centers[std::size_t(m) + 1],
           hi = centers[std::size_t(m) + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      double f = double(k) * fs / double(n_fft);
      if (f > lo && f < mid)
        filt(m, Eigen::Index(k)) = (f - lo) / (mid - lo);
      else if (f >= mid && f < hi)
        filt(m, Eigen::Index(k)) = (hi - f) / (hi - mid);
    }
  }
  return filt;
}

}  // namespace detail

// Log-mel filterbank frames, mean/variance normalized per mel bin over the
// clip. This is the encoder front end.
inline FeatureMatrix prep_fbank(const Waveform& w,
                                const FbankConfig& cfg = FbankConfig{}) {
  require(w.sample_rate == 16000, "prep_fbank: expected 16 kHz input");
  const std::size_t win = std::size_t(cfg.window_ms * 1e-3 * w.sample_rate);
  const std::size_t hop = std::size_t(cfg.hop_ms * 1e-3 * w.sample_rate);
  require(w.samples.size() >= win, "prep_fbank: input shorter than one window");
  const std::size_t n_fft = next_pow2(win);
  const std::size_t frames = (w.samples.size() - win) / hop + 1;

  std::vector<double> window(win);
  for (std::size_t i = 0; i < win; ++i)
    window[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * double(i) / double(win - 1));
  Mat filt = detail::mel_filters(cfg.mel_bins, n_fft, double(w.sample_rate),
                                 cfg.fmin_hz);

  FeatureMatrix out(frames, cfg.mel_bins);
  std::vector<double> frame(n_fft, 0.0);
  for (std::size_t m = 0; m < frames; ++m) {
    std::fill(frame.begin(), frame.end(), 0.0);
    for (std::size_t i = 0; i < win; ++i)
      frame[i] = w.samples[m * hop + i] * window[i];
    auto spec = rfft(frame);
    Vec power(Eigen::Index(spec.size()));
    for (std::size_t k = 0; k < spec.size(); ++k)
      power[Eigen::Index(k)] = std::norm(spec[k]);
    Vec mel = filt * power;
    for (int b = 0; b < cfg.mel_bins; ++b)
      out(Eigen::Index(m), b) = std::log(std::max(mel[b], cfg.log_floor));
  }

  // Per-clip normalization; eps keeps silence at exactly zero.
  for (int b = 0; b < cfg.mel_bins; ++b) {
    double mean = out.col(b).mean();
    double var = (out.col(b).array() - mean).square().mean();
    out.col(b) = (out.col(b).array() - mean) / (std::sqrt(var) + 1e-10);
  }
  return out;
}

// Moving average over the feature axis: every k consecutive features collapse
// to their mean, trailing remainder truncated (768 -> 256 at k = 3).
inline FeatureMatrix window_average(const FeatureMatrix& x, int k) {
  require(k >= 1, "window_average: k >= 1");
  require(k <= x.cols(), "window_average: k exceeds feature count");
  const Eigen::Index out_cols = x.cols() / k;
  FeatureMatrix out(x.rows(), out_cols);
  for (Eigen::Index j = 0; j < out_cols; ++j)
    out.col(j) = x.middleCols(j * k, k).rowwise().mean();
  return out;
}

inline void write_feature_csv(const std::string& path, const FeatureMatrix& x) {
  std::ofstream f(path, std::ios::trunc);
  require(bool(f), "features: cannot write " + path);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (c) f << ",";
      f << x(r, c);
    }
    f << "\n";
  }
}

}  // namespace haaqi
