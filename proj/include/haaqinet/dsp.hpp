#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "haaqinet/common.hpp"
#include "haaqinet/fft.hpp"
#include "haaqinet/fir.hpp"
#include "haaqinet/noise.hpp"

namespace haaqi {

// ---------------------------------------------------------------------------
// Sound pressure level, anchored at 65 dB SPL for RMS 1.0.
// ---------------------------------------------------------------------------

inline constexpr double kSplRefDb = 65.0;
inline constexpr double kSplRefRms = 1.0;

struct SplReading {
  double spl_db = 0.0;
};

inline SplReading measure_spl(const Waveform& w) {
  double r = rms(w);
  require(r > 0.0, "measure_spl: silent input");
  return {kSplRefDb + 20.0 * std::log10(r / kSplRefRms)};
}

inline Waveform adjust_spl(const Waveform& w, double target_db) {
  require(std::isfinite(target_db), "adjust_spl: non-finite target");
  double delta = target_db - measure_spl(w).spl_db;
  double gain = from_db(delta);
  Waveform out = w;
  for (auto& v : out.samples) v *= gain;
  return out;
}

// ---------------------------------------------------------------------------
// Noise addition
// ---------------------------------------------------------------------------

enum class NoiseKind { kLtass, kBabble };

inline std::string to_string(NoiseKind k) {
  return k == NoiseKind::kLtass ? "ltass" : "babble";
}

inline Waveform add_noise(const Waveform& w, NoiseKind kind, double snr_db,
                          std::uint64_t seed) {
  require(std::isfinite(snr_db), "add_noise: non-finite SNR");
  double sig_rms = rms(w);
  require(sig_rms > 0.0, "add_noise: silent input (SNR undefined)");
  Rng rng(seed);
  std::vector<double> noise =
      kind == NoiseKind::kLtass
          ? ltass_noise(w.samples.size(), w.sample_rate, rng)
          : babble_noise(w.samples.size(), w.sample_rate, rng);
  double noise_rms = rms(noise);
  require(noise_rms > 0.0, "add_noise: degenerate noise");
  // Exact power scaling makes the achieved SNR equal the request.
  double scale = sig_rms / noise_rms * from_db(-snr_db);
  Waveform out = w;
  for (std::size_t i = 0; i < out.samples.size(); ++i)
    out.samples[i] += noise[i] * scale;
  return out;
}

// ---------------------------------------------------------------------------
// Nonlinear stages
// ---------------------------------------------------------------------------

// Symmetric instantaneous clipping at a fraction of the waveform's peak.
inline Waveform peak_clip(const Waveform& w, double threshold) {
  require(threshold > 0.0 && threshold <= 1.0, "peak_clip: threshold in (0,1]");
  double peak = 0.0;
  for (double v : w.samples) peak = std::max(peak, std::abs(v));
  double clip = threshold * peak;
  Waveform out = w;
  if (peak == 0.0) return out;
  for (auto& v : out.samples) v = clamp(v, -clip, clip);
  return out;
}

// Mid-tread uniform quantizer over [-1, 1].
inline Waveform quantize(const Waveform& w, int bits) {
  require(bits >= 2, "quantize: bits must be >= 2");
  double levels = double((1 << (bits - 1)) - 1);
  Waveform out = w;
  for (auto& v : out.samples)
    v = std::round(clamp(v, -1.0, 1.0) * levels) / levels;
  return out;
}

// ---------------------------------------------------------------------------
// Wide dynamic range compression
// ---------------------------------------------------------------------------

struct WdrcConfig {
  int channels = 6;
  double ratio = 3.0;
  double knee_db = 45.0;  // dB SPL against the 65 dB / RMS 1.0 anchor
  double attack_ms = 5.0;
  double release_ms = 50.0;
  // Crossovers for the default 6-channel bank; resized for other counts.
  std::vector<double> crossovers_hz = {250, 500, 1000, 2000, 4000};
  int band_taps = 255;
};

inline void validate(const WdrcConfig& c) {
  require(c.channels >= 1, "wdrc: channels >= 1");
  require(c.ratio >= 1.0, "wdrc: ratio >= 1");
  require(c.attack_ms > 0.0 && c.release_ms > 0.0, "wdrc: time constants > 0");
  require(std::isfinite(c.knee_db), "wdrc: bad knee");
}

namespace detail {

// Complementary band filters from telescoping lowpass designs; their impulse
// responses sum to an exact unit impulse, so a 1:1 ratio passes audio through
// untouched.
inline std::vector<std::vector<double>> wdrc_bands(const WdrcConfig& cfg,
                                                   int sample_rate) {
  std::vector<double> cross = cfg.crossovers_hz;
  if (int(cross.size()) != cfg.channels - 1) {
    cross.clear();
    // Log-spaced crossovers between 200 Hz and 5 kHz.
    for (int i = 1; i < cfg.channels; ++i) {
      double u = double(i) / cfg.channels;
      cross.push_back(200.0 * std::pow(5000.0 / 200.0, u));
    }
  }
  std::vector<std::vector<double>> lows;
  for (double fc : cross)
    lows.push_back(design_lowpass(fc, sample_rate, cfg.band_taps));

  std::vector<std::vector<double>> bands;
  std::size_t taps = std::size_t(cfg.band_taps);
  std::vector<double> delta(taps, 0.0);
  delta[(taps - 1) / 2] = 1.0;
  std::vector<double> prev(taps, 0.0);
  for (int b = 0; b < cfg.channels; ++b) {
    std::vector<double> hi = (b == cfg.channels - 1) ? delta : lows[std::size_t(b)];
    std::vector<double> band(taps);
    for (std::size_t i = 0; i < taps; ++i) band[i] = hi[i] - prev[i];
    bands.push_back(band);
    prev = hi;
  }
  return bands;
}

}  // namespace detail

inline Waveform wdrc(const Waveform& w, const WdrcConfig& cfg) {
  validate(cfg);
  const double fs = double(w.sample_rate);
  const double a_att = std::exp(-1.0 / (fs * cfg.attack_ms * 1e-3));
  const double a_rel = std::exp(-1.0 / (fs * cfg.release_ms * 1e-3));
  const double slope = 1.0 - 1.0 / cfg.ratio;

  auto bands = detail::wdrc_bands(cfg, w.sample_rate);
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.assign(w.samples.size(), 0.0);

  for (const auto& h : bands) {
    auto x = filter_zero_phase(w.samples, h);
    // RMS detector (symmetric power smoothing, so steady tones measure their
    // true RMS) followed by attack/release tracking on the dB level.
    double env2 = x.empty() ? 0.0 : x[0] * x[0];
    double tracked = kSplRefDb + 10.0 * std::log10(env2 + 1e-30);
    for (std::size_t i = 0; i < x.size(); ++i) {
      env2 = a_att * env2 + (1.0 - a_att) * x[i] * x[i];
      double level = kSplRefDb + 10.0 * std::log10(env2 + 1e-30);
      double a = level > tracked ? a_att : a_rel;
      tracked = a * tracked + (1.0 - a) * level;
      double gain_db =
          tracked > cfg.knee_db ? -slope * (tracked - cfg.knee_db) : 0.0;
      out.samples[i] += x[i] * from_db(gain_db);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Spectral subtraction
// ---------------------------------------------------------------------------

struct SpecsubConfig {
  double alpha = 2.0;  // oversubtraction
  double beta = 0.05;  // spectral floor
  enum class NoiseSource {
    kZeros,          // no-op estimate
    kLeadingFrames,  // mean magnitude of the first frames
    kProvided,       // caller-supplied per-bin magnitudes
    kSelf,           // per-frame exact match (maximal suppression)
  };
  NoiseSource source = NoiseSource::kLeadingFrames;
  int leading_frames = 6;
  std::vector<double> provided_mag;
  int win = 512;
  int hop = 256;
};

inline void validate(const SpecsubConfig& c) {
  require(c.alpha > 0.0, "specsub: alpha > 0");
  require(c.beta > 0.0 && c.beta < 1.0, "specsub: beta in (0,1)");
  require(c.win > 0 && c.hop > 0 && c.hop <= c.win, "specsub: bad framing");
  require((std::size_t(c.win) & std::size_t(c.win - 1)) == 0,
          "specsub: window must be a power of two");
}

inline Waveform spectral_subtract(const Waveform& w, const SpecsubConfig& cfg) {
  validate(cfg);
  const std::size_t n = w.samples.size();
  const std::size_t win = std::size_t(cfg.win);
  const std::size_t hop = std::size_t(cfg.hop);
  const std::size_t bins = win / 2 + 1;

  // Periodic Hann analysis window; 50% overlap gives constant overlap-add.
  std::vector<double> window(win);
  for (std::size_t i = 0; i < win; ++i)
    window[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * double(i) / double(win));

  std::vector<double> padded(n + 2 * win, 0.0);
  std::copy(w.samples.begin(), w.samples.end(), padded.begin() + std::ptrdiff_t(win));
  std::size_t frames = (padded.size() - win) / hop + 1;

  std::vector<std::vector<cplx>> spectra(frames);
  std::vector<std::vector<double>> mags(frames, std::vector<double>(bins));
  std::vector<double> frame(win);
  for (std::size_t m = 0; m < frames; ++m) {
    for (std::size_t i = 0; i < win; ++i)
      frame[i] = padded[m * hop + i] * window[i];
    spectra[m] = rfft(frame);
    for (std::size_t k = 0; k < bins; ++k) mags[m][k] = std::abs(spectra[m][k]);
  }

  std::vector<double> noise_mag(bins, 0.0);
  using Src = SpecsubConfig::NoiseSource;
  if (cfg.source == Src::kLeadingFrames) {
    // First frames overlapping actual audio start at index win/hop.
    std::size_t first = win / hop;
    std::size_t count = std::min<std::size_t>(std::size_t(cfg.leading_frames),
                                              frames - first);
    require(count > 0, "specsub: too short for leading-frame estimate");
    for (std::size_t m = first; m < first + count; ++m)
      for (std::size_t k = 0; k < bins; ++k) noise_mag[k] += mags[m][k];
    for (auto& v : noise_mag) v /= double(count);
  } else if (cfg.source == Src::kProvided) {
    require(cfg.provided_mag.size() == bins, "specsub: provided estimate size");
    noise_mag = cfg.provided_mag;
  }

  std::vector<double> acc(padded.size(), 0.0);
  for (std::size_t m = 0; m < frames; ++m) {
    for (std::size_t k = 0; k < bins; ++k) {
      double est = cfg.source == Src::kSelf ? mags[m][k] : noise_mag[k];
      double target = std::max(mags[m][k] - cfg.alpha * est,
                               cfg.beta * mags[m][k]);
      double scale = mags[m][k] > 0.0 ? target / mags[m][k] : 0.0;
      spectra[m][k] *= scale;  // keep the input phase
    }
    auto rec = irfft(spectra[m], win);
    for (std::size_t i = 0; i < win; ++i) acc[m * hop + i] += rec[i];
  }

  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.assign(acc.begin() + std::ptrdiff_t(win),
                     acc.begin() + std::ptrdiff_t(win + n));
  return out;
}

// ---------------------------------------------------------------------------
// Linear filtering
// ---------------------------------------------------------------------------

struct FilterSpec {
  enum class Kind {
    kLowPass,
    kHighPass,
    kBandPass,
    kTilt,
    kResonance,
    kMultiResonance,
    kMultiResonanceLowPass,
  };
  Kind kind = Kind::kLowPass;
  double fc = 4000.0;              // lowpass/highpass; LP part of multi+LP
  double f1 = 500.0, f2 = 4000.0;  // bandpass corners
  double tilt_db_per_octave = 6.0; // signed, pivot at 1 kHz
  double center = 1000.0;
  double q = 10.0;
  double gain_db = 10.0;
  std::vector<double> centers = {500.0, 1000.0, 2000.0};  // multi-resonance
  int taps = 0;  // 0 = auto: 255 plain, 1023 when resonances are involved
};

namespace detail {

inline double peaking_mag(double f, double f0, double q, double gain_db) {
  // Analog peaking-EQ prototype; |H(j w0)| lands exactly on gain_db.
  double a = std::pow(10.0, gain_db / 40.0);
  double w = f / f0;  // normalized frequency
  double num_re = 1.0 - w * w;
  double num_im = w * a / q;
  double den_im = w / (a * q);
  double num = std::sqrt(num_re * num_re + num_im * num_im);
  double den = std::sqrt(num_re * num_re + den_im * den_im);
  return num / den;
}

inline double filter_mag_at(const FilterSpec& s, double f) {
  using K = FilterSpec::Kind;
  switch (s.kind) {
    case K::kLowPass: return f <= s.fc ? 1.0 : 0.0;
    case K::kHighPass: return f >= s.fc ? 1.0 : 0.0;
    case K::kBandPass: return (f >= s.f1 && f <= s.f2) ? 1.0 : 0.0;
    case K::kTilt: {
      double fmin = 62.5;  // hold the curve below this to keep gains finite
      double fx = std::max(f, fmin);
      return from_db(s.tilt_db_per_octave * std::log2(fx / 1000.0));
    }
    case K::kResonance: return peaking_mag(f, s.center, s.q, s.gain_db);
    case K::kMultiResonance: {
      double m = 1.0;
      for (double c : s.centers) m *= peaking_mag(f, c, s.q, s.gain_db);
      return m;
    }
    case K::kMultiResonanceLowPass: {
      if (f > s.fc) return 0.0;
      double m = 1.0;
      for (double c : s.centers) m *= peaking_mag(f, c, s.q, s.gain_db);
      return m;
    }
  }
  return 1.0;
}

inline int filter_taps(const FilterSpec& s) {
  if (s.taps > 0) return s.taps;
  using K = FilterSpec::Kind;
  bool resonant = s.kind == K::kResonance || s.kind == K::kMultiResonance ||
                  s.kind == K::kMultiResonanceLowPass;
  // Narrow peaks need finer frequency resolution than the plain filters.
  return resonant ? 1023 : 255;
}

}  // namespace detail

inline void validate(const FilterSpec& s, int sample_rate) {
  using K = FilterSpec::Kind;
  double nyq = sample_rate / 2.0;
  switch (s.kind) {
    case K::kLowPass:
    case K::kHighPass:
      require(s.fc > 0 && s.fc < nyq, "filter: cutoff must be below Nyquist");
      break;
    case K::kBandPass:
      require(0 < s.f1 && s.f1 < s.f2 && s.f2 < nyq, "filter: bad band corners");
      break;
    case K::kTilt:
      require(std::isfinite(s.tilt_db_per_octave), "filter: bad tilt");
      break;
    case K::kResonance:
      require(s.center > 0 && s.center < nyq && s.q > 0, "filter: bad resonance");
      break;
    case K::kMultiResonance:
      for (double c : s.centers)
        require(c > 0 && c < nyq, "filter: bad resonance center");
      break;
    case K::kMultiResonanceLowPass:
      require(s.fc > 0 && s.fc < nyq, "filter: cutoff must be below Nyquist");
      for (double c : s.centers)
        require(c > 0 && c < nyq, "filter: bad resonance center");
      break;
  }
}

inline Waveform linear_filter(const Waveform& w, const FilterSpec& spec) {
  validate(spec, w.sample_rate);
  auto h = design_fir(
      [&](double f) { return detail::filter_mag_at(spec, f); },
      double(w.sample_rate), detail::filter_taps(spec));
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples = filter_zero_phase(w.samples, h);
  return out;
}

}  // namespace haaqi
