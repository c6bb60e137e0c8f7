#include <catch2/catch_amalgamated.hpp>

#include "haaqinet/dsp.hpp"

using namespace haaqi;

namespace {

Waveform tone(double hz, double amp, double seconds = 1.0, int fs = 16000) {
  Waveform w;
  w.sample_rate = fs;
  w.samples.resize(std::size_t(seconds * fs));
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    w.samples[i] = amp * std::sin(2.0 * M_PI * hz * double(i) / fs);
  return w;
}

Waveform noise_clip(std::uint64_t seed, double amp = 0.1, double seconds = 1.0) {
  Waveform w;
  w.sample_rate = 16000;
  w.samples.resize(std::size_t(seconds * 16000));
  Rng rng(seed);
  for (auto& v : w.samples) v = amp * rng.gaussian();
  return w;
}

double mid_rms(const std::vector<double>& x) {
  std::vector<double> mid(x.begin() + std::ptrdiff_t(x.size() / 4),
                          x.end() - std::ptrdiff_t(x.size() / 4));
  return rms(mid);
}

}  // namespace

TEST_CASE("spl: anchor and formula") {
  Waveform w;
  w.sample_rate = 16000;
  w.samples.assign(16000, 0.0);
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    w.samples[i] = std::sqrt(2.0) * std::sin(2.0 * M_PI * 440.0 * double(i) / 16000.0);
  // RMS of sqrt(2) amplitude sine = 1.0 -> 65 dB.
  REQUIRE(measure_spl(w).spl_db == Catch::Approx(65.0).margin(1e-3));

  for (auto& v : w.samples) v *= 0.5;
  REQUIRE(measure_spl(w).spl_db == Catch::Approx(65.0 - 6.0206).margin(1e-3));
  for (auto& v : w.samples) v *= 20.0;
  REQUIRE(measure_spl(w).spl_db == Catch::Approx(85.0).margin(1e-3));
}

TEST_CASE("spl: silent input errors") {
  Waveform w;
  w.sample_rate = 16000;
  w.samples.assign(100, 0.0);
  REQUIRE_THROWS_AS(measure_spl(w), Error);
  REQUIRE_THROWS_AS(adjust_spl(w, 65.0), Error);
}

TEST_CASE("spl: adjust/measure round trip across the sweep levels") {
  auto w = noise_clip(3);
  for (double target : {35.0, 45.0, 55.0, 65.0, 75.0, 85.0, 95.0}) {
    auto adjusted = adjust_spl(w, target);
    REQUIRE(measure_spl(adjusted).spl_db == Catch::Approx(target).margin(0.01));
  }
  // Identity when the target equals the current level.
  double cur = measure_spl(w).spl_db;
  auto same = adjust_spl(w, cur);
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    REQUIRE(same.samples[i] == Catch::Approx(w.samples[i]).margin(1e-12));
}

TEST_CASE("spl: 20 dB delta is a gain of 10") {
  auto w = noise_clip(4);
  double cur = measure_spl(w).spl_db;
  auto up = adjust_spl(w, cur + 20.0);
  REQUIRE(rms(up) / rms(w) == Catch::Approx(10.0).margin(1e-9));
}

TEST_CASE("add_noise hits the requested SNR") {
  auto w = noise_clip(5);
  for (double snr : {-10.0, -6.0, 0.0, 6.0, 12.0, 20.0, 30.0}) {
    auto noisy = add_noise(w, NoiseKind::kLtass, snr, 99);
    std::vector<double> added(noisy.samples.size());
    for (std::size_t i = 0; i < added.size(); ++i)
      added[i] = noisy.samples[i] - w.samples[i];
    double measured = db(rms(w.samples) / rms(added));
    REQUIRE(measured == Catch::Approx(snr).margin(0.1));
  }
}

TEST_CASE("add_noise: 0 dB means equal powers, 20 dB means 1% noise power") {
  auto w = noise_clip(6);
  auto n0 = add_noise(w, NoiseKind::kLtass, 0.0, 2);
  std::vector<double> added(w.samples.size());
  for (std::size_t i = 0; i < added.size(); ++i)
    added[i] = n0.samples[i] - w.samples[i];
  REQUIRE(db(rms(added) / rms(w.samples)) == Catch::Approx(0.0).margin(0.1));

  auto n20 = add_noise(w, NoiseKind::kLtass, 20.0, 2);
  for (std::size_t i = 0; i < added.size(); ++i)
    added[i] = n20.samples[i] - w.samples[i];
  double power_ratio = std::pow(rms(added) / rms(w.samples), 2.0);
  REQUIRE(power_ratio == Catch::Approx(0.01).epsilon(0.03));
}

TEST_CASE("add_noise: babble at 6 dB measures in [5.9, 6.1]") {
  auto w = noise_clip(7);
  auto noisy = add_noise(w, NoiseKind::kBabble, 6.0, 31);
  std::vector<double> added(noisy.samples.size());
  for (std::size_t i = 0; i < added.size(); ++i)
    added[i] = noisy.samples[i] - w.samples[i];
  double measured = db(rms(w.samples) / rms(added));
  REQUIRE(measured >= 5.9);
  REQUIRE(measured <= 6.1);
}

TEST_CASE("add_noise: silent input errors, determinism holds") {
  Waveform silent;
  silent.sample_rate = 16000;
  silent.samples.assign(1000, 0.0);
  REQUIRE_THROWS_AS(add_noise(silent, NoiseKind::kLtass, 10, 1), Error);

  auto w = noise_clip(8);
  auto a = add_noise(w, NoiseKind::kBabble, 3, 42);
  auto b = add_noise(w, NoiseKind::kBabble, 3, 42);
  REQUIRE(a.samples == b.samples);
}

TEST_CASE("peak_clip: direct definition and idempotence") {
  Waveform w;
  w.sample_rate = 16000;
  w.samples = {0.3, 0.8, -0.9};
  auto c = peak_clip(w, 0.5);
  REQUIRE(c.samples[0] == Catch::Approx(0.3));
  REQUIRE(c.samples[1] == Catch::Approx(0.45));
  REQUIRE(c.samples[2] == Catch::Approx(-0.45));

  auto ident = peak_clip(w, 1.0);
  REQUIRE(ident.samples == w.samples);

  // Re-clipping at the same absolute clamp changes nothing.
  auto again = peak_clip(c, 1.0);  // peak is now 0.45, threshold 1 -> clamp 0.45
  REQUIRE(again.samples == c.samples);
  REQUIRE_THROWS_AS(peak_clip(w, 0.0), Error);
}

TEST_CASE("quantize: formula, identity, and zero") {
  Waveform w;
  w.sample_rate = 16000;
  w.samples = {0.3, 0.0, -1.0, 1.0};
  auto q8 = quantize(w, 8);
  REQUIRE(q8.samples[0] == Catch::Approx(38.0 / 127.0));
  REQUIRE(q8.samples[1] == 0.0);
  REQUIRE(q8.samples[2] == Catch::Approx(-1.0));
  REQUIRE(q8.samples[3] == Catch::Approx(1.0));

  // A 16-bit-quantized signal is a fixed point of 16-bit quantization.
  auto q16 = quantize(w, 16);
  auto q16b = quantize(q16, 16);
  REQUIRE(q16.samples == q16b.samples);
  REQUIRE_THROWS_AS(quantize(w, 1), Error);
}

TEST_CASE("wdrc: ratio 1 is identity") {
  auto w = noise_clip(9, 0.2);
  WdrcConfig cfg;
  cfg.ratio = 1.0;
  auto out = wdrc(w, cfg);
  double err = 0, ref = 0;
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    err += (out.samples[i] - w.samples[i]) * (out.samples[i] - w.samples[i]);
    ref += w.samples[i] * w.samples[i];
  }
  REQUIRE(10.0 * std::log10(err / ref + 1e-300) < -60.0);
}

TEST_CASE("wdrc: static curve of a single channel") {
  // Steady 1 kHz sine at 65 dB SPL (RMS 1.0).
  auto w = tone(1000.0, std::sqrt(2.0), 2.0);
  WdrcConfig cfg;
  cfg.channels = 1;
  cfg.ratio = 3.0;
  cfg.knee_db = 45.0;
  auto out = wdrc(w, cfg);
  double level_out = kSplRefDb + db(mid_rms(out.samples));
  REQUIRE(level_out == Catch::Approx(65.0 - (2.0 / 3.0) * 20.0).margin(1.0));
}

TEST_CASE("wdrc: doubling input above knee raises output by 6/ratio dB") {
  WdrcConfig cfg;
  cfg.channels = 1;
  cfg.ratio = 3.0;
  auto w1 = tone(1000.0, 0.5, 2.0);
  auto w2 = tone(1000.0, 1.0, 2.0);
  auto o1 = wdrc(w1, cfg);
  auto o2 = wdrc(w2, cfg);
  double rise = db(mid_rms(o2.samples) / mid_rms(o1.samples));
  REQUIRE(rise == Catch::Approx(db(2.0) / cfg.ratio).margin(1.0));
}

TEST_CASE("wdrc: invalid configs") {
  auto w = noise_clip(10);
  WdrcConfig cfg;
  cfg.ratio = 0.5;
  REQUIRE_THROWS_AS(wdrc(w, cfg), Error);
  cfg = WdrcConfig{};
  cfg.attack_ms = 0.0;
  REQUIRE_THROWS_AS(wdrc(w, cfg), Error);
}

TEST_CASE("spectral subtraction: zero estimate reconstructs the input") {
  auto w = noise_clip(11, 0.3);
  SpecsubConfig cfg;
  cfg.source = SpecsubConfig::NoiseSource::kZeros;
  auto out = spectral_subtract(w, cfg);
  REQUIRE(out.samples.size() == w.samples.size());
  double err = 0, ref = 0;
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    err += (out.samples[i] - w.samples[i]) * (out.samples[i] - w.samples[i]);
    ref += w.samples[i] * w.samples[i];
  }
  REQUIRE(10.0 * std::log10(err / ref + 1e-300) < -60.0);
}

TEST_CASE("spectral subtraction: matched estimate floors pure noise at beta") {
  auto w = noise_clip(12, 0.2);
  SpecsubConfig cfg;
  cfg.alpha = 1.0;
  cfg.source = SpecsubConfig::NoiseSource::kSelf;
  auto out = spectral_subtract(w, cfg);
  REQUIRE(rms(out) <= cfg.beta * rms(w) * 1.01 + 1e-9);
}

TEST_CASE("spectral subtraction: output spectrum never drops below the floor") {
  auto w = noise_clip(13, 0.2);
  SpecsubConfig cfg;
  cfg.alpha = 3.0;
  cfg.source = SpecsubConfig::NoiseSource::kLeadingFrames;
  auto out = spectral_subtract(w, cfg);
  // Compare frame magnitudes of input and output on the same framing.
  const std::size_t win = 512, hop = 256;
  std::vector<double> hann(win);
  for (std::size_t i = 0; i < win; ++i)
    hann[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * double(i) / double(win));
  for (std::size_t start = hop; start + win < w.samples.size() - hop;
       start += 5 * hop) {
    std::vector<double> fi(win), fo(win);
    for (std::size_t i = 0; i < win; ++i) {
      fi[i] = w.samples[start + i] * hann[i];
      fo[i] = out.samples[start + i] * hann[i];
    }
    auto si = rfft(fi);
    auto so = rfft(fo);
    for (std::size_t k = 0; k < si.size(); ++k)
      REQUIRE(std::abs(so[k]) >=
              cfg.beta * std::abs(si[k]) - 0.05 * std::abs(si[k]) - 1e-6);
  }
}

TEST_CASE("linear filter: near-full-band lowpass is transparent") {
  auto w = noise_clip(14, 0.2);
  FilterSpec lp;
  lp.kind = FilterSpec::Kind::kLowPass;
  lp.fc = 7999.0;
  auto out = linear_filter(w, lp);
  REQUIRE(std::abs(db(rms(out) / rms(w))) <= 0.5);
}

TEST_CASE("linear filter: highpass probe tones 250 Hz vs 4 kHz") {
  FilterSpec hp;
  hp.kind = FilterSpec::Kind::kHighPass;
  hp.fc = 1000.0;
  auto low = linear_filter(tone(250.0, 0.3, 1.0), hp);
  auto high = linear_filter(tone(4000.0, 0.3, 1.0), hp);
  double atten = db(mid_rms(high.samples) / mid_rms(low.samples));
  REQUIRE(atten >= 24.0);
}

TEST_CASE("linear filter: +6 dB/octave tilt between 1 and 2 kHz") {
  FilterSpec t;
  t.kind = FilterSpec::Kind::kTilt;
  t.tilt_db_per_octave = 6.0;
  auto a = linear_filter(tone(1000.0, 0.1, 1.0), t);
  auto b = linear_filter(tone(2000.0, 0.1, 1.0), t);
  REQUIRE(db(mid_rms(b.samples) / mid_rms(a.samples)) ==
          Catch::Approx(6.0).margin(1.0));
}

TEST_CASE("linear filter: resonance peak gain at the center") {
  FilterSpec r;
  r.kind = FilterSpec::Kind::kResonance;
  r.center = 1000.0;
  r.q = 10.0;
  r.gain_db = 10.0;
  auto in = tone(1000.0, 0.05, 1.0);
  auto out = linear_filter(in, r);
  REQUIRE(db(mid_rms(out.samples) / mid_rms(in.samples)) ==
          Catch::Approx(10.0).margin(2.0));
  // Off-peak the response returns to about unity.
  auto off = linear_filter(tone(3000.0, 0.05, 1.0), r);
  REQUIRE(std::abs(db(mid_rms(off.samples) / mid_rms(in.samples))) < 1.0);
}

TEST_CASE("linear filter: cutoff at or above Nyquist errors") {
  auto w = noise_clip(15);
  FilterSpec lp;
  lp.kind = FilterSpec::Kind::kLowPass;
  lp.fc = 8000.0;
  REQUIRE_THROWS_AS(linear_filter(w, lp), Error);
}

TEST_CASE("every stage preserves length and sample rate") {
  auto w = noise_clip(16, 0.2);
  std::vector<Waveform> outs;
  outs.push_back(add_noise(w, NoiseKind::kLtass, 6, 1));
  outs.push_back(peak_clip(w, 0.5));
  outs.push_back(quantize(w, 8));
  outs.push_back(wdrc(w, WdrcConfig{}));
  outs.push_back(spectral_subtract(w, SpecsubConfig{}));
  FilterSpec f;
  f.kind = FilterSpec::Kind::kBandPass;
  f.f1 = 500;
  f.f2 = 4000;
  outs.push_back(linear_filter(w, f));
  for (const auto& o : outs) {
    REQUIRE(o.samples.size() == w.samples.size());
    REQUIRE(o.sample_rate == w.sample_rate);
  }
}
