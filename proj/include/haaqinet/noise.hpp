#pragma once

#include <algorithm>
#include <vector>

#include "haaqinet/common.hpp"
#include "haaqinet/fir.hpp"

namespace haaqi {

// Long-term average speech spectrum, 1/3-octave levels (dB SPL) after
// Byrne et al. (1994), combined-talker curve. Used as a relative shaping
// curve; the absolute calibration is irrelevant because noise is rescaled
// to a target SNR afterwards.
struct LtassTable {
  std::vector<double> freqs_hz = {63,   80,   100,  125,  160,  200,  250,
                                  315,  400,  500,  630,  800,  1000, 1250,
                                  1600, 2000, 2500, 3150, 4000, 5000, 6300,
                                  8000, 10000, 12500, 16000};
  std::vector<double> levels_db = {38.6, 43.5, 54.4, 57.7, 56.8, 60.2, 60.3,
                                   59.0, 62.1, 62.1, 60.5, 56.8, 53.7, 53.0,
                                   52.0, 48.7, 48.1, 46.8, 45.6, 44.5, 44.3,
                                   43.7, 43.4, 41.3, 40.7};
};

inline double ltass_level_db_at(const LtassTable& t, double hz) {
  if (hz <= t.freqs_hz.front()) return t.levels_db.front();
  if (hz >= t.freqs_hz.back()) return t.levels_db.back();
  for (std::size_t i = 0; i + 1 < t.freqs_hz.size(); ++i) {
    if (hz >= t.freqs_hz[i] && hz <= t.freqs_hz[i + 1]) {
      double u = (std::log2(hz) - std::log2(t.freqs_hz[i])) /
                 (std::log2(t.freqs_hz[i + 1]) - std::log2(t.freqs_hz[i]));
      return t.levels_db[i] + u * (t.levels_db[i + 1] - t.levels_db[i]);
    }
  }
  return t.levels_db.back();
}

// Stationary speech-shaped noise: white gaussian noise filtered to the LTASS
// curve. Unit-RMS-ish output; callers rescale to a target SNR.
inline std::vector<double> ltass_noise(std::size_t n, int sample_rate, Rng& rng,
                                       const LtassTable& table = LtassTable{},
                                       int taps = 255) {
  double peak = *std::max_element(table.levels_db.begin(), table.levels_db.end());
  auto h = design_fir(
      [&](double hz) {
        if (hz < 1.0) hz = 1.0;
        return from_db(ltass_level_db_at(table, hz) - peak);
      },
      double(sample_rate), taps);
  std::vector<double> white(n + h.size());
  for (auto& v : white) v = rng.gaussian();
  auto shaped = filter_zero_phase(white, h);
  shaped.resize(n);
  return shaped;
}

// Multi-talker babble stand-in: several independent LTASS streams, each
// amplitude-modulated at ~4 Hz with a random phase, summed.
inline std::vector<double> babble_noise(std::size_t n, int sample_rate, Rng& rng,
                                        int talkers = 6,
                                        double mod_rate_hz = 4.0,
                                        double mod_depth = 0.5) {
  std::vector<double> out(n, 0.0);
  for (int k = 0; k < talkers; ++k) {
    auto stream = ltass_noise(n, sample_rate, rng);
    double phase = rng.uniform(0.0, 2.0 * M_PI);
    for (std::size_t i = 0; i < n; ++i) {
      double mod = 1.0 + mod_depth * std::sin(2.0 * M_PI * mod_rate_hz *
                                                  double(i) / sample_rate +
                                              phase);
      out[i] += stream[i] * mod;
    }
  }
  return out;
}

}  // namespace haaqi
