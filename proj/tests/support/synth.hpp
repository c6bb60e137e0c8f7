#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "haaqinet/common.hpp"
#include "haaqinet/wav.hpp"

namespace testsupport {

// Synthetic music-like clip: a handful of harmonics under slow envelopes
// plus a little broadband texture.
inline haaqi::Waveform music_clip(std::uint64_t seed, double seconds = 1.0,
                                  int sample_rate = 16000) {
  haaqi::Waveform w;
  w.sample_rate = sample_rate;
  w.samples.assign(std::size_t(seconds * sample_rate), 0.0);
  haaqi::Rng rng(seed);
  for (int voice = 0; voice < 5; ++voice) {
    double f0 = rng.uniform(110.0, 1760.0);
    double amp = rng.uniform(0.04, 0.15);
    double env_rate = rng.uniform(0.5, 3.0);
    double phase = rng.uniform(0.0, 2 * M_PI);
    int harmonics = 1 + int(rng.below(3));
    for (int h = 1; h <= harmonics; ++h) {
      double f = f0 * h;
      if (f >= sample_rate / 2.0) break;
      for (std::size_t i = 0; i < w.samples.size(); ++i) {
        double t = double(i) / sample_rate;
        double env = 0.5 * (1.0 + std::sin(2 * M_PI * env_rate * t + phase));
        w.samples[i] += amp / h * env * std::sin(2 * M_PI * f * t);
      }
    }
  }
  for (auto& v : w.samples) v += 0.01 * rng.gaussian();
  return w;
}

// Writes n clips under dir/<genre>/clipNN.wav and returns the root.
inline std::string make_clean_tree(const std::string& dir, int n,
                                   std::uint64_t seed, double seconds = 1.0) {
  namespace fs = std::filesystem;
  const char* genres[] = {"rock", "classical", "pop"};
  fs::create_directories(dir);
  for (int i = 0; i < n; ++i) {
    fs::path sub = fs::path(dir) / genres[i % 3];
    fs::create_directories(sub);
    char name[32];
    std::snprintf(name, sizeof(name), "clip%02d.wav", i);
    haaqi::write_wav((sub / name).string(),
                     music_clip(haaqi::derive_seed(seed, std::to_string(i)),
                                seconds));
  }
  return dir;
}

}  // namespace testsupport
