#pragma once

#include <array>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "haaqinet/common.hpp"
#include "haaqinet/fir.hpp"

namespace haaqi {

// Audiometric frequencies (Hz) for the 8-dimensional threshold vector.
inline constexpr std::array<double, 8> kAudiogramFreqs = {
    250, 500, 1000, 2000, 3000, 4000, 6000, 8000};

enum class AudiogramCategory {
  kFlat,
  kSloping,
  kRising,
  kCookieBite,
  kNoiseNotched,
  kHighFrequency,
};

inline constexpr std::array<AudiogramCategory, 6> kAllCategories = {
    AudiogramCategory::kFlat,          AudiogramCategory::kSloping,
    AudiogramCategory::kRising,        AudiogramCategory::kCookieBite,
    AudiogramCategory::kNoiseNotched,  AudiogramCategory::kHighFrequency};

inline std::string to_string(AudiogramCategory c) {
  switch (c) {
    case AudiogramCategory::kFlat: return "flat";
    case AudiogramCategory::kSloping: return "sloping";
    case AudiogramCategory::kRising: return "rising";
    case AudiogramCategory::kCookieBite: return "cookie-bite";
    case AudiogramCategory::kNoiseNotched: return "noise-notched";
    case AudiogramCategory::kHighFrequency: return "high-frequency";
  }
  throw Error("audiogram: bad category");
}

inline AudiogramCategory category_from_string(const std::string& s) {
  for (auto c : kAllCategories)
    if (to_string(c) == s) return c;
  throw Error("audiogram: unknown category '" + s + "'");
}

struct Audiogram {
  std::array<double, 8> thresholds{};  // dB HL
  AudiogramCategory category = AudiogramCategory::kFlat;

  double span() const {
    double lo = thresholds[0], hi = thresholds[0];
    for (double t : thresholds) {
      lo = std::min(lo, t);
      hi = std::max(hi, t);
    }
    return hi - lo;
  }
};

struct GainVector {
  std::array<double, 8> gains{};  // dB, aligned with kAudiogramFreqs
};

inline void validate_range(const Audiogram& a) {
  for (double t : a.thresholds)
    require(t >= 0.0 && t <= 120.0, "audiogram: threshold outside [0,120] dB HL");
}

inline void validate(const Audiogram& a) {
  validate_range(a);
  bool any_loss = false;
  for (double t : a.thresholds)
    if (t > 20.0) any_loss = true;
  require(any_loss, "audiogram: no threshold above 20 dB (not a hearing loss)");
}

// ---------------------------------------------------------------------------
// Shape predicates. Written to be pairwise exclusive so classification never
// has to break ties: every generated pattern matches exactly one family.
// ---------------------------------------------------------------------------

namespace shape {

inline bool non_decreasing(const std::array<double, 8>& t) {
  for (int i = 1; i < 8; ++i)
    if (t[i] < t[i - 1]) return false;
  return true;
}

inline bool non_increasing(const std::array<double, 8>& t) {
  for (int i = 1; i < 8; ++i)
    if (t[i] > t[i - 1]) return false;
  return true;
}

inline double span(const std::array<double, 8>& t) {
  double lo = t[0], hi = t[0];
  for (double v : t) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return hi - lo;
}

inline bool is_flat(const std::array<double, 8>& t) { return span(t) <= 10.0; }

// Near-normal lows, a plateau of loss at and above 4 kHz, no notch recovery.
inline bool is_high_frequency(const std::array<double, 8>& t) {
  double low = std::max({t[0], t[1], t[2]});
  double high = std::min({t[5], t[6], t[7]});
  return low <= 25.0 && high >= 40.0 && t[4] <= t[5] && t[7] >= t[5] - 10.0;
}

inline bool is_sloping(const std::array<double, 8>& t) {
  return non_decreasing(t) && span(t) >= 20.0 && !is_high_frequency(t);
}

inline bool is_rising(const std::array<double, 8>& t) {
  return non_increasing(t) && span(t) >= 20.0;
}

// Mid-frequency (1-2 kHz) loss with near-normal edges.
inline bool is_cookie_bite(const std::array<double, 8>& t) {
  double mid = std::max(t[2], t[3]);
  return mid >= t[0] + 15.0 && mid >= t[7] + 15.0 && t[0] <= 30.0 &&
         t[7] <= 30.0 && std::max(t[4], t[5]) <= mid;
}

// Notch peaking at 3-4 kHz: exceeds the mid region and recovers by 8 kHz.
inline bool is_noise_notched(const std::array<double, 8>& t) {
  double peak = std::max(t[4], t[5]);
  return peak >= std::max(t[2], t[3]) + 15.0 && peak >= t[7] + 15.0;
}

inline bool matches(AudiogramCategory c, const std::array<double, 8>& t) {
  switch (c) {
    case AudiogramCategory::kFlat: return is_flat(t);
    case AudiogramCategory::kSloping: return is_sloping(t);
    case AudiogramCategory::kRising: return is_rising(t);
    case AudiogramCategory::kCookieBite: return is_cookie_bite(t);
    case AudiogramCategory::kNoiseNotched: return is_noise_notched(t);
    case AudiogramCategory::kHighFrequency: return is_high_frequency(t);
  }
  return false;
}

}  // namespace shape

inline AudiogramCategory classify_audiogram(const Audiogram& a) {
  validate(a);
  int hits = 0;
  AudiogramCategory found = AudiogramCategory::kFlat;
  for (auto c : kAllCategories) {
    if (shape::matches(c, a.thresholds)) {
      ++hits;
      found = c;
    }
  }
  require(hits == 1, "audiogram: ambiguous shape (" + std::to_string(hits) +
                         " predicates matched)");
  return found;
}

// ---------------------------------------------------------------------------
// Generation. Draws on a 5 dB audiometric grid, then verifies the draw
// classifies back to the requested family; the rare off-shape draw retries.
// ---------------------------------------------------------------------------

namespace detail {

inline double grid5(int steps) { return 5.0 * steps; }

inline std::array<double, 8> draw_pattern(AudiogramCategory c, Rng& rng) {
  std::array<double, 8> t{};
  auto g5 = [&](int lo, int hi) { return grid5(rng.range(lo, hi)); };
  switch (c) {
    case AudiogramCategory::kFlat: {
      double base = g5(5, 13);  // 25..65
      for (auto& v : t) v = base + g5(0, 2);
      break;
    }
    case AudiogramCategory::kSloping: {
      t[0] = g5(3, 7);  // 15..35
      for (int i = 1; i < 8; ++i) t[i] = std::min(105.0, t[i - 1] + g5(0, 3));
      break;
    }
    case AudiogramCategory::kRising: {
      t[0] = g5(9, 14);  // 45..70
      for (int i = 1; i < 8; ++i) t[i] = std::max(5.0, t[i - 1] - g5(0, 3));
      break;
    }
    case AudiogramCategory::kCookieBite: {
      t[0] = g5(2, 5);
      t[7] = g5(2, 5);
      double peak = std::min(85.0, std::max(t[0], t[7]) + g5(4, 8));
      t[1] = t[0] + g5(0, 2);
      t[2] = peak - g5(0, 1);
      t[3] = peak;
      t[4] = peak - g5(1, 3);
      t[5] = std::max(t[7], peak - g5(2, 5));
      t[6] = t[7] + g5(0, 2);
      break;
    }
    case AudiogramCategory::kNoiseNotched: {
      t[0] = g5(2, 5);
      t[1] = g5(2, 5);
      t[2] = g5(2, 6);
      t[3] = g5(2, 6);
      double peak = std::min(90.0, std::max(t[2], t[3]) + g5(4, 9));
      t[5] = peak;
      t[4] = peak - g5(1, 4);
      t[6] = peak - g5(2, 4);
      t[7] = std::max(5.0, peak - g5(4, 7));
      break;
    }
    case AudiogramCategory::kHighFrequency: {
      t[0] = g5(1, 5);
      t[1] = g5(1, 5);
      t[2] = g5(1, 5);
      t[3] = g5(4, 7);  // 20..35
      double plateau = g5(8, 13);  // 40..65
      t[5] = plateau;
      t[4] = std::min(plateau, t[3] + g5(1, 4));
      t[6] = std::min(110.0, plateau + g5(0, 2));
      t[7] = std::max(40.0, plateau + g5(-2, 3));
      break;
    }
  }
  return t;
}

}  // namespace detail

inline Audiogram generate_audiogram(AudiogramCategory category,
                                    std::uint64_t seed) {
  Rng rng(derive_seed(seed, "audiogram/" + to_string(category)));
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Audiogram a;
    a.thresholds = detail::draw_pattern(category, rng);
    a.category = category;
    bool loss = false;
    for (double v : a.thresholds) loss = loss || v > 20.0;
    if (!loss) continue;
    bool unique = true;
    int hits = 0;
    for (auto c : kAllCategories)
      if (shape::matches(c, a.thresholds)) ++hits;
    unique = (hits == 1) && shape::matches(category, a.thresholds);
    if (unique) return a;
  }
  throw Error("audiogram: generator failed to converge for " +
              to_string(category));
}

// ---------------------------------------------------------------------------
// NAL-R prescription
// ---------------------------------------------------------------------------

// Frequency corrections transcribed from the NAL revised procedure (Byrne &
// Dillon, 1986), extended to 8 kHz by holding the 6 kHz value. The published
// 1 kHz entry is +1 dB; the default here uses 0 so that normal hearing
// prescribes no amplification at any frequency.
struct NalRConfig {
  std::array<double, 8> correction = {-17.0, -8.0, 0.0, -1.0,
                                      -2.0,  -2.0, -2.0, -2.0};
  double three_freq_factor = 0.05;  // applied to H500 + H1000 + H2000
  double slope_factor = 0.31;
  double max_gain_db = 80.0;
};

// Prescription accepts any range-valid audiogram, including normal hearing
// (which clamps to all-zero gains).
inline GainVector nal_r_gains(const Audiogram& a,
                              const NalRConfig& cfg = NalRConfig{}) {
  validate_range(a);
  const auto& t = a.thresholds;
  double x = cfg.three_freq_factor * (t[1] + t[2] + t[3]);
  GainVector g;
  for (int i = 0; i < 8; ++i) {
    double raw = x + cfg.slope_factor * t[i] + cfg.correction[i];
    g.gains[i] = clamp(std::max(0.0, raw), 0.0, cfg.max_gain_db);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Multi-band amplification
//
// The 8 per-band gains define a target magnitude response: flat within a
// 1/8-octave plateau around each audiogram frequency and dB-linear in log
// frequency between plateaus. A single linear-phase FIR realizes the whole
// curve, which keeps the zero-gain case an exact identity.
// ---------------------------------------------------------------------------

inline double prescription_gain_db_at(const GainVector& g, double hz) {
  constexpr double kPlateau = 1.0 / 8.0;  // octaves on each side of a center
  if (hz <= kAudiogramFreqs[0]) return g.gains[0];
  if (hz >= kAudiogramFreqs[7]) return g.gains[7];
  for (int i = 0; i < 8; ++i) {
    double lo = kAudiogramFreqs[i] * std::pow(2.0, -kPlateau);
    double hi = kAudiogramFreqs[i] * std::pow(2.0, kPlateau);
    if (hz >= lo && hz <= hi) return g.gains[i];
  }
  for (int i = 0; i < 7; ++i) {
    double hi_edge = kAudiogramFreqs[i] * std::pow(2.0, kPlateau);
    double lo_edge = kAudiogramFreqs[i + 1] * std::pow(2.0, -kPlateau);
    if (hz > hi_edge && hz < lo_edge) {
      double u = (std::log2(hz) - std::log2(hi_edge)) /
                 (std::log2(lo_edge) - std::log2(hi_edge));
      return g.gains[i] + u * (g.gains[i + 1] - g.gains[i]);
    }
  }
  return g.gains[7];  // unreachable for sane grids
}

inline Waveform apply_prescription(const Waveform& w, const GainVector& g,
                                   int taps = 511) {
  require(w.sample_rate == 16000, "apply_prescription: expected 16 kHz input");
  for (double v : g.gains)
    require(v >= 0.0 && v <= 80.0, "apply_prescription: gain outside [0,80] dB");
  auto h = design_fir(
      [&](double hz) { return from_db(prescription_gain_db_at(g, hz)); },
      double(w.sample_rate), taps);
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples = filter_zero_phase(w.samples, h);
  return out;
}

// ---------------------------------------------------------------------------
// Pattern bank + CSV
// ---------------------------------------------------------------------------

struct AudiogramBankEntry {
  std::string id;
  Audiogram audiogram;
  bool train_split = true;  // first 40 of each 50-pattern family
};

// 50 patterns per family, 40 train / 10 test, reproducible from the master
// seed alone.
inline std::vector<AudiogramBankEntry> generate_audiogram_bank(
    std::uint64_t master_seed, int per_category = 50, int train_per_category = 40) {
  std::vector<AudiogramBankEntry> bank;
  for (auto c : kAllCategories) {
    for (int i = 0; i < per_category; ++i) {
      AudiogramBankEntry e;
      std::ostringstream id;
      id << to_string(c) << "-" << (i < 10 ? "0" : "") << i;
      e.id = id.str();
      e.audiogram = generate_audiogram(
          c, derive_seed(master_seed, "bank/" + to_string(c) + "/" +
                                          std::to_string(i)));
      e.train_split = i < train_per_category;
      bank.push_back(std::move(e));
    }
  }
  return bank;
}

inline void write_audiogram_csv(const std::string& path,
                                const std::vector<AudiogramBankEntry>& bank) {
  std::ofstream f(path, std::ios::trunc);
  require(bool(f), "audiogram: cannot write " + path);
  f << "id,category,t250,t500,t1000,t2000,t3000,t4000,t6000,t8000\n";
  for (const auto& e : bank) {
    f << e.id << "," << to_string(e.audiogram.category);
    for (double t : e.audiogram.thresholds) f << "," << int(std::lrint(t));
    f << "\n";
  }
}

inline std::vector<AudiogramBankEntry> read_audiogram_csv(
    const std::string& path, int train_per_category = 40) {
  std::ifstream f(path);
  require(bool(f), "audiogram: cannot open " + path);
  std::string line;
  require(bool(std::getline(f, line)), "audiogram: empty csv " + path);
  std::vector<AudiogramBankEntry> bank;
  std::map<std::string, int> per_cat;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    AudiogramBankEntry e;
    require(bool(std::getline(ss, e.id, ',')), "audiogram: bad csv row");
    require(bool(std::getline(ss, field, ',')), "audiogram: bad csv row");
    e.audiogram.category = category_from_string(field);
    for (int i = 0; i < 8; ++i) {
      require(bool(std::getline(ss, field, ',')), "audiogram: bad csv row");
      e.audiogram.thresholds[i] = std::stod(field);
    }
    validate(e.audiogram);
    int idx = per_cat[to_string(e.audiogram.category)]++;
    e.train_split = idx < train_per_category;
    bank.push_back(std::move(e));
  }
  require(!bank.empty(), "audiogram: no rows in " + path);
  return bank;
}

}  // namespace haaqi
