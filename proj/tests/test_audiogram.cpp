#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <map>

#include "haaqinet/audiogram.hpp"

using namespace haaqi;

TEST_CASE("flat generation: span <= 10 dB, all >= 25 dB") {
  auto a = generate_audiogram(AudiogramCategory::kFlat, 7);
  REQUIRE(a.span() <= 10.0);
  for (double t : a.thresholds) REQUIRE(t >= 25.0);
}

TEST_CASE("sloping generation: non-decreasing with span >= 20 dB") {
  auto a = generate_audiogram(AudiogramCategory::kSloping, 1);
  for (int i = 1; i < 8; ++i)
    REQUIRE(a.thresholds[std::size_t(i)] >= a.thresholds[std::size_t(i - 1)]);
  REQUIRE(a.span() >= 20.0);
}

TEST_CASE("noise-notched generation: 4 kHz exceeds 2 kHz and 8 kHz by >= 15 dB") {
  // Scan many seeds: the notch predicate must hold for every draw.
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    auto a = generate_audiogram(AudiogramCategory::kNoiseNotched, seed + 3);
    double peak = std::max(a.thresholds[4], a.thresholds[5]);
    REQUIRE(peak >= a.thresholds[3] + 15.0);
    REQUIRE(peak >= a.thresholds[7] + 15.0);
  }
}

TEST_CASE("classification of hand-written profiles") {
  Audiogram flat;
  flat.thresholds = {40, 40, 40, 40, 40, 40, 40, 40};
  REQUIRE(classify_audiogram(flat) == AudiogramCategory::kFlat);

  Audiogram sloping;
  sloping.thresholds = {20, 25, 35, 45, 55, 65, 70, 75};
  REQUIRE(classify_audiogram(sloping) == AudiogramCategory::kSloping);
}

TEST_CASE("classification rejects out-of-range and no-loss profiles") {
  Audiogram a;
  a.thresholds = {10, 10, 10, 10, 10, 10, 10, 10};
  REQUIRE_THROWS_AS(classify_audiogram(a), Error);  // nothing above 20 dB
  a.thresholds = {10, 10, 10, 10, 10, 10, 10, 130};
  REQUIRE_THROWS_AS(classify_audiogram(a), Error);  // out of range
}

TEST_CASE("generate -> classify round trip across all categories") {
  for (auto c : kAllCategories) {
    int failures = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      auto a = generate_audiogram(c, seed);
      if (classify_audiogram(a) != c) ++failures;
    }
    REQUIRE(failures == 0);
  }
}

TEST_CASE("nal-r: normal hearing prescribes zero gain everywhere") {
  Audiogram a;
  a.thresholds = {0, 0, 0, 0, 0, 0, 0, 0};
  auto g = nal_r_gains(a);
  for (double v : g.gains) REQUIRE(v == 0.0);
}

TEST_CASE("nal-r: flat 60 dB loss matches the formula") {
  Audiogram a;
  a.thresholds = {60, 60, 60, 60, 60, 60, 60, 60};
  auto g = nal_r_gains(a);
  NalRConfig cfg;
  double x = 0.05 * 180.0;
  REQUIRE(g.gains[2] == Catch::Approx(x + 0.31 * 60.0 + cfg.correction[2]));
  REQUIRE(g.gains[0] == Catch::Approx(x + 0.31 * 60.0 + cfg.correction[0]));
}

TEST_CASE("nal-r: raising one threshold moves only that gain (off the 3FA freqs)") {
  Audiogram a;
  a.thresholds = {40, 40, 40, 40, 40, 40, 40, 40};
  auto g1 = nal_r_gains(a);
  a.thresholds[5] = 60;  // 4 kHz: not part of the three-frequency average
  auto g2 = nal_r_gains(a);
  REQUIRE(g2.gains[5] - g1.gains[5] == Catch::Approx(0.31 * 20.0));
  for (int i = 0; i < 8; ++i)
    if (i != 5) REQUIRE(g2.gains[std::size_t(i)] == g1.gains[std::size_t(i)]);
}

TEST_CASE("nal-r monotonicity: raising any threshold never lowers any gain") {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    Audiogram a = generate_audiogram(
        kAllCategories[std::size_t(trial % 6)], std::uint64_t(trial));
    auto g1 = nal_r_gains(a);
    int k = int(rng.below(8));
    a.thresholds[std::size_t(k)] =
        std::min(120.0, a.thresholds[std::size_t(k)] + 10.0);
    auto g2 = nal_r_gains(a);
    for (int i = 0; i < 8; ++i)
      REQUIRE(g2.gains[std::size_t(i)] >= g1.gains[std::size_t(i)] - 1e-12);
  }
}

TEST_CASE("apply_prescription: zero gains reconstruct the input") {
  Waveform w;
  w.sample_rate = 16000;
  Rng rng(5);
  w.samples.resize(8000);
  for (auto& v : w.samples) v = rng.uniform(-0.5, 0.5);
  GainVector g{};
  auto out = apply_prescription(w, g);
  double err = 0, ref = 0;
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    err += (out.samples[i] - w.samples[i]) * (out.samples[i] - w.samples[i]);
    ref += w.samples[i] * w.samples[i];
  }
  REQUIRE(10.0 * std::log10(err / ref + 1e-300) < -80.0);
}

TEST_CASE("apply_prescription: +20 dB at 1 kHz boosts a 1 kHz tone by 20 dB") {
  Waveform w;
  w.sample_rate = 16000;
  w.samples.resize(16000);
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    w.samples[i] = 0.01 * std::sin(2.0 * M_PI * 1000.0 * double(i) / 16000.0);
  GainVector g{};
  g.gains[2] = 20.0;
  auto out = apply_prescription(w, g);
  // Skip filter edges when measuring.
  auto mid_rms = [](const std::vector<double>& x) {
    std::vector<double> mid(x.begin() + 2000, x.end() - 2000);
    return rms(mid);
  };
  double gain_db = db(mid_rms(out.samples) / mid_rms(w.samples));
  REQUIRE(gain_db == Catch::Approx(20.0).margin(0.5));
}

TEST_CASE("apply_prescription: flat +6 dB scales broadband noise by 1.995") {
  Waveform w;
  w.sample_rate = 16000;
  Rng rng(17);
  w.samples.resize(16000);
  for (auto& v : w.samples) v = 0.1 * rng.gaussian();
  GainVector g{};
  for (auto& v : g.gains) v = 6.0;
  auto out = apply_prescription(w, g);
  REQUIRE(rms(out) / rms(w) == Catch::Approx(from_db(6.0)).epsilon(0.025));
}

TEST_CASE("apply_prescription is linear in amplitude") {
  Waveform w;
  w.sample_rate = 16000;
  Rng rng(23);
  w.samples.resize(4000);
  for (auto& v : w.samples) v = rng.uniform(-0.3, 0.3);
  GainVector g{};
  g.gains = {10, 8, 6, 4, 2, 12, 14, 16};
  auto y1 = apply_prescription(w, g);
  Waveform w2 = w;
  for (auto& v : w2.samples) v *= 3.0;
  auto y2 = apply_prescription(w2, g);
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    REQUIRE(y2.samples[i] == Catch::Approx(3.0 * y1.samples[i]).margin(1e-9));
}

TEST_CASE("apply_prescription rejects non-16k input") {
  Waveform w;
  w.sample_rate = 32000;
  w.samples.assign(100, 0.1);
  REQUIRE_THROWS_AS(apply_prescription(w, GainVector{}), Error);
}

TEST_CASE("audiogram bank: 300 patterns, 50 per category, byte-stable") {
  auto bank = generate_audiogram_bank(1234);
  REQUIRE(bank.size() == 300);
  std::map<std::string, int> counts, train_counts;
  for (const auto& e : bank) {
    counts[to_string(e.audiogram.category)]++;
    if (e.train_split) train_counts[to_string(e.audiogram.category)]++;
    REQUIRE(classify_audiogram(e.audiogram) == e.audiogram.category);
  }
  for (auto c : kAllCategories) {
    REQUIRE(counts[to_string(c)] == 50);
    REQUIRE(train_counts[to_string(c)] == 40);
  }

  auto path = (std::filesystem::temp_directory_path() / "haaqi_bank.csv").string();
  write_audiogram_csv(path, bank);
  std::ifstream f1(path);
  std::string first((std::istreambuf_iterator<char>(f1)),
                    std::istreambuf_iterator<char>());
  auto bank2 = generate_audiogram_bank(1234);
  write_audiogram_csv(path, bank2);
  std::ifstream f2(path);
  std::string second((std::istreambuf_iterator<char>(f2)),
                     std::istreambuf_iterator<char>());
  REQUIRE(first == second);

  auto loaded = read_audiogram_csv(path);
  REQUIRE(loaded.size() == 300);
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    REQUIRE(loaded[i].id == bank[i].id);
    REQUIRE(loaded[i].train_split == bank[i].train_split);
    for (int k = 0; k < 8; ++k)
      REQUIRE(loaded[i].audiogram.thresholds[std::size_t(k)] ==
              bank[i].audiogram.thresholds[std::size_t(k)]);
  }
  std::remove(path.c_str());
}
