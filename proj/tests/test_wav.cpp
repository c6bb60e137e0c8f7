#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "haaqinet/wav.hpp"

using namespace haaqi;

namespace {
std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}
}  // namespace

TEST_CASE("wav round trip at 16 kHz") {
  Waveform w;
  w.sample_rate = 16000;
  Rng rng(11);
  w.samples.resize(1600);
  for (auto& v : w.samples) v = rng.uniform(-0.9, 0.9);
  auto path = temp_path("haaqi_test_rt.wav");
  write_wav(path, w);
  Waveform r = read_wav(path);
  REQUIRE(r.sample_rate == 16000);
  REQUIRE(r.samples.size() == w.samples.size());
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    REQUIRE(r.samples[i] == Catch::Approx(w.samples[i]).margin(1.0 / 32768.0));
  std::remove(path.c_str());
}

TEST_CASE("32 kHz input is resampled to 16 kHz on read") {
  Waveform w;
  w.sample_rate = 32000;
  w.samples.resize(32000);
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    w.samples[i] = 0.5 * std::sin(2.0 * M_PI * 1000.0 * double(i) / 32000.0);
  auto path = temp_path("haaqi_test_32k.wav");
  write_wav(path, w);
  Waveform r = read_wav(path);
  REQUIRE(r.sample_rate == 16000);
  REQUIRE(r.samples.size() == w.samples.size() / 2);
  // The 1 kHz tone must survive decimation with its amplitude intact.
  double peak = 0;
  for (std::size_t i = r.samples.size() / 4; i < 3 * r.samples.size() / 4; ++i)
    peak = std::max(peak, std::abs(r.samples[i]));
  REQUIRE(peak == Catch::Approx(0.5).margin(0.02));
  std::remove(path.c_str());
}

TEST_CASE("wav rejects garbage") {
  auto path = temp_path("haaqi_test_bad.wav");
  {
    std::ofstream f(path, std::ios::binary);
    f << "definitely not a wav file";
  }
  REQUIRE_THROWS_AS(read_wav(path), Error);
  std::remove(path.c_str());
}
