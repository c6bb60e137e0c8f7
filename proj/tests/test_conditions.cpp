#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "haaqinet/conditions.hpp"

using namespace haaqi;

namespace {
Waveform clip(std::uint64_t seed) {
  Waveform w;
  w.sample_rate = 16000;
  w.samples.resize(16000);
  Rng rng(seed);
  for (auto& v : w.samples) v = 0.15 * rng.gaussian();
  return w;
}
}  // namespace

TEST_CASE("default bank enumerates exactly 32 + 32 + 36 = 100 conditions") {
  auto bank = default_condition_bank();
  REQUIRE(bank.size() == 100);
  int nn = 0, lf = 0, cm = 0, unseen = 0;
  std::set<std::string> ids;
  for (const auto& c : bank) {
    ids.insert(c.id);
    if (c.group == "noise-nonlinear") ++nn;
    if (c.group == "linear-filter") ++lf;
    if (c.group == "combined") ++cm;
    if (c.unseen) ++unseen;
    REQUIRE(!c.stages.empty());
  }
  REQUIRE(ids.size() == 100);
  REQUIRE(nn == 32);
  REQUIRE(lf == 32);
  REQUIRE(cm == 36);
  REQUIRE(unseen == 18);
}

TEST_CASE("single-stage condition equals the stage operation") {
  auto w = clip(1);
  ProcessingCondition c;
  c.id = "test-clip";
  Stage s;
  s.kind = Stage::Kind::kPeakClip;
  s.clip_threshold = 0.4;
  c.stages = {s};
  auto via_condition = apply_condition(w, c, 7);
  auto direct = peak_clip(w, 0.4);
  REQUIRE(via_condition.samples == direct.samples);
}

TEST_CASE("stages compose left to right, sample-exact") {
  auto w = clip(2);
  ProcessingCondition c;
  c.id = "test-babble-wdrc";
  Stage noise;
  noise.kind = Stage::Kind::kAddNoise;
  noise.noise_kind = NoiseKind::kBabble;
  noise.snr_db = 6.0;
  Stage comp;
  comp.kind = Stage::Kind::kWdrc;
  c.stages = {noise, comp};

  auto composed = apply_condition(w, c, 11);
  auto manual = wdrc(
      add_noise(w, NoiseKind::kBabble, 6.0, derive_seed(11, c.id + "/stage0")),
      WdrcConfig{});
  REQUIRE(composed.samples == manual.samples);
}

TEST_CASE("apply_condition is bit-deterministic for a fixed seed") {
  auto w = clip(3);
  auto bank = default_condition_bank();
  // A noise-bearing condition is the interesting case.
  const ProcessingCondition* noisy = nullptr;
  for (const auto& c : bank)
    if (c.id.find("babble") != std::string::npos) {
      noisy = &c;
      break;
    }
  REQUIRE(noisy != nullptr);
  auto a = apply_condition(w, *noisy, 123);
  auto b = apply_condition(w, *noisy, 123);
  REQUIRE(a.samples == b.samples);
  auto c2 = apply_condition(w, *noisy, 124);
  REQUIRE(a.samples != c2.samples);
}

TEST_CASE("condition bank JSON round trip") {
  auto bank = default_condition_bank();
  auto j = to_json(bank);
  auto back = bank_from_json(j);
  REQUIRE(back.size() == bank.size());
  auto w = clip(4);
  // Spot-check a few conditions end to end through the serialized form.
  for (std::size_t idx : {std::size_t(0), std::size_t(40), std::size_t(95)}) {
    auto a = apply_condition(w, bank[idx], 5);
    auto b = apply_condition(w, back[idx], 5);
    REQUIRE(bank[idx].id == back[idx].id);
    REQUIRE(bank[idx].unseen == back[idx].unseen);
    REQUIRE(a.samples == b.samples);
  }
}

TEST_CASE("empty stage list is rejected") {
  ProcessingCondition c;
  c.id = "empty";
  REQUIRE_THROWS_AS(apply_condition(clip(5), c, 1), Error);
}
