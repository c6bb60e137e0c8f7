#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "haaqinet/manifest.hpp"

using namespace haaqi;

TEST_CASE("manifest round trip is lossless") {
  std::vector<ManifestRow> rows;
  for (int i = 0; i < 5; ++i) {
    ManifestRow r;
    r.clip_id = "clip" + std::to_string(i);
    r.audio_path = "/tmp/a" + std::to_string(i) + ".wav";
    r.genre = i % 2 ? "rock" : "classical";
    r.condition_id = "nn0" + std::to_string(i) + "-x";
    r.audiogram_id = "flat-0" + std::to_string(i);
    r.split = manifest_splits()[std::size_t(i % 4)];
    if (i != 2) r.true_score = 0.15 * i;
    rows.push_back(r);
  }
  auto path =
      (std::filesystem::temp_directory_path() / "haaqi_manifest.jsonl").string();
  write_manifest(path, rows);
  auto back = read_manifest(path);
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    REQUIRE(back[i].clip_id == rows[i].clip_id);
    REQUIRE(back[i].audio_path == rows[i].audio_path);
    REQUIRE(back[i].genre == rows[i].genre);
    REQUIRE(back[i].condition_id == rows[i].condition_id);
    REQUIRE(back[i].audiogram_id == rows[i].audiogram_id);
    REQUIRE(back[i].split == rows[i].split);
    REQUIRE(back[i].true_score.has_value() == rows[i].true_score.has_value());
    if (rows[i].true_score)
      REQUIRE(*back[i].true_score == *rows[i].true_score);
  }
  std::remove(path.c_str());
}

TEST_CASE("manifest rejects bad splits and out-of-range scores") {
  ManifestRow r;
  r.clip_id = "x";
  r.audio_path = "/tmp/x.wav";
  r.split = "holdout";
  REQUIRE_THROWS_AS(validate(r), Error);
  r.split = "train";
  r.true_score = 1.5;
  REQUIRE_THROWS_AS(validate(r), Error);
  r.true_score = 0.5;
  validate(r);
}

TEST_CASE("scores csv round trip") {
  std::vector<std::pair<std::string, double>> scores = {
      {"a", 0.25}, {"b", 0.5}, {"c", 1.0}};
  auto path =
      (std::filesystem::temp_directory_path() / "haaqi_scores.csv").string();
  write_scores_csv(path, scores);
  auto back = read_scores_csv(path);
  REQUIRE(back == scores);
  std::remove(path.c_str());
}
