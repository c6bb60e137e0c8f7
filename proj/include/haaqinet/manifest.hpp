#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "haaqinet/common.hpp"

namespace haaqi {

inline const std::vector<std::string>& manifest_splits() {
  static const std::vector<std::string> splits = {"train", "valid", "test-seen",
                                                  "test-unseen"};
  return splits;
}

struct ManifestRow {
  std::string clip_id;
  std::string audio_path;
  std::string genre;
  std::string condition_id;
  std::string audiogram_id;
  std::string split;
  std::optional<double> true_score;
};

inline void validate(const ManifestRow& r) {
  require(!r.clip_id.empty(), "manifest: empty clip_id");
  bool ok = false;
  for (const auto& s : manifest_splits()) ok = ok || s == r.split;
  require(ok, "manifest: unknown split '" + r.split + "' for " + r.clip_id);
  if (r.true_score)
    require(*r.true_score >= 0.0 && *r.true_score <= 1.0,
            "manifest: score outside [0,1] for " + r.clip_id);
}

inline nlohmann::json to_json(const ManifestRow& r) {
  nlohmann::json j;
  j["clip_id"] = r.clip_id;
  j["audio_path"] = r.audio_path;
  j["genre"] = r.genre;
  j["condition_id"] = r.condition_id;
  j["audiogram_id"] = r.audiogram_id;
  j["split"] = r.split;
  if (r.true_score)
    j["true_score"] = *r.true_score;
  else
    j["true_score"] = nullptr;
  return j;
}

inline ManifestRow manifest_row_from_json(const nlohmann::json& j) {
  ManifestRow r;
  r.clip_id = j.at("clip_id").get<std::string>();
  r.audio_path = j.at("audio_path").get<std::string>();
  r.genre = j.value("genre", "");
  r.condition_id = j.value("condition_id", "");
  r.audiogram_id = j.value("audiogram_id", "");
  r.split = j.at("split").get<std::string>();
  if (j.contains("true_score") && !j.at("true_score").is_null())
    r.true_score = j.at("true_score").get<double>();
  validate(r);
  return r;
}

// JSON-lines, one row per record.
inline void write_manifest(const std::string& path,
                           const std::vector<ManifestRow>& rows) {
  std::ofstream f(path, std::ios::trunc);
  require(bool(f), "manifest: cannot write " + path);
  for (const auto& r : rows) f << to_json(r).dump() << "\n";
  require(bool(f), "manifest: short write " + path);
}

inline std::vector<ManifestRow> read_manifest(const std::string& path) {
  std::ifstream f(path);
  require(bool(f), "manifest: cannot open " + path);
  std::vector<ManifestRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      rows.push_back(manifest_row_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error("manifest: bad JSON at " + path + ":" +
                  std::to_string(lineno) + ": " + e.what());
    }
  }
  require(!rows.empty(), "manifest: no rows in " + path);
  return rows;
}

// Scores sidecar: CSV `clip_id,score`.
inline std::vector<std::pair<std::string, double>> read_scores_csv(
    const std::string& path) {
  std::ifstream f(path);
  require(bool(f), "scores: cannot open " + path);
  std::vector<std::pair<std::string, double>> out;
  std::string line;
  bool first = true;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (first && line.rfind("clip_id", 0) == 0) {
      first = false;
      continue;
    }
    first = false;
    auto comma = line.find(',');
    require(comma != std::string::npos, "scores: bad row '" + line + "'");
    out.emplace_back(line.substr(0, comma), std::stod(line.substr(comma + 1)));
  }
  require(!out.empty(), "scores: no rows in " + path);
  return out;
}

inline void write_scores_csv(
    const std::string& path,
    const std::vector<std::pair<std::string, double>>& scores) {
  std::ofstream f(path, std::ios::trunc);
  require(bool(f), "scores: cannot write " + path);
  f << "clip_id,score\n";
  for (const auto& [id, s] : scores) f << id << "," << s << "\n";
}

}  // namespace haaqi
