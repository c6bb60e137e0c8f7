#pragma once

#include <cstdlib>
#include <fstream>
#include <string>

#include <json.hpp>

#include "haaqinet/distill.hpp"
#include "haaqinet/encoder.hpp"
#include "haaqinet/model.hpp"

namespace haaqi {

// Resolved run configuration. Every subcommand writes the full snapshot into
// its run directory so a run can be reproduced from the directory alone.
struct RunConfig {
  std::uint64_t seed = 0;
  bool seed_set = false;

  // corpus
  std::string clean_dir;
  int conditions_per_clip = 3;
  int audiograms_per_clip = 1;
  bool exhaustive = false;
  double test_clip_fraction = 0.2;
  double valid_clip_fraction = 0.2;
  std::string condition_bank_path;   // empty = built-in default bank
  std::string audiogram_bank_path;   // empty = generate from seed
  int audiograms_per_category = 50;
  int audiogram_train_per_category = 40;

  // models
  EncoderConfig encoder;
  PredictorConfig predictor;
  StudentConfig student;
  std::string features = "encoder-ws";  // encoder-ws | encoder-last |
                                        // encoder-winavg | spectrogram
  int winavg_k = 3;
  bool distill_transfer_init = true;
  bool distill_adaptive = true;

  TrainConfig train;
  TrainConfig distill_train;
};

namespace detail {

inline void apply_train_json(TrainConfig& t, const nlohmann::json& j) {
  if (j.contains("lr")) t.lr = j.at("lr").get<double>();
  if (j.contains("batch_size")) t.batch_size = j.at("batch_size").get<int>();
  if (j.contains("max_epochs")) t.max_epochs = j.at("max_epochs").get<int>();
  if (j.contains("max_steps")) t.max_steps = j.at("max_steps").get<int>();
  if (j.contains("patience")) t.patience = j.at("patience").get<int>();
  if (j.contains("min_delta")) t.min_delta = j.at("min_delta").get<double>();
}

inline nlohmann::json train_to_json(const TrainConfig& t) {
  return {{"lr", t.lr},
          {"batch_size", t.batch_size},
          {"max_epochs", t.max_epochs},
          {"max_steps", t.max_steps},
          {"patience", t.patience},
          {"min_delta", t.min_delta}};
}

}  // namespace detail

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  c.distill_train.lr = 1e-3;  // distillation default
  if (j.contains("seed")) {
    c.seed = j.at("seed").get<std::uint64_t>();
    c.seed_set = true;
  }
  if (j.contains("corpus")) {
    const auto& k = j.at("corpus");
    if (k.contains("clean_dir")) c.clean_dir = k.at("clean_dir").get<std::string>();
    if (k.contains("conditions_per_clip"))
      c.conditions_per_clip = k.at("conditions_per_clip").get<int>();
    if (k.contains("audiograms_per_clip"))
      c.audiograms_per_clip = k.at("audiograms_per_clip").get<int>();
    if (k.contains("exhaustive")) c.exhaustive = k.at("exhaustive").get<bool>();
    if (k.contains("test_clip_fraction"))
      c.test_clip_fraction = k.at("test_clip_fraction").get<double>();
    if (k.contains("valid_clip_fraction"))
      c.valid_clip_fraction = k.at("valid_clip_fraction").get<double>();
    if (k.contains("condition_bank") && !k.at("condition_bank").is_null())
      c.condition_bank_path = k.at("condition_bank").get<std::string>();
    if (k.contains("audiogram_bank") && !k.at("audiogram_bank").is_null())
      c.audiogram_bank_path = k.at("audiogram_bank").get<std::string>();
    if (k.contains("audiograms_per_category"))
      c.audiograms_per_category = k.at("audiograms_per_category").get<int>();
    if (k.contains("audiogram_train_per_category"))
      c.audiogram_train_per_category =
          k.at("audiogram_train_per_category").get<int>();
  }
  if (j.contains("encoder")) c.encoder = encoder_config_from_json(j.at("encoder"));
  if (j.contains("predictor"))
    c.predictor = predictor_config_from_json(j.at("predictor"));
  if (j.contains("student")) c.student = student_config_from_json(j.at("student"));
  if (j.contains("features")) c.features = j.at("features").get<std::string>();
  if (j.contains("winavg_k")) c.winavg_k = j.at("winavg_k").get<int>();
  if (j.contains("distill_transfer_init"))
    c.distill_transfer_init = j.at("distill_transfer_init").get<bool>();
  if (j.contains("distill_adaptive"))
    c.distill_adaptive = j.at("distill_adaptive").get<bool>();
  if (j.contains("train")) detail::apply_train_json(c.train, j.at("train"));
  if (j.contains("distill_train"))
    detail::apply_train_json(c.distill_train, j.at("distill_train"));
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  require(bool(f), "config: cannot open " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error("config: bad JSON in " + path + ": " + e.what());
  }
  return run_config_from_json(j);
}

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["seed"] = c.seed;
  j["corpus"] = {{"clean_dir", c.clean_dir},
                 {"conditions_per_clip", c.conditions_per_clip},
                 {"audiograms_per_clip", c.audiograms_per_clip},
                 {"exhaustive", c.exhaustive},
                 {"test_clip_fraction", c.test_clip_fraction},
                 {"valid_clip_fraction", c.valid_clip_fraction},
                 {"condition_bank", c.condition_bank_path.empty()
                                        ? nlohmann::json(nullptr)
                                        : nlohmann::json(c.condition_bank_path)},
                 {"audiogram_bank", c.audiogram_bank_path.empty()
                                        ? nlohmann::json(nullptr)
                                        : nlohmann::json(c.audiogram_bank_path)},
                 {"audiograms_per_category", c.audiograms_per_category},
                 {"audiogram_train_per_category", c.audiogram_train_per_category}};
  j["encoder"] = to_json(c.encoder);
  j["predictor"] = to_json(c.predictor);
  j["student"] = to_json(c.student);
  j["features"] = c.features;
  j["winavg_k"] = c.winavg_k;
  j["distill_transfer_init"] = c.distill_transfer_init;
  j["distill_adaptive"] = c.distill_adaptive;
  j["train"] = detail::train_to_json(c.train);
  j["distill_train"] = detail::train_to_json(c.distill_train);
  return j;
}

}  // namespace haaqi
