#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "haaqinet/config.hpp"
#include "haaqinet/corpus.hpp"
#include "haaqinet/distill.hpp"
#include "haaqinet/eval.hpp"
#include "haaqinet/manifest.hpp"

namespace haaqi::cli {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Run directories: immutable once complete; reruns go to fresh directories.
// Relative --out paths resolve against $HAAQINET_RUN_ROOT when it is set.
// ---------------------------------------------------------------------------

inline fs::path resolve_out_dir(const std::string& out) {
  fs::path p(out);
  const char* root = std::getenv("HAAQINET_RUN_ROOT");
  if (p.is_relative() && root && *root) p = fs::path(root) / p;
  return p;
}

inline fs::path prepare_run_dir(const std::string& out) {
  fs::path dir = resolve_out_dir(out);
  if (fs::exists(dir)) {
    require(!fs::exists(dir / ".complete"),
            "run dir " + dir.string() +
                " already holds a completed run; pick a new directory");
    require(fs::is_directory(dir) && fs::is_empty(dir),
            "run dir " + dir.string() + " exists and is not empty");
  }
  fs::create_directories(dir);
  return dir;
}

inline void finish_run_dir(const fs::path& dir) {
  std::ofstream f(dir / ".complete");
  f << "ok\n";
}

inline void write_config_snapshot(const fs::path& dir, const RunConfig& cfg,
                                  const std::string& command) {
  nlohmann::json j = to_json(cfg);
  j["command"] = command;
  std::ofstream f(dir / "config.json", std::ios::trunc);
  require(bool(f), "cannot write config snapshot");
  f << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Teacher encoder container
// ---------------------------------------------------------------------------

struct TeacherEncoder {
  ad::ParamStore params;
  Encoder encoder;
  std::uint64_t seed = 0;
};

inline std::unique_ptr<TeacherEncoder> make_teacher(const EncoderConfig& cfg,
                                                    std::uint64_t seed) {
  auto t = std::make_unique<TeacherEncoder>();
  t->encoder = Encoder::create(t->params, cfg, seed, "enc");
  t->seed = seed;
  return t;
}

inline void save_teacher(const std::string& path, const TeacherEncoder& t) {
  nlohmann::json meta;
  meta["kind"] = "encoder";
  meta["config"] = to_json(t.encoder.cfg);
  meta["seed"] = t.seed;
  save_weights(path, meta, t.params);
}

inline std::unique_ptr<TeacherEncoder> load_teacher(const std::string& path) {
  LoadedWeights w = load_weights(path);
  require(w.meta.at("kind") == "encoder", "teacher: wrong weights kind");
  auto t = make_teacher(encoder_config_from_json(w.meta.at("config")),
                        w.meta.value("seed", std::uint64_t(0)));
  restore_params(t->params, w);
  return t;
}

// ---------------------------------------------------------------------------
// Feature pipeline shared by train / eval / sweep / bench
// ---------------------------------------------------------------------------

struct FeaturePipeline {
  std::string mode = "encoder-ws";
  int winavg_k = 3;
  std::unique_ptr<TeacherEncoder> teacher;  // encoder modes only

  bool uses_encoder() const { return mode.rfind("encoder", 0) == 0; }

  FeatureKind model_kind() const {
    if (mode == "encoder-ws") return FeatureKind::kEncoderWsAdapter;
    if (mode == "encoder-last") return FeatureKind::kEncoderLastAdapter;
    if (mode == "encoder-winavg" || mode == "spectrogram")
      return FeatureKind::kDirect;
    throw Error("unknown feature mode '" + mode + "'");
  }

  // Layer list consumed by QualityModel::build_frames.
  std::vector<Mat> features_for(const Waveform& w) {
    if (mode == "spectrogram") return {spectrogram(w)};
    require(teacher != nullptr, "feature pipeline: missing teacher encoder");
    FbankConfig fb;
    fb.mel_bins = teacher->encoder.cfg.mel_bins;
    FeatureMatrix fbank = prep_fbank(w, fb);
    auto lo = encoder_forward(fbank, teacher->encoder, teacher->params);
    if (mode == "encoder-ws") return lo.layers;
    if (mode == "encoder-last") return {lo.layers.back()};
    if (mode == "encoder-winavg")
      return {window_average(lo.layers.back(), winavg_k)};
    throw Error("unknown feature mode '" + mode + "'");
  }
};

inline FeaturePipeline make_pipeline(const RunConfig& cfg) {
  FeaturePipeline p;
  p.mode = cfg.features;
  p.winavg_k = cfg.winavg_k;
  if (p.uses_encoder()) p.teacher = make_teacher(cfg.encoder, cfg.seed);
  (void)p.model_kind();  // validates the mode string
  return p;
}

// Expected predictor feature width for a pipeline.
inline int pipeline_feature_dim(const RunConfig& cfg) {
  if (cfg.features == "spectrogram") return 257;
  if (cfg.features == "encoder-winavg") return cfg.encoder.model_dim / cfg.winavg_k;
  return cfg.predictor.feature_dim;  // adapter output width
}

// ---------------------------------------------------------------------------
// Manifest-adjacent lookups
// ---------------------------------------------------------------------------

struct AudiogramLookup {
  std::map<std::string, const AudiogramBankEntry*> by_id;
  std::vector<AudiogramBankEntry> storage;

  static AudiogramLookup load(const std::string& csv_path) {
    AudiogramLookup l;
    l.storage = read_audiogram_csv(csv_path);
    for (const auto& e : l.storage) l.by_id[e.id] = &e;
    return l;
  }

  const AudiogramBankEntry& at(const std::string& id) const {
    auto it = by_id.find(id);
    require(it != by_id.end(), "unknown audiogram id '" + id + "'");
    return *it->second;
  }
};

inline std::string sibling(const std::string& file_path, const char* name) {
  return (fs::path(file_path).parent_path() / name).string();
}

// Corpus manifests store audio paths relative to their own directory so that
// rebuilds are byte-identical; resolve them on read.
inline std::vector<ManifestRow> read_manifest_resolved(const std::string& path) {
  auto rows = read_manifest(path);
  fs::path base = fs::path(path).parent_path();
  for (auto& r : rows) {
    fs::path p(r.audio_path);
    if (p.is_relative()) r.audio_path = (base / p).string();
  }
  return rows;
}

inline std::string resolve_audiogram_csv(const std::string& manifest_path,
                                         const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  std::string guess = sibling(manifest_path, "audiograms.csv");
  require(fs::exists(guess),
          "cannot find audiograms.csv next to the manifest; pass --audiograms");
  return guess;
}

// ---------------------------------------------------------------------------
// Subcommand implementations
// ---------------------------------------------------------------------------

inline int cmd_corpus_audiograms(const RunConfig& cfg, const std::string& out) {
  fs::path dir = prepare_run_dir(out);
  auto bank = generate_audiogram_bank(cfg.seed, cfg.audiograms_per_category,
                                      cfg.audiogram_train_per_category);
  write_audiogram_csv((dir / "audiograms.csv").string(), bank);
  write_config_snapshot(dir, cfg, "corpus audiograms");
  finish_run_dir(dir);
  std::cout << "wrote " << bank.size() << " audiogram patterns to "
            << (dir / "audiograms.csv").string() << "\n";
  return 0;
}

inline int cmd_corpus_build(const RunConfig& cfg, const std::string& out,
                            int jobs) {
  require(!cfg.clean_dir.empty(), "config: corpus.clean_dir is required");
  require(fs::exists(cfg.clean_dir),
          "config: corpus.clean_dir does not exist: " + cfg.clean_dir);
  fs::path dir = prepare_run_dir(out);

  auto bank = cfg.condition_bank_path.empty()
                  ? default_condition_bank()
                  : [&]() {
                      std::ifstream f(cfg.condition_bank_path);
                      require(bool(f), "cannot open condition bank " +
                                           cfg.condition_bank_path);
                      nlohmann::json j;
                      f >> j;
                      return bank_from_json(j);
                    }();
  auto audiograms =
      cfg.audiogram_bank_path.empty()
          ? generate_audiogram_bank(cfg.seed, cfg.audiograms_per_category,
                                    cfg.audiogram_train_per_category)
          : read_audiogram_csv(cfg.audiogram_bank_path,
                               cfg.audiogram_train_per_category);

  CorpusConfig cc;
  cc.master_seed = cfg.seed;
  cc.conditions_per_clip = cfg.conditions_per_clip;
  cc.audiograms_per_clip = cfg.audiograms_per_clip;
  cc.exhaustive = cfg.exhaustive;
  cc.test_clip_fraction = cfg.test_clip_fraction;
  cc.valid_clip_fraction = cfg.valid_clip_fraction;

  auto clips = scan_clean_dir(cfg.clean_dir);
  auto result = corpus_build(cc, clips, bank, audiograms, dir.string(), jobs);

  write_manifest((dir / "manifest.jsonl").string(), result.manifest);
  write_audiogram_csv((dir / "audiograms.csv").string(), audiograms);
  {
    std::ofstream f(dir / "conditions.json", std::ios::trunc);
    f << to_json(bank).dump(2) << "\n";
  }
  {
    nlohmann::json j(result.sources);
    std::ofstream f(dir / "sources.json", std::ios::trunc);
    f << j.dump(2) << "\n";
  }
  write_config_snapshot(dir, cfg, "corpus build");
  finish_run_dir(dir);
  std::cout << "built " << result.manifest.size() << " rows from "
            << clips.size() << " clean clips in " << dir.string() << "\n";
  return 0;
}

inline int cmd_label(const RunConfig& cfg, const std::string& manifest_path,
                     const std::string& provider_name,
                     const std::string& scores_path,
                     const std::string& sources_path, const std::string& out) {
  auto manifest = read_manifest_resolved(manifest_path);
  fs::path dir = prepare_run_dir(out);

  LabelProvider provider;
  if (provider_name == "proxy-oracle" || provider_name == "proxy")
    provider = LabelProvider::kProxyOracle;
  else if (provider_name == "csv-import" || provider_name == "csv")
    provider = LabelProvider::kCsvImport;
  else
    throw Error("unknown label provider '" + provider_name + "'");

  std::vector<ManifestRow> labeled;
  if (provider == LabelProvider::kCsvImport) {
    require(!scores_path.empty(), "label: --scores is required for csv-import");
    labeled = label_scores(manifest, provider, {}, read_scores_csv(scores_path));
  } else {
    std::string sources_file = sources_path.empty()
                                   ? sibling(manifest_path, "sources.json")
                                   : sources_path;
    require(fs::exists(sources_file),
            "label: cannot find sources.json next to the manifest; "
            "pass --sources");
    std::ifstream f(sources_file);
    nlohmann::json j;
    f >> j;
    std::map<std::string, std::string> sources =
        j.get<std::map<std::string, std::string>>();
    labeled = label_scores(manifest, provider, sources);
  }

  write_manifest((dir / "manifest.jsonl").string(), labeled);
  std::vector<std::pair<std::string, double>> scores;
  for (const auto& r : labeled) scores.emplace_back(r.clip_id, *r.true_score);
  write_scores_csv((dir / "scores.csv").string(), scores);
  // Carry the sidecar files downstream runs need.
  for (const char* name : {"audiograms.csv", "sources.json", "conditions.json"}) {
    std::string src = sibling(manifest_path, name);
    if (fs::exists(src)) fs::copy_file(src, dir / name);
  }
  write_config_snapshot(dir, cfg, "label");
  finish_run_dir(dir);
  std::cout << "labeled " << labeled.size() << " rows into " << dir.string()
            << "\n";
  return 0;
}

// Assemble examples for the trainable pipeline from labeled manifest rows.
inline std::vector<LabeledExample> build_examples(
    const std::vector<ManifestRow>& rows, FeaturePipeline& pipeline,
    const AudiogramLookup& audiograms) {
  std::vector<LabeledExample> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    require(r.true_score.has_value(), "row " + r.clip_id + " has no score");
    LabeledExample ex;
    ex.id = r.clip_id;
    Waveform w = read_wav(r.audio_path);
    ex.layers = pipeline.features_for(w);
    ex.hl_db = audiograms.at(r.audiogram_id).audiogram.thresholds;
    ex.target = *r.true_score;
    out.push_back(std::move(ex));
  }
  return out;
}

inline int cmd_train(RunConfig cfg, const std::string& manifest_path,
                     const std::string& audiogram_flag,
                     const std::string& warm_start_path,
                     const std::string& out) {
  auto manifest = read_manifest_resolved(manifest_path);
  auto audiograms = AudiogramLookup::load(
      resolve_audiogram_csv(manifest_path, audiogram_flag));
  fs::path dir = prepare_run_dir(out);

  FeaturePipeline pipeline = make_pipeline(cfg);
  cfg.predictor.feature_dim = pipeline_feature_dim(cfg);

  std::vector<ManifestRow> train_rows, valid_rows;
  for (const auto& r : manifest) {
    if (r.split == "train") train_rows.push_back(r);
    if (r.split == "valid") valid_rows.push_back(r);
  }
  require(!train_rows.empty(), "train: manifest has no train rows");
  if (valid_rows.empty()) {
    // Deterministic 80/20 split when the manifest has no valid rows.
    std::vector<std::size_t> order(train_rows.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(cfg.seed, "train/valid-split"));
    rng.shuffle(order);
    std::size_t n_valid = train_rows.size() / 5;
    std::vector<ManifestRow> t, v;
    for (std::size_t i = 0; i < order.size(); ++i)
      (i < n_valid ? v : t).push_back(train_rows[order[i]]);
    train_rows = std::move(t);
    valid_rows = std::move(v);
  }

  auto train_set = build_examples(train_rows, pipeline, audiograms);
  auto valid_set = build_examples(valid_rows, pipeline, audiograms);

  QualityModelConfig mc;
  mc.kind = pipeline.model_kind();
  mc.encoder_layers = cfg.encoder.num_layers;
  mc.encoder_dim = cfg.encoder.model_dim;
  mc.predictor = cfg.predictor;
  auto model = QualityModel::create(mc, cfg.seed);
  if (!warm_start_path.empty()) {
    auto warm = load_quality_model(warm_start_path);
    require(warm.params.size() == model.params.size(),
            "train: warm-start weights do not match the configured model");
    restore_snapshot(model.params, snapshot_params(warm.params));
  }

  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  auto report = train_quality_model(model, train_set, valid_set, tc);

  nlohmann::json extra;
  extra["features"] = cfg.features;
  extra["winavg_k"] = cfg.winavg_k;
  extra["teacher_seed"] = cfg.seed;
  if (pipeline.uses_encoder()) {
    extra["encoder"] = to_json(cfg.encoder);
    save_teacher((dir / "teacher_encoder.bin").string(), *pipeline.teacher);
  }
  save_quality_model((dir / "model.bin").string(), model, extra);

  {
    std::ofstream f(dir / "train_log.csv", std::ios::trunc);
    f << "step,train_loss\n";
    f << std::setprecision(12);
    for (std::size_t i = 0; i < report.step_losses.size(); ++i)
      f << i << "," << report.step_losses[i] << "\n";
  }
  {
    std::ofstream f(dir / "valid_log.csv", std::ios::trunc);
    f << "epoch,valid_loss\n";
    f << std::setprecision(12);
    for (std::size_t i = 0; i < report.epoch_valid_losses.size(); ++i)
      f << i << "," << report.epoch_valid_losses[i] << "\n";
  }
  write_config_snapshot(dir, cfg, "train");
  finish_run_dir(dir);
  std::cout << "trained " << report.steps << " steps over " << report.epochs
            << " epochs; final train loss " << report.final_train_loss
            << (std::isfinite(report.best_valid_loss)
                    ? ", best valid loss " + std::to_string(report.best_valid_loss)
                    : std::string())
            << "\n";
  return 0;
}

inline int cmd_distill(RunConfig cfg, const std::string& manifest_path,
                       const std::string& audiogram_flag,
                       const std::string& teacher_run, const std::string& out) {
  auto manifest = read_manifest_resolved(manifest_path);
  auto audiograms = AudiogramLookup::load(
      resolve_audiogram_csv(manifest_path, audiogram_flag));

  std::string teacher_enc_path =
      (fs::path(teacher_run) / "teacher_encoder.bin").string();
  std::string model_path = (fs::path(teacher_run) / "model.bin").string();
  require(fs::exists(teacher_enc_path),
          "distill: missing teacher_encoder.bin in " + teacher_run);
  require(fs::exists(model_path), "distill: missing model.bin in " + teacher_run);
  auto teacher = load_teacher(teacher_enc_path);
  auto qm = load_quality_model(model_path);
  require(qm.cfg.kind != FeatureKind::kDirect,
          "distill: teacher model must use encoder features");

  fs::path dir = prepare_run_dir(out);
  validate(cfg.student, teacher->encoder.cfg);

  // Distillation examples from the train/valid rows.
  std::vector<DistillExample> train_set, heldout;
  FbankConfig fb;
  fb.mel_bins = teacher->encoder.cfg.mel_bins;
  for (const auto& r : manifest) {
    if (r.split != "train" && r.split != "valid") continue;
    require(r.true_score.has_value(), "row " + r.clip_id + " has no score");
    DistillExample ex;
    ex.id = r.clip_id;
    Waveform w = read_wav(r.audio_path);
    FeatureMatrix fbank = prep_fbank(w, fb);
    ex.tokens = patchify(fbank, teacher->encoder.cfg);
    auto lo = encoder_forward(fbank, teacher->encoder, teacher->params);
    for (int tap : cfg.student.tapped_teacher_layers)
      ex.teacher_taps.push_back(lo.layers[std::size_t(tap - 1)]);
    ex.hl_db = audiograms.at(r.audiogram_id).audiogram.thresholds;
    ex.target = *r.true_score;
    (r.split == "train" ? train_set : heldout).push_back(std::move(ex));
  }
  require(!train_set.empty(), "distill: no train rows");

  Student student =
      cfg.distill_transfer_init
          ? transfer_init(teacher->encoder, teacher->params, cfg.student,
                          cfg.seed)
          : random_init_student(teacher->encoder.cfg, cfg.student, cfg.seed);

  TrainConfig tc = cfg.distill_train;
  tc.seed = cfg.seed;
  auto report =
      distill_train(student, qm, train_set, heldout, tc, cfg.distill_adaptive);

  save_student((dir / "student.bin").string(), student);
  save_quality_model((dir / "quality_head.bin").string(), qm);
  {
    std::ofstream f(dir / "distill_report.csv", std::ios::trunc);
    f << "step,L_qual,L_distil";
    for (int tap : cfg.student.tapped_teacher_layers) f << ",cos" << tap;
    f << ",mean_d\n";
    f << std::setprecision(12);
    for (const auto& row : report.rows) {
      f << row.step << "," << row.l_qual << "," << row.l_distil;
      for (double c : row.mean_cos) f << "," << c;
      f << "," << row.mean_d << "\n";
    }
  }
  if (!report.final_heldout_cos.empty()) {
    std::ofstream f(dir / "heldout_similarity.csv", std::ios::trunc);
    f << "tap,cosine\n";
    for (std::size_t i = 0; i < report.final_heldout_cos.size(); ++i)
      f << cfg.student.tapped_teacher_layers[i] << ","
        << report.final_heldout_cos[i] << "\n";
  }
  double ratio = double(param_coefficients(student.params)) /
                 double(param_coefficients(teacher->params));
  {
    nlohmann::json j;
    j["student_params"] = param_coefficients(student.params);
    j["teacher_params"] = param_coefficients(teacher->params);
    j["ratio"] = ratio;
    std::ofstream f(dir / "params.json", std::ios::trunc);
    f << j.dump(2) << "\n";
  }
  write_config_snapshot(dir, cfg, "distill");
  finish_run_dir(dir);
  std::cout << "distilled student (" << to_string(cfg.student.topology)
            << ", param ratio " << ratio << ") over " << report.rows.size()
            << " steps into " << dir.string() << "\n";
  return 0;
}

// Prediction closure over either the teacher pipeline or a distilled student.
struct LoadedPredictor {
  std::unique_ptr<TeacherEncoder> teacher;
  QualityModel model;
  std::optional<Student> student;
  std::string features = "encoder-ws";
  int winavg_k = 3;

  double predict(const Waveform& w, const std::array<double, 8>& hl_db) {
    if (student) {
      FbankConfig fb;
      fb.mel_bins = student->enc_cfg.mel_bins;
      return distilled_predict(*student, model, prep_fbank(w, fb), hl_db).clip_score;
    }
    FeaturePipeline p;
    p.mode = features;
    p.winavg_k = winavg_k;
    LabeledExample ex;
    if (p.uses_encoder()) {
      require(teacher != nullptr, "predict: missing teacher encoder");
      FbankConfig fb;
      fb.mel_bins = teacher->encoder.cfg.mel_bins;
      auto lo = encoder_forward(prep_fbank(w, fb), teacher->encoder,
                                teacher->params);
      if (features == "encoder-ws")
        ex.layers = lo.layers;
      else if (features == "encoder-last")
        ex.layers = {lo.layers.back()};
      else
        ex.layers = {window_average(lo.layers.back(), winavg_k)};
    } else {
      ex.layers = {spectrogram(w)};
    }
    ex.hl_db = hl_db;
    return model.predict(ex).clip_score;
  }
};

inline LoadedPredictor load_predictor(const std::string& model_path,
                                      const std::string& student_path) {
  LoadedPredictor p;
  LoadedWeights w = load_weights(model_path);
  require(w.meta.at("kind") == "quality-model", "eval: wrong model file");
  p.model = load_quality_model(model_path);
  if (w.meta.contains("extra")) {
    const auto& e = w.meta.at("extra");
    p.features = e.value("features", std::string("encoder-ws"));
    p.winavg_k = e.value("winavg_k", 3);
  }
  if (!student_path.empty()) {
    p.student.emplace(load_student(student_path));
    require(p.model.cfg.kind != FeatureKind::kDirect,
            "eval: student prediction needs an encoder-mode quality model");
  }
  bool needs_encoder = p.model.cfg.kind != FeatureKind::kDirect ||
                       p.features.rfind("encoder", 0) == 0;
  if (needs_encoder) {
    std::string enc_path = sibling(model_path, "teacher_encoder.bin");
    require(fs::exists(enc_path),
            "eval: cannot find teacher_encoder.bin next to the model");
    p.teacher = load_teacher(enc_path);
  }
  return p;
}

inline std::vector<ManifestRow> rows_for_splits(
    const std::vector<ManifestRow>& manifest, const std::string& splits_csv) {
  std::set<std::string> wanted;
  std::stringstream ss(splits_csv);
  std::string item;
  while (std::getline(ss, item, ',')) wanted.insert(item);
  std::vector<ManifestRow> rows;
  for (const auto& r : manifest)
    if (wanted.count(r.split)) rows.push_back(r);
  require(!rows.empty(), "no manifest rows in splits " + splits_csv);
  return rows;
}

inline int cmd_eval(const RunConfig& cfg, const std::string& manifest_path,
                    const std::string& audiogram_flag,
                    const std::string& model_path,
                    const std::string& student_path, const std::string& splits,
                    int quantiles, double tolerance, const std::string& out) {
  auto manifest = read_manifest_resolved(manifest_path);
  auto audiograms = AudiogramLookup::load(
      resolve_audiogram_csv(manifest_path, audiogram_flag));
  auto predictor = load_predictor(model_path, student_path);
  fs::path dir = prepare_run_dir(out);

  auto rows = rows_for_splits(manifest, splits);
  std::vector<EvalItem> items;
  std::vector<double> preds, truths;
  for (const auto& r : rows) {
    require(r.true_score.has_value(), "row " + r.clip_id + " has no score");
    const auto& aud = audiograms.at(r.audiogram_id);
    Waveform w = read_wav(r.audio_path);
    EvalItem it;
    it.clip_id = r.clip_id;
    it.genre = r.genre;
    it.condition_id = r.condition_id;
    it.audiogram_category = to_string(aud.audiogram.category);
    it.split = r.split;
    it.truth = *r.true_score;
    it.pred = predictor.predict(w, aud.audiogram.thresholds);
    preds.push_back(it.pred);
    truths.push_back(it.truth);
    items.push_back(std::move(it));
  }

  auto report = evaluate_items(items);
  write_eval_csv((dir / "eval.csv").string(), report);
  write_eval_long_csv((dir / "eval_long.csv").string(), report);
  {
    std::ofstream f(dir / "eval.json", std::ios::trunc);
    f << to_json(report).dump(2) << "\n";
  }
  {
    std::ofstream f(dir / "predictions.csv", std::ios::trunc);
    f << "clip_id,predicted_score,true_score\n";
    f << std::setprecision(12);
    for (const auto& it : items)
      f << it.clip_id << "," << it.pred << "," << it.truth << "\n";
  }
  if (int(preds.size()) >= quantiles + 1) {
    auto curve = anchor_curve(preds, truths, quantiles, tolerance);
    write_anchor_csv((dir / "anchor.csv").string(), curve);
  }
  write_config_snapshot(dir, cfg, "eval");
  finish_run_dir(dir);
  if (report.overall.defined)
    std::cout << "eval: n=" << report.total << " lcc=" << report.overall.lcc
              << " srcc=" << report.overall.srcc << " mse=" << report.overall.mse
              << "\n";
  else
    std::cout << "eval: n=" << report.total << " (metrics undefined)\n";
  return 0;
}

inline int cmd_spl_sweep(const RunConfig& cfg, const std::string& manifest_path,
                         const std::string& audiogram_flag,
                         const std::string& model_path,
                         const std::string& student_path,
                         const std::string& splits,
                         const std::vector<double>& levels, int max_clips,
                         const std::string& out) {
  auto manifest = read_manifest_resolved(manifest_path);
  auto audiograms = AudiogramLookup::load(
      resolve_audiogram_csv(manifest_path, audiogram_flag));
  auto predictor = load_predictor(model_path, student_path);
  fs::path dir = prepare_run_dir(out);

  auto rows = rows_for_splits(manifest, splits);
  if (int(rows.size()) > max_clips) rows.resize(std::size_t(max_clips));

  std::vector<Waveform> clips;
  std::vector<double> truths;
  std::vector<std::array<double, 8>> hls;
  for (const auto& r : rows) {
    require(r.true_score.has_value(), "row " + r.clip_id + " has no score");
    clips.push_back(read_wav(r.audio_path));
    truths.push_back(*r.true_score);
    hls.push_back(audiograms.at(r.audiogram_id).audiogram.thresholds);
  }

  // The sweep closure needs the per-clip hearing loss; key off an index that
  // advances with each prediction round.
  std::size_t cursor = 0;
  auto predict = [&](const Waveform& w) {
    double p = predictor.predict(w, hls[cursor % hls.size()]);
    ++cursor;
    return p;
  };
  auto report = spl_sweep(predict, clips,
                          levels.empty() ? default_spl_levels() : levels,
                          &truths);
  write_spl_sweep_csv((dir / "spl_sweep.csv").string(), report);
  {
    std::ofstream f(dir / "spl_sweep.json", std::ios::trunc);
    f << to_json(report).dump(2) << "\n";
  }
  write_config_snapshot(dir, cfg, "spl-sweep");
  finish_run_dir(dir);
  std::cout << "spl sweep over " << report.rows.size() << " levels x "
            << clips.size() << " clips into " << dir.string() << "\n";
  return 0;
}

inline int cmd_bench(const RunConfig& cfg, const std::string& manifest_path,
                     const std::string& audiogram_flag,
                     const std::string& model_path,
                     const std::string& student_path,
                     const std::string& variants_csv, int reps, int max_clips,
                     const std::string& out) {
  auto manifest = read_manifest_resolved(manifest_path);
  auto audiograms = AudiogramLookup::load(
      resolve_audiogram_csv(manifest_path, audiogram_flag));
  auto predictor = load_predictor(model_path, student_path);
  fs::path dir = prepare_run_dir(out);

  std::vector<Waveform> clips;
  std::array<double, 8> hl = audiograms.at(manifest.front().audiogram_id)
                                 .audiogram.thresholds;
  for (const auto& r : manifest) {
    clips.push_back(read_wav(r.audio_path));
    if (int(clips.size()) >= max_clips) break;
  }

  std::vector<std::string> wanted;
  {
    std::stringstream ss(variants_csv);
    std::string item;
    while (std::getline(ss, item, ',')) wanted.push_back(item);
  }

  std::vector<BenchVariant> variants;
  for (const auto& name : wanted) {
    BenchVariant v;
    v.name = name;
    if (name == "teacher") {
      require(predictor.teacher != nullptr,
              "bench: teacher variant needs an encoder-mode model");
      v.extract = [&](const Waveform& w) {
        FbankConfig fb;
        fb.mel_bins = predictor.teacher->encoder.cfg.mel_bins;
        auto lo = encoder_forward(prep_fbank(w, fb),
                                  predictor.teacher->encoder,
                                  predictor.teacher->params);
        // Adapted features are the predictor input.
        if (predictor.model.cfg.kind == FeatureKind::kEncoderWsAdapter) {
          Vec logits =
              predictor.model.params.value("fuse.logits").row(0).transpose();
          LayerOutputs cast;
          cast.layers = lo.layers;
          FeatureMatrix fused = weighted_sum(cast, logits);
          AdapterWeights aw{predictor.model.params.value("adapter.w"),
                            predictor.model.params.value("adapter.b")};
          return adapt(fused, aw);
        }
        AdapterWeights aw{predictor.model.params.value("adapter.w"),
                          predictor.model.params.value("adapter.b")};
        return adapt(lo.layers.back(), aw);
      };
    } else if (name == "student") {
      require(predictor.student.has_value(), "bench: pass --student");
      v.extract = [&](const Waveform& w) {
        FbankConfig fb;
        fb.mel_bins = predictor.student->enc_cfg.mel_bins;
        auto [preds, fused] = student_forward(*predictor.student, prep_fbank(w, fb));
        AdapterWeights aw{predictor.model.params.value("adapter.w"),
                          predictor.model.params.value("adapter.b")};
        return adapt(fused, aw);
      };
    } else if (name == "spectrogram") {
      require(predictor.model.cfg.kind == FeatureKind::kDirect,
              "bench: spectrogram variant needs a direct-mode model");
      v.extract = [](const Waveform& w) { return spectrogram(w); };
    } else {
      throw Error("bench: unknown variant '" + name + "'");
    }
    v.predict = [&](const Mat& features) {
      PredictorInput in;
      in.features = features;
      in.hearing_loss_db = hl;
      return predictor_forward(in, predictor.model.predictor,
                               predictor.model.params)
          .clip_score;
    };
    variants.push_back(std::move(v));
  }

  auto report = bench_runtime(variants, clips, reps, 1);
  write_bench_csv((dir / "bench.csv").string(), report);
  {
    std::ofstream f(dir / "bench.json", std::ios::trunc);
    f << to_json(report).dump(2) << "\n";
  }
  write_config_snapshot(dir, cfg, "bench");
  finish_run_dir(dir);
  for (const auto& row : report.rows)
    std::cout << "bench " << row.name << ": extract "
              << row.extract_mean_s * 1e3 << " ms, predict "
              << row.predict_mean_s * 1e3 << " ms per clip\n";
  return 0;
}

inline int cmd_plot_data(const std::string& in_dir, const std::string& out) {
  fs::path in(in_dir);
  require(fs::exists(in / "eval.json"),
          "plot-data: no eval.json in " + in_dir);
  fs::path dir = prepare_run_dir(out);
  std::ifstream f(in / "eval.json");
  nlohmann::json j;
  f >> j;
  std::ofstream o(dir / "plot_eval_long.csv", std::ios::trunc);
  o << "slice,metric,value,count\n";
  auto emit = [&](const nlohmann::json& s) {
    for (const char* metric : {"lcc", "srcc", "mse"}) {
      if (s.contains(metric) && !s.at(metric).is_null())
        o << s.at("slice").get<std::string>() << "," << metric << ","
          << s.at(metric).get<double>() << "," << s.at("count").get<int>()
          << "\n";
    }
  };
  emit(j.at("overall"));
  for (const auto& s : j.at("slices")) emit(s);
  for (const char* name : {"anchor.csv", "spl_sweep.csv", "bench.csv"}) {
    if (fs::exists(in / name)) fs::copy_file(in / name, dir / ("plot_" + std::string(name)));
  }
  finish_run_dir(dir);
  std::cout << "plot data written to " << dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// Argument wiring
// ---------------------------------------------------------------------------

inline int run_cli(std::vector<std::string> args) {
  CLI::App app{"HAAQI-Net pipeline: corpus building, training, distillation, "
               "and evaluation"};
  app.require_subcommand(1);

  std::string config_path, out_dir, manifest_path, audiogram_path;
  std::string scores_path, sources_path, provider = "proxy-oracle";
  std::string model_path, student_path, teacher_run, warm_start_path;
  std::string splits = "test-seen,test-unseen";
  std::string variants = "teacher";
  std::string plot_in;
  std::vector<double> levels;
  std::uint64_t seed_flag = 0;
  bool seed_given = false;
  int jobs = 1, quantiles = 10, reps = 3, max_clips = 100;
  double tolerance = 0.05;

  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--seed", seed_flag, "master seed (overrides the config)")
      ->each([&](const std::string&) { seed_given = true; });
  app.add_option("--out", out_dir, "run directory (created, must be fresh)");
  app.add_option("--jobs", jobs, "worker threads for corpus building");

  auto* corpus = app.add_subcommand("corpus", "corpus construction");
  corpus->require_subcommand(1);
  auto* corpus_build_cmd =
      corpus->add_subcommand("build", "degrade + amplify a clean clip tree");
  auto* corpus_aud_cmd =
      corpus->add_subcommand("audiograms", "generate the hearing-loss bank");

  auto* label_cmd = app.add_subcommand("label", "attach true scores");
  label_cmd->add_option("--manifest", manifest_path, "manifest to label")
      ->required();
  label_cmd->add_option("--provider", provider,
                        "proxy-oracle (default) or csv-import");
  label_cmd->add_option("--scores", scores_path, "scores CSV for csv-import");
  label_cmd->add_option("--sources", sources_path,
                        "clip_id -> clean path JSON for the proxy oracle");

  auto* train_cmd = app.add_subcommand("train", "train the quality model");
  train_cmd->add_option("--manifest", manifest_path, "labeled manifest")
      ->required();
  train_cmd->add_option("--audiograms", audiogram_path, "audiogram bank CSV");
  train_cmd->add_option("--warm-start", warm_start_path,
                        "model.bin to fine-tune from");

  auto* distill_cmd =
      app.add_subcommand("distill", "distill the teacher into a student");
  distill_cmd->add_option("--manifest", manifest_path, "labeled manifest")
      ->required();
  distill_cmd->add_option("--audiograms", audiogram_path, "audiogram bank CSV");
  distill_cmd
      ->add_option("--teacher-run", teacher_run,
                   "train run directory holding model.bin + teacher_encoder.bin")
      ->required();

  auto* eval_cmd = app.add_subcommand("eval", "evaluate predictions");
  eval_cmd->add_option("--manifest", manifest_path, "labeled manifest")
      ->required();
  eval_cmd->add_option("--audiograms", audiogram_path, "audiogram bank CSV");
  eval_cmd->add_option("--model", model_path, "model.bin")->required();
  eval_cmd->add_option("--student", student_path, "student.bin (distilled)");
  eval_cmd->add_option("--splits", splits, "comma-separated manifest splits");
  eval_cmd->add_option("--quantiles", quantiles, "anchor curve quantiles");
  eval_cmd->add_option("--tolerance", tolerance, "anchor tolerance band");

  auto* sweep_cmd = app.add_subcommand("spl-sweep", "SPL robustness sweep");
  sweep_cmd->add_option("--manifest", manifest_path, "labeled manifest")
      ->required();
  sweep_cmd->add_option("--audiograms", audiogram_path, "audiogram bank CSV");
  sweep_cmd->add_option("--model", model_path, "model.bin")->required();
  sweep_cmd->add_option("--student", student_path, "student.bin (distilled)");
  sweep_cmd->add_option("--splits", splits, "comma-separated manifest splits");
  sweep_cmd->add_option("--levels", levels, "dB SPL levels");
  sweep_cmd->add_option("--max-clips", max_clips, "clip budget for the sweep");

  auto* bench_cmd = app.add_subcommand("bench", "runtime comparison");
  bench_cmd->add_option("--manifest", manifest_path, "manifest of clips")
      ->required();
  bench_cmd->add_option("--audiograms", audiogram_path, "audiogram bank CSV");
  bench_cmd->add_option("--model", model_path, "model.bin")->required();
  bench_cmd->add_option("--student", student_path, "student.bin (distilled)");
  bench_cmd->add_option("--variants", variants,
                        "comma-separated: teacher,student,spectrogram");
  bench_cmd->add_option("--reps", reps, "timed repetitions");
  bench_cmd->add_option("--max-clips", max_clips, "clip budget");

  auto* plot_cmd = app.add_subcommand("plot-data", "emit plot-ready CSVs");
  plot_cmd->add_option("--in", plot_in, "run directory with eval.json")
      ->required();

  std::vector<const char*> argv;
  argv.push_back("haaqinet");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(int(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_run_config(config_path);
    if (seed_given) {
      cfg.seed = seed_flag;
      cfg.seed_set = true;
    }

    bool needs_seed = corpus_build_cmd->parsed() || corpus_aud_cmd->parsed() ||
                      train_cmd->parsed() || distill_cmd->parsed();
    require(!needs_seed || cfg.seed_set,
            "a master seed is required: set \"seed\" in the config or pass "
            "--seed");
    bool needs_out = !plot_cmd->parsed();
    require(!needs_out || !out_dir.empty(), "--out is required");

    if (corpus_aud_cmd->parsed()) return cmd_corpus_audiograms(cfg, out_dir);
    if (corpus_build_cmd->parsed()) return cmd_corpus_build(cfg, out_dir, jobs);
    if (label_cmd->parsed())
      return cmd_label(cfg, manifest_path, provider, scores_path, sources_path,
                       out_dir);
    if (train_cmd->parsed())
      return cmd_train(cfg, manifest_path, audiogram_path, warm_start_path,
                       out_dir);
    if (distill_cmd->parsed())
      return cmd_distill(cfg, manifest_path, audiogram_path, teacher_run,
                         out_dir);
    if (eval_cmd->parsed())
      return cmd_eval(cfg, manifest_path, audiogram_path, model_path,
                      student_path, splits, quantiles, tolerance, out_dir);
    if (sweep_cmd->parsed())
      return cmd_spl_sweep(cfg, manifest_path, audiogram_path, model_path,
                           student_path, splits, levels, max_clips, out_dir);
    if (bench_cmd->parsed())
      return cmd_bench(cfg, manifest_path, audiogram_path, model_path,
                       student_path, variants, reps, max_clips, out_dir);
    if (plot_cmd->parsed()) return cmd_plot_data(plot_in, out_dir);
    return 2;
  } catch (const std::exception& e) {
    nlohmann::json err;
    err["error"] = e.what();
    std::cerr << err.dump() << "\n";
    if (!out_dir.empty()) {
      fs::path dir = resolve_out_dir(out_dir);
      if (fs::is_directory(dir)) {
        std::ofstream f(dir / "error.json", std::ios::trunc);
        f << err.dump(2) << "\n";
      }
    }
    return 1;
  }
}

}  // namespace haaqi::cli
