#pragma once

#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "haaqinet/encoder.hpp"
#include "haaqinet/predictor.hpp"
#include "haaqinet/serialize.hpp"

namespace haaqi {

// How the trainable pipeline consumes acoustic features.
enum class FeatureKind {
  kDirect,             // fixed features feed the quality head directly
  kEncoderLastAdapter, // frozen encoder's last layer through the adapter
  kEncoderWsAdapter,   // weighted sum of all layers through the adapter
};

inline std::string to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::kDirect: return "direct";
    case FeatureKind::kEncoderLastAdapter: return "encoder-last";
    case FeatureKind::kEncoderWsAdapter: return "encoder-ws";
  }
  throw Error("model: bad feature kind");
}

inline FeatureKind feature_kind_from_string(const std::string& s) {
  if (s == "direct") return FeatureKind::kDirect;
  if (s == "encoder-last") return FeatureKind::kEncoderLastAdapter;
  if (s == "encoder-ws") return FeatureKind::kEncoderWsAdapter;
  throw Error("model: unknown feature kind '" + s + "'");
}

struct QualityModelConfig {
  FeatureKind kind = FeatureKind::kEncoderWsAdapter;
  int encoder_layers = 12;   // layer count the ws logits cover
  int encoder_dim = 96;      // adapter input width for encoder modes
  PredictorConfig predictor; // predictor.feature_dim is the adapter output
};

inline nlohmann::json to_json(const QualityModelConfig& c) {
  return {{"kind", to_string(c.kind)},
          {"encoder_layers", c.encoder_layers},
          {"encoder_dim", c.encoder_dim},
          {"predictor", to_json(c.predictor)}};
}

inline QualityModelConfig quality_model_config_from_json(const nlohmann::json& j) {
  QualityModelConfig c;
  c.kind = feature_kind_from_string(j.at("kind").get<std::string>());
  c.encoder_layers = j.at("encoder_layers").get<int>();
  c.encoder_dim = j.at("encoder_dim").get<int>();
  c.predictor = predictor_config_from_json(j.at("predictor"));
  return c;
}

// One training/eval item: acoustic features (either direct, or the frozen
// encoder's per-layer outputs), the hearing-loss pattern, and the target.
struct LabeledExample {
  std::string id;
  std::vector<Mat> layers;
  std::array<double, 8> hl_db{};
  double target = 0.0;
};

// The trainable stack: (layer logits ->) adapter -> quality head. The frozen
// encoder is not part of this store; its outputs arrive as constants inside
// each example.
struct QualityModel {
  QualityModelConfig cfg;
  ad::ParamStore params;
  Predictor predictor;
  nn::Linear adapter;      // encoder modes only
  int layer_logits = -1;   // ws mode only

  static QualityModel create(const QualityModelConfig& cfg, std::uint64_t seed) {
    QualityModel m;
    m.cfg = cfg;
    if (cfg.kind == FeatureKind::kEncoderWsAdapter)
      m.layer_logits = m.params.add("fuse.logits", Mat::Zero(1, cfg.encoder_layers));
    if (cfg.kind != FeatureKind::kDirect) {
      Rng rng(derive_seed(seed, "adapter/init"));
      m.adapter = nn::Linear::create(m.params, "adapter", cfg.encoder_dim,
                                     cfg.predictor.feature_dim, rng);
    }
    m.predictor = Predictor::create(m.params, cfg.predictor, seed);
    return m;
  }

  // Frame-score graph for one example; returns a T x 1 Var.
  ad::Var build_frames(ad::Tape& t, const LabeledExample& ex,
                       std::vector<Mat>* attn_probe = nullptr) {
    require(!ex.layers.empty(), "model: example without features");
    ad::Var feat;
    switch (cfg.kind) {
      case FeatureKind::kDirect:
        feat = t.constant(ex.layers.back());
        break;
      case FeatureKind::kEncoderLastAdapter:
        feat = adapter.apply(t, params, t.constant(ex.layers.back()));
        break;
      case FeatureKind::kEncoderWsAdapter: {
        require(int(ex.layers.size()) == cfg.encoder_layers,
                "model: layer count mismatch");
        std::vector<ad::Var> vars;
        vars.reserve(ex.layers.size());
        for (const auto& m : ex.layers) vars.push_back(t.constant(m));
        ad::Var fused = weighted_sum_graph(t, vars, t.param(params, layer_logits));
        feat = adapter.apply(t, params, fused);
        break;
      }
    }
    Mat hl(1, 8);
    for (int i = 0; i < 8; ++i) hl(0, i) = ex.hl_db[std::size_t(i)] / 100.0;
    ad::Var hl_block =
        t.constant(Mat(hl.replicate(t.val(feat).rows(), 1)));
    return predictor.build(t, params, t.concat_cols({feat, hl_block}),
                           attn_probe);
  }

  QualityPrediction predict(const LabeledExample& ex) {
    ad::Tape t;
    ad::Var frames = build_frames(t, ex);
    QualityPrediction q;
    const Mat& f = t.val(frames);
    q.frame_scores.assign(f.data(), f.data() + f.size());
    q.clip_score = f.mean();
    return q;
  }
};

// ---------------------------------------------------------------------------
// Training with Adam and early stopping on validation loss
// ---------------------------------------------------------------------------

struct TrainConfig {
  double lr = 1e-4;
  int batch_size = 8;
  int max_epochs = 200;
  int max_steps = 0;  // stop after this many optimizer steps when > 0
  int patience = 5;
  double min_delta = 1e-5;
  std::uint64_t seed = 1;
};

struct TrainReport {
  std::vector<double> step_losses;
  std::vector<double> epoch_valid_losses;
  double best_valid_loss = std::numeric_limits<double>::infinity();
  double final_train_loss = std::numeric_limits<double>::infinity();
  int steps = 0;
  int epochs = 0;
};

inline std::vector<Mat> snapshot_params(const ad::ParamStore& p) {
  std::vector<Mat> out;
  for (int i = 0; i < p.size(); ++i) out.push_back(p.value(i));
  return out;
}

inline void restore_snapshot(ad::ParamStore& p, const std::vector<Mat>& snap) {
  require(std::size_t(p.size()) == snap.size(), "model: snapshot mismatch");
  for (int i = 0; i < p.size(); ++i) p.value(i) = snap[std::size_t(i)];
}

inline double dataset_quality_loss(QualityModel& model,
                                   const std::vector<LabeledExample>& examples) {
  require(!examples.empty(), "model: empty dataset");
  std::vector<double> truth;
  std::vector<QualityPrediction> preds;
  for (const auto& ex : examples) {
    truth.push_back(ex.target);
    preds.push_back(model.predict(ex));
  }
  return quality_loss(truth, preds);
}

// trainable_mask, when non-empty, freezes parameters whose flag is false
// (the distiller uses this to pin the quality head).
inline TrainReport train_quality_model(
    QualityModel& model, const std::vector<LabeledExample>& train_set,
    const std::vector<LabeledExample>& valid_set, const TrainConfig& cfg,
    const std::vector<bool>& trainable_mask = {}) {
  require(!train_set.empty(), "train: empty dataset");
  require(cfg.batch_size >= 1, "train: batch size >= 1");

  ad::AdamConfig acfg;
  acfg.lr = cfg.lr;
  std::vector<bool> mask = trainable_mask;
  if (mask.empty()) mask.assign(std::size_t(model.params.size()), true);
  ad::MaskedAdam opt(acfg, mask);

  TrainReport report;
  std::vector<Mat> best = snapshot_params(model.params);
  int stale_epochs = 0;
  bool stop = false;

  for (int epoch = 0; epoch < cfg.max_epochs && !stop; ++epoch) {
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(cfg.seed, "epoch/" + std::to_string(epoch)));
    shuffle_rng.shuffle(order);

    for (std::size_t at = 0; at < order.size() && !stop;
         at += std::size_t(cfg.batch_size)) {
      std::size_t end = std::min(order.size(), at + std::size_t(cfg.batch_size));
      ad::Tape t;
      std::vector<ad::Var> frames;
      std::vector<double> truth;
      for (std::size_t i = at; i < end; ++i) {
        const auto& ex = train_set[order[i]];
        frames.push_back(model.build_frames(t, ex));
        truth.push_back(ex.target);
      }
      ad::Var loss = quality_loss_graph(t, frames, truth);
      double loss_v = t.scalar(loss);
      if (!std::isfinite(loss_v))
        throw Error("train: non-finite loss at step " +
                    std::to_string(report.steps) + " (epoch " +
                    std::to_string(epoch) + ")");
      model.params.zero_grad();
      t.backward(loss);
      opt.step(model.params);
      report.step_losses.push_back(loss_v);
      ++report.steps;
      if (cfg.max_steps > 0 && report.steps >= cfg.max_steps) stop = true;
    }
    ++report.epochs;

    if (!valid_set.empty()) {
      double v = dataset_quality_loss(model, valid_set);
      report.epoch_valid_losses.push_back(v);
      if (v < report.best_valid_loss - cfg.min_delta) {
        report.best_valid_loss = v;
        best = snapshot_params(model.params);
        stale_epochs = 0;
      } else if (++stale_epochs >= cfg.patience) {
        stop = true;
      }
    }
  }

  if (!valid_set.empty() && std::isfinite(report.best_valid_loss))
    restore_snapshot(model.params, best);
  report.final_train_loss = dataset_quality_loss(model, train_set);
  return report;
}

// ---------------------------------------------------------------------------
// Whole-model serialization
// ---------------------------------------------------------------------------

inline void save_quality_model(const std::string& path, const QualityModel& m,
                               const nlohmann::json& extra_meta = {}) {
  nlohmann::json meta;
  meta["kind"] = "quality-model";
  meta["config"] = to_json(m.cfg);
  if (!extra_meta.is_null() && !extra_meta.empty()) meta["extra"] = extra_meta;
  save_weights(path, meta, m.params);
}

inline QualityModel load_quality_model(const std::string& path) {
  LoadedWeights w = load_weights(path);
  require(w.meta.at("kind") == "quality-model", "model: wrong weights kind");
  QualityModel m = QualityModel::create(
      quality_model_config_from_json(w.meta.at("config")), /*seed=*/0);
  restore_params(m.params, w);
  return m;
}

}  // namespace haaqi
