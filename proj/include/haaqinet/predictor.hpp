#pragma once

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "haaqinet/features.hpp"
#include "haaqinet/nn.hpp"

namespace haaqi {

// Quality head: BLSTM -> FC-256 + ReLU -> 16-head self-attention (residual)
// -> linear -> sigmoid frame scores -> global average pooling.
struct PredictorConfig {
  int feature_dim = 257;  // acoustic features per frame
  int hl_dim = 8;         // hearing-loss thresholds appended per frame
  int blstm_hidden = 128; // per direction
  int fc_dim = 256;
  int attn_heads = 16;

  int input_dim() const { return feature_dim + hl_dim; }
};

inline nlohmann::json to_json(const PredictorConfig& c) {
  return {{"feature_dim", c.feature_dim},   {"hl_dim", c.hl_dim},
          {"blstm_hidden", c.blstm_hidden}, {"fc_dim", c.fc_dim},
          {"attn_heads", c.attn_heads}};
}

inline PredictorConfig predictor_config_from_json(const nlohmann::json& j) {
  PredictorConfig c;
  c.feature_dim = j.at("feature_dim").get<int>();
  c.hl_dim = j.at("hl_dim").get<int>();
  c.blstm_hidden = j.at("blstm_hidden").get<int>();
  c.fc_dim = j.at("fc_dim").get<int>();
  c.attn_heads = j.at("attn_heads").get<int>();
  return c;
}

struct Predictor {
  PredictorConfig cfg;
  nn::Blstm blstm;
  nn::Linear fc;
  nn::MultiHeadAttention attn;
  nn::Linear out;

  static Predictor create(ad::ParamStore& p, const PredictorConfig& cfg,
                          std::uint64_t seed,
                          const std::string& prefix = "pred") {
    require(cfg.fc_dim % cfg.attn_heads == 0,
            "predictor: attention heads must divide fc width");
    Rng rng(derive_seed(seed, prefix + "/init"));
    Predictor pr;
    pr.cfg = cfg;
    pr.blstm = nn::Blstm::create(p, prefix + ".blstm", cfg.input_dim(),
                                 cfg.blstm_hidden, rng);
    pr.fc = nn::Linear::create(p, prefix + ".fc", 2 * cfg.blstm_hidden,
                               cfg.fc_dim, rng);
    pr.attn = nn::MultiHeadAttention::create(p, prefix + ".attn", cfg.fc_dim,
                                             cfg.attn_heads, rng);
    pr.out = nn::Linear::create(p, prefix + ".out", cfg.fc_dim, 1, rng);
    return pr;
  }

  // x is T x (feature_dim + hl_dim); returns T x 1 frame scores in (0,1).
  ad::Var build(ad::Tape& t, ad::ParamStore& p, ad::Var x,
                std::vector<Mat>* attn_probe = nullptr) const {
    require(t.val(x).cols() == cfg.input_dim(), "predictor: input width mismatch");
    ad::Var h = t.relu(fc.apply(t, p, blstm.apply(t, p, x)));
    ad::Var a = t.add(h, attn.apply(t, p, h, attn_probe));  // residual block
    return t.sigmoid(out.apply(t, p, a));
  }
};

// ---------------------------------------------------------------------------
// Value-level interface
// ---------------------------------------------------------------------------

struct PredictorInput {
  FeatureMatrix features;              // T x feature_dim
  std::array<double, 8> hearing_loss_db{};  // dB HL, normalized internally
};

struct QualityPrediction {
  double clip_score = 0.0;
  std::vector<double> frame_scores;
};

// dB/100 normalization, broadcast per frame, appended after the features.
inline Mat concat_hearing_loss(const FeatureMatrix& features,
                               const std::array<double, 8>& hl_db) {
  Mat hl(1, 8);
  for (int i = 0; i < 8; ++i) {
    double v = hl_db[std::size_t(i)] / 100.0;
    require(v >= 0.0 && v <= 1.2, "predictor: hearing loss outside [0,120] dB");
    hl(0, i) = v;
  }
  Mat out(features.rows(), features.cols() + 8);
  out.leftCols(features.cols()) = features;
  out.rightCols(8) = hl.replicate(features.rows(), 1);
  return out;
}

inline QualityPrediction predictor_forward(const PredictorInput& in,
                                           const Predictor& pred,
                                           ad::ParamStore& params,
                                           std::vector<Mat>* attn_probe = nullptr) {
  require(in.features.rows() >= 1, "predictor: empty input");
  require(in.features.allFinite(), "predictor: non-finite features");
  ad::Tape t;
  ad::Var x = t.constant(concat_hearing_loss(in.features, in.hearing_loss_db));
  ad::Var frames = pred.build(t, params, x, attn_probe);
  QualityPrediction q;
  const Mat& f = t.val(frames);
  require(f.allFinite(), "predictor: non-finite weights or activations");
  q.frame_scores.assign(f.data(), f.data() + f.size());
  q.clip_score = f.mean();
  return q;
}

// ---------------------------------------------------------------------------
// Training objective: clip-level squared error plus the averaged per-frame
// squared error of the true clip score against each frame score.
// ---------------------------------------------------------------------------

inline double quality_loss(const std::vector<double>& truth,
                           const std::vector<QualityPrediction>& pred) {
  require(!truth.empty(), "quality_loss: empty batch");
  require(truth.size() == pred.size(), "quality_loss: batch size mismatch");
  double total = 0.0;
  for (std::size_t n = 0; n < truth.size(); ++n) {
    require(!pred[n].frame_scores.empty(), "quality_loss: clip without frames");
    double clip_term = truth[n] - pred[n].clip_score;
    double frame_term = 0.0;
    for (double q : pred[n].frame_scores) {
      double d = truth[n] - q;
      frame_term += d * d;
    }
    frame_term /= double(pred[n].frame_scores.size());
    total += clip_term * clip_term + frame_term;
  }
  return total / double(truth.size());
}

// Graph version over per-clip frame-score nodes; the clip score is the frame
// mean, taken inside the graph.
inline ad::Var quality_loss_graph(ad::Tape& t,
                                  const std::vector<ad::Var>& frame_scores,
                                  const std::vector<double>& truth) {
  require(!truth.empty() && truth.size() == frame_scores.size(),
          "quality_loss: batch mismatch");
  ad::Var total;
  for (std::size_t n = 0; n < truth.size(); ++n) {
    ad::Var q = frame_scores[n];
    ad::Var truth_n = t.scalar_constant(truth[n]);
    ad::Var clip = t.mean_all(q);
    ad::Var clip_term = t.square(t.sub(truth_n, clip));
    ad::Var frame_term = t.mean_all(t.square(t.sub(truth_n, q)));
    ad::Var item = t.add(clip_term, frame_term);
    total = n == 0 ? item : t.add(total, item);
  }
  return t.scale(total, 1.0 / double(truth.size()));
}

}  // namespace haaqi
