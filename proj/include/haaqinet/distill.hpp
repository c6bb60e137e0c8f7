#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "haaqinet/encoder.hpp"
#include "haaqinet/model.hpp"

namespace haaqi {

// ---------------------------------------------------------------------------
// Student configuration
// ---------------------------------------------------------------------------

struct StudentConfig {
  int kept_layers = 3;
  enum class Topology { kSingle, kMultiIndependent, kMultiSequential };
  Topology topology = Topology::kMultiIndependent;
  std::vector<int> tapped_teacher_layers = {6, 9, 12};  // 1-based
  enum class Fuse { kLastHead, kWeightedSumOfHeads };
  Fuse fuse = Fuse::kLastHead;
  bool finetune_predictor = false;
  int head_hidden = 48;  // bottleneck width of the prediction heads
};

inline std::string to_string(StudentConfig::Topology t) {
  switch (t) {
    case StudentConfig::Topology::kSingle: return "single";
    case StudentConfig::Topology::kMultiIndependent: return "multi-independent";
    case StudentConfig::Topology::kMultiSequential: return "multi-sequential";
  }
  throw Error("student: bad topology");
}

inline std::string to_string(StudentConfig::Fuse f) {
  return f == StudentConfig::Fuse::kLastHead ? "last-head"
                                             : "weighted-sum-of-heads";
}

inline void validate(const StudentConfig& c, const EncoderConfig& teacher) {
  require(c.kept_layers >= 1 && c.kept_layers <= teacher.num_layers,
          "student: kept_layers out of range");
  require(!c.tapped_teacher_layers.empty(), "student: no tapped layers");
  int prev = 0;
  for (int tap : c.tapped_teacher_layers) {
    require(tap >= 1 && tap <= teacher.num_layers, "student: tap out of range");
    require(tap > prev, "student: taps must be sorted ascending");
    prev = tap;
  }
  if (c.topology == StudentConfig::Topology::kSingle)
    require(c.tapped_teacher_layers.size() == 1 &&
                c.tapped_teacher_layers[0] == teacher.num_layers,
            "student: single topology taps only the final teacher layer");
  require(c.head_hidden >= 1, "student: head_hidden >= 1");
}

inline nlohmann::json to_json(const StudentConfig& c) {
  return {{"kept_layers", c.kept_layers},
          {"topology", to_string(c.topology)},
          {"taps", c.tapped_teacher_layers},
          {"fuse", to_string(c.fuse)},
          {"finetune_predictor", c.finetune_predictor},
          {"head_hidden", c.head_hidden}};
}

inline StudentConfig student_config_from_json(const nlohmann::json& j) {
  StudentConfig c;
  c.kept_layers = j.at("kept_layers").get<int>();
  std::string topo = j.at("topology").get<std::string>();
  if (topo == "single")
    c.topology = StudentConfig::Topology::kSingle;
  else if (topo == "multi-independent")
    c.topology = StudentConfig::Topology::kMultiIndependent;
  else if (topo == "multi-sequential")
    c.topology = StudentConfig::Topology::kMultiSequential;
  else
    throw Error("student: unknown topology '" + topo + "'");
  c.tapped_teacher_layers = j.at("taps").get<std::vector<int>>();
  c.fuse = j.at("fuse").get<std::string>() == "last-head"
               ? StudentConfig::Fuse::kLastHead
               : StudentConfig::Fuse::kWeightedSumOfHeads;
  c.finetune_predictor = j.at("finetune_predictor").get<bool>();
  c.head_hidden = j.at("head_hidden").get<int>();
  return c;
}

// ---------------------------------------------------------------------------
// Student model: teacher front end + kept layers + prediction heads
// ---------------------------------------------------------------------------

// Residual bottleneck head: starts as an identity map over the trunk
// features, with a learned low-rank nonlinear correction on top.
struct PredictionHead {
  nn::Linear in, out;

  static PredictionHead create(ad::ParamStore& p, const std::string& name,
                               Eigen::Index dim, Eigen::Index hidden, Rng& rng) {
    PredictionHead h;
    h.in = nn::Linear::create(p, name + ".in", dim, hidden, rng);
    h.out = nn::Linear::create(p, name + ".out", hidden, dim, rng);
    return h;
  }

  ad::Var apply(ad::Tape& t, ad::ParamStore& p, ad::Var x) const {
    return t.add(x, out.apply(t, p, t.gelu(in.apply(t, p, x))));
  }
};

struct Student {
  StudentConfig cfg;
  EncoderConfig enc_cfg;  // teacher dimensions
  ad::ParamStore params;
  nn::Linear patch_embed;
  nn::LayerNorm post_embed_norm;
  std::vector<nn::TransformerLayer> layers;
  std::vector<PredictionHead> heads;  // one per tapped teacher layer
  int fuse_logits = -1;
};

namespace detail {

inline Student make_student_skeleton(const EncoderConfig& teacher_cfg,
                                     const StudentConfig& cfg,
                                     std::uint64_t seed) {
  validate(cfg, teacher_cfg);
  Student s;
  s.cfg = cfg;
  s.enc_cfg = teacher_cfg;
  Rng rng(derive_seed(seed, "student/init"));
  s.patch_embed = nn::Linear::create(
      s.params, "student.pe",
      Eigen::Index(teacher_cfg.patch_frames) * teacher_cfg.patch_bins,
      teacher_cfg.model_dim, rng);
  s.post_embed_norm =
      nn::LayerNorm::create(s.params, "student.pe_ln", teacher_cfg.model_dim);
  for (int i = 0; i < cfg.kept_layers; ++i)
    s.layers.push_back(nn::TransformerLayer::create(
        s.params, "student.layer" + std::to_string(i), teacher_cfg.model_dim,
        teacher_cfg.num_heads, teacher_cfg.ff_dim, rng));
  Rng head_rng(derive_seed(seed, "student/heads"));
  for (int tap : cfg.tapped_teacher_layers)
    s.heads.push_back(PredictionHead::create(
        s.params, "student.head" + std::to_string(tap), teacher_cfg.model_dim,
        cfg.head_hidden, head_rng));
  if (cfg.fuse == StudentConfig::Fuse::kWeightedSumOfHeads)
    s.fuse_logits = s.params.add(
        "student.fuse.logits",
        Mat::Zero(1, Eigen::Index(cfg.tapped_teacher_layers.size())));
  return s;
}

}  // namespace detail

// Fresh random initialization of every student parameter.
inline Student random_init_student(const EncoderConfig& teacher_cfg,
                                   const StudentConfig& cfg,
                                   std::uint64_t seed) {
  return detail::make_student_skeleton(teacher_cfg, cfg, seed);
}

// Transfer initialization: the shared front end and the first kept_layers
// copy the teacher's parameters bitwise; heads stay freshly seeded.
inline Student transfer_init(const Encoder& teacher,
                             const ad::ParamStore& teacher_params,
                             const StudentConfig& cfg, std::uint64_t seed,
                             const std::string& teacher_prefix = "enc") {
  Student s = detail::make_student_skeleton(teacher.cfg, cfg, seed);
  auto copy = [&](const std::string& from, const std::string& to) {
    const Mat& src = teacher_params.value(from);
    Mat& dst = s.params.value(to);
    require(src.rows() == dst.rows() && src.cols() == dst.cols(),
            "transfer_init: shape mismatch for " + from);
    dst = src;
  };
  copy(teacher_prefix + ".pe.w", "student.pe.w");
  copy(teacher_prefix + ".pe.b", "student.pe.b");
  copy(teacher_prefix + ".pe_ln.gamma", "student.pe_ln.gamma");
  copy(teacher_prefix + ".pe_ln.beta", "student.pe_ln.beta");
  const char* parts[] = {".ln1.gamma", ".ln1.beta",  ".attn.q.w", ".attn.q.b",
                         ".attn.k.w",  ".attn.k.b",  ".attn.v.w", ".attn.v.b",
                         ".attn.out.w", ".attn.out.b", ".ln2.gamma",
                         ".ln2.beta",  ".ff1.w",     ".ff1.b",    ".ff2.w",
                         ".ff2.b"};
  for (int i = 0; i < cfg.kept_layers; ++i)
    for (const char* part : parts)
      copy(teacher_prefix + ".layer" + std::to_string(i) + part,
           "student.layer" + std::to_string(i) + part);
  return s;
}

struct StudentForward {
  std::vector<ad::Var> head_outputs;  // one per tapped teacher layer
  ad::Var fused;                      // quality-head input
};

inline StudentForward student_forward_graph(ad::Tape& t, Student& s,
                                            ad::Var tokens) {
  ad::Var x = s.post_embed_norm.apply(t, s.params,
                                      s.patch_embed.apply(t, s.params, tokens));
  for (auto& layer : s.layers) x = layer.apply(t, s.params, x);

  StudentForward out;
  switch (s.cfg.topology) {
    case StudentConfig::Topology::kSingle:
    case StudentConfig::Topology::kMultiIndependent:
      for (const auto& head : s.heads)
        out.head_outputs.push_back(head.apply(t, s.params, x));
      break;
    case StudentConfig::Topology::kMultiSequential: {
      ad::Var prev = x;
      for (const auto& head : s.heads) {
        prev = head.apply(t, s.params, prev);
        out.head_outputs.push_back(prev);
      }
      break;
    }
  }

  if (s.cfg.fuse == StudentConfig::Fuse::kWeightedSumOfHeads)
    out.fused = weighted_sum_graph(t, out.head_outputs,
                                   t.param(s.params, s.fuse_logits));
  else
    out.fused = out.head_outputs.back();
  return out;
}

// Value-level convenience: per-tap predicted features plus the fused feature.
inline std::pair<std::vector<Mat>, Mat> student_forward(
    Student& s, const FeatureMatrix& fbank) {
  ad::Tape t;
  auto fwd = student_forward_graph(t, s, t.constant(patchify(fbank, s.enc_cfg)));
  std::vector<Mat> preds;
  for (auto v : fwd.head_outputs) preds.push_back(t.val(v));
  return {preds, t.val(fwd.fused)};
}

// ---------------------------------------------------------------------------
// Distillation losses
// ---------------------------------------------------------------------------

inline double l1_layer_loss(const Mat& teacher_feat, const Mat& student_pred) {
  require(teacher_feat.rows() == student_pred.rows() &&
              teacher_feat.cols() == student_pred.cols(),
          "l1_layer_loss: shape mismatch");
  return (teacher_feat - student_pred).cwiseAbs().mean();
}

struct SigmoidCosine {
  double loss = 0.0;
  double similarity = 0.0;
};

inline SigmoidCosine sigmoid_cosine_loss(const Mat& teacher_feat,
                                         const Mat& student_pred) {
  require(teacher_feat.rows() == student_pred.rows() &&
              teacher_feat.cols() == student_pred.cols(),
          "sigmoid_cosine_loss: shape mismatch");
  double na = teacher_feat.norm(), nb = student_pred.norm();
  require(na > 0.0 && nb > 0.0, "sigmoid_cosine_loss: zero-norm input");
  double s = teacher_feat.cwiseProduct(student_pred).sum() / (na * nb);
  double sig = 1.0 / (1.0 + std::exp(-s));
  double loss = -s * std::log(sig) - (1.0 - s) * std::log(1.0 - sig);
  require(std::isfinite(loss), "sigmoid_cosine_loss: non-finite loss");
  return {loss, s};
}

inline double layer_loss(const Mat& teacher_feat, const Mat& student_pred) {
  return l1_layer_loss(teacher_feat, student_pred) +
         sigmoid_cosine_loss(teacher_feat, student_pred).loss;
}

// d = 2 - mean(similarity): easiest samples weigh 1, hardest weigh 3.
inline double difficulty_weight(const std::vector<double>& similarities) {
  require(!similarities.empty(), "difficulty_weight: empty similarity list");
  double mean = 0.0;
  for (double s : similarities) {
    require(s >= -1.0 - 1e-9 && s <= 1.0 + 1e-9,
            "difficulty_weight: similarity outside [-1,1]");
    mean += s;
  }
  mean /= double(similarities.size());
  return 2.0 - mean;
}

// Batch aggregate: per-sample mean over tapped layers, difficulty-weighted.
inline double distill_loss(const std::vector<std::vector<double>>& layer_losses,
                           const std::vector<double>& difficulty) {
  require(!layer_losses.empty(), "distill_loss: empty batch");
  require(layer_losses.size() == difficulty.size(),
          "distill_loss: batch/weight mismatch");
  double total = 0.0;
  for (std::size_t n = 0; n < layer_losses.size(); ++n) {
    require(!layer_losses[n].empty(), "distill_loss: sample without layers");
    require(difficulty[n] > 0.0, "distill_loss: non-positive weight");
    double sample = 0.0;
    for (double v : layer_losses[n]) sample += v;
    sample /= double(layer_losses[n].size());
    total += sample * difficulty[n];
  }
  double out = total / double(layer_losses.size());
  require(std::isfinite(out), "distill_loss: non-finite");
  return out;
}

inline double total_loss(double quality, double distil) {
  require(std::isfinite(quality) && std::isfinite(distil),
          "total_loss: non-finite inputs");
  return quality + distil;
}

// Graph builders (the training path differentiates through everything,
// including the cosine similarities inside the difficulty weights).
struct SigmoidCosineGraph {
  ad::Var loss;
  ad::Var similarity;
};

inline SigmoidCosineGraph sigmoid_cosine_graph(ad::Tape& t, ad::Var teacher,
                                               ad::Var student) {
  ad::Var s = ad::cosine_similarity(t, teacher, student);
  ad::Var sig = t.sigmoid(s);
  ad::Var one = t.scalar_constant(1.0);
  ad::Var loss = t.sub(t.neg(t.mul(s, t.log_op(sig))),
                       t.mul(t.sub(one, s), t.log_op(t.sub(one, sig))));
  return {loss, s};
}

inline ad::Var l1_graph(ad::Tape& t, ad::Var teacher, ad::Var student) {
  return t.mean_all(t.abs_op(t.sub(teacher, student)));
}

// ---------------------------------------------------------------------------
// Distillation training
// ---------------------------------------------------------------------------

struct DistillExample {
  std::string id;
  Mat tokens;                     // patchified fbank
  std::vector<Mat> teacher_taps;  // teacher features at the tapped layers
  std::array<double, 8> hl_db{};
  double target = 0.0;  // quality label
};

struct DistillStepRow {
  int step = 0;
  double l_qual = 0.0;
  double l_distil = 0.0;
  std::vector<double> mean_cos;  // per tapped layer
  double mean_d = 0.0;
};

struct DistillReport {
  std::vector<DistillStepRow> rows;
  std::vector<double> final_heldout_cos;  // per tapped layer
  double final_l_qual = 0.0;
};

inline std::size_t param_coefficients(const ad::ParamStore& p) {
  std::size_t n = 0;
  for (int i = 0; i < p.size(); ++i) n += std::size_t(p.value(i).size());
  return n;
}

// Builds one sample's distillation terms; returns (weighted sample loss,
// per-tap cos vars, difficulty var, fused feature).
namespace detail {

struct SampleDistill {
  ad::Var mean_layer_loss;  // (1/taps) sum of L_TE_i
  ad::Var weighted_loss;    // mean_layer_loss x difficulty
  std::vector<ad::Var> cos;
  ad::Var difficulty;
  ad::Var fused;
};

inline SampleDistill sample_distill_graph(ad::Tape& t, Student& s,
                                          const DistillExample& ex) {
  auto fwd = student_forward_graph(t, s, t.constant(ex.tokens));
  require(fwd.head_outputs.size() == ex.teacher_taps.size(),
          "distill: tap count mismatch");
  SampleDistill out;
  ad::Var loss_sum;
  ad::Var sim_sum;
  for (std::size_t i = 0; i < ex.teacher_taps.size(); ++i) {
    ad::Var teacher = t.constant(ex.teacher_taps[i]);
    ad::Var l1 = l1_graph(t, teacher, fwd.head_outputs[i]);
    auto sc = sigmoid_cosine_graph(t, teacher, fwd.head_outputs[i]);
    ad::Var lte = t.add(l1, sc.loss);
    loss_sum = i == 0 ? lte : t.add(loss_sum, lte);
    sim_sum = i == 0 ? sc.similarity : t.add(sim_sum, sc.similarity);
    out.cos.push_back(sc.similarity);
  }
  double inv_taps = 1.0 / double(ex.teacher_taps.size());
  out.mean_layer_loss = t.scale(loss_sum, inv_taps);
  out.difficulty =
      t.sub(t.scalar_constant(2.0), t.scale(sim_sum, inv_taps));
  out.weighted_loss = t.mul(out.mean_layer_loss, out.difficulty);
  out.fused = fwd.fused;
  return out;
}

}  // namespace detail

// Optimizes L = L_Qual + L_Distil over the student (and, when configured,
// the quality head). `qm` must be an encoder-mode quality model whose adapter
// width matches the student's model dim.
inline DistillReport distill_train(Student& student, QualityModel& qm,
                                   const std::vector<DistillExample>& train_set,
                                   const std::vector<DistillExample>& heldout,
                                   const TrainConfig& cfg,
                                   bool use_difficulty_weights = true) {
  require(!train_set.empty(), "distill: empty dataset");
  require(qm.cfg.kind != FeatureKind::kDirect,
          "distill: quality model must take encoder features");

  ad::AdamConfig acfg;
  acfg.lr = cfg.lr;
  ad::Adam student_opt(acfg);
  ad::Adam qm_opt(acfg);

  DistillReport report;
  bool stop = false;
  for (int epoch = 0; epoch < cfg.max_epochs && !stop; ++epoch) {
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(cfg.seed, "distill-epoch/" + std::to_string(epoch)));
    shuffle_rng.shuffle(order);

    for (std::size_t at = 0; at < order.size() && !stop;
         at += std::size_t(cfg.batch_size)) {
      std::size_t end = std::min(order.size(), at + std::size_t(cfg.batch_size));
      ad::Tape t;
      std::vector<ad::Var> frames;
      std::vector<double> truth;
      ad::Var distil_sum;
      DistillStepRow row;
      row.mean_cos.assign(student.cfg.tapped_teacher_layers.size(), 0.0);
      std::size_t count = 0;
      for (std::size_t i = at; i < end; ++i) {
        const auto& ex = train_set[order[i]];
        auto sd = detail::sample_distill_graph(t, student, ex);
        ad::Var sample_loss =
            use_difficulty_weights ? sd.weighted_loss : sd.mean_layer_loss;
        distil_sum = count == 0 ? sample_loss : t.add(distil_sum, sample_loss);
        for (std::size_t k = 0; k < sd.cos.size(); ++k)
          row.mean_cos[k] += t.scalar(sd.cos[k]);
        row.mean_d += t.scalar(sd.difficulty);
        ++count;

        // Quality branch through the (possibly frozen) adapter + predictor.
        ad::Var feat = qm.adapter.apply(t, qm.params, sd.fused);
        Mat hl(1, 8);
        for (int k = 0; k < 8; ++k) hl(0, k) = ex.hl_db[std::size_t(k)] / 100.0;
        ad::Var hl_block = t.constant(Mat(hl.replicate(t.val(feat).rows(), 1)));
        frames.push_back(qm.predictor.build(
            t, qm.params, t.concat_cols({feat, hl_block})));
        truth.push_back(ex.target);
      }
      ad::Var l_distil = t.scale(distil_sum, 1.0 / double(count));
      ad::Var l_qual = quality_loss_graph(t, frames, truth);
      ad::Var total = t.add(l_qual, l_distil);

      row.step = int(report.rows.size());
      row.l_qual = t.scalar(l_qual);
      row.l_distil = t.scalar(l_distil);
      for (auto& v : row.mean_cos) v /= double(count);
      row.mean_d /= double(count);
      if (!std::isfinite(t.scalar(total)))
        throw Error("distill: non-finite loss at step " +
                    std::to_string(row.step) + " (L_qual=" +
                    std::to_string(row.l_qual) + ", L_distil=" +
                    std::to_string(row.l_distil) + ")");

      student.params.zero_grad();
      qm.params.zero_grad();
      t.backward(total);
      student_opt.step(student.params);
      if (student.cfg.finetune_predictor) qm_opt.step(qm.params);
      report.rows.push_back(std::move(row));
      if (cfg.max_steps > 0 && int(report.rows.size()) >= cfg.max_steps)
        stop = true;
    }
  }

  // Held-out similarity per tapped layer plus the quality loss.
  if (!heldout.empty()) {
    report.final_heldout_cos.assign(student.cfg.tapped_teacher_layers.size(),
                                    0.0);
    std::vector<double> truth;
    std::vector<QualityPrediction> preds;
    for (const auto& ex : heldout) {
      ad::Tape t;
      auto fwd = student_forward_graph(t, student, t.constant(ex.tokens));
      for (std::size_t k = 0; k < ex.teacher_taps.size(); ++k) {
        auto sc = sigmoid_cosine_loss(ex.teacher_taps[k],
                                      t.val(fwd.head_outputs[k]));
        report.final_heldout_cos[k] += sc.similarity;
      }
      ad::Var feat = qm.adapter.apply(t, qm.params, fwd.fused);
      Mat hl(1, 8);
      for (int k = 0; k < 8; ++k) hl(0, k) = ex.hl_db[std::size_t(k)] / 100.0;
      ad::Var hl_block = t.constant(Mat(hl.replicate(t.val(feat).rows(), 1)));
      ad::Var fr = qm.predictor.build(t, qm.params,
                                      t.concat_cols({feat, hl_block}));
      QualityPrediction q;
      const Mat& f = t.val(fr);
      q.frame_scores.assign(f.data(), f.data() + f.size());
      q.clip_score = f.mean();
      preds.push_back(std::move(q));
      truth.push_back(ex.target);
    }
    for (auto& v : report.final_heldout_cos) v /= double(heldout.size());
    report.final_l_qual = quality_loss(truth, preds);
  }
  return report;
}

// Distilled-model prediction: the student's fused feature through the
// quality head's adapter and predictor.
inline QualityPrediction distilled_predict(Student& student, QualityModel& qm,
                                           const FeatureMatrix& fbank,
                                           const std::array<double, 8>& hl_db) {
  require(qm.cfg.kind != FeatureKind::kDirect,
          "distilled_predict: quality model must take encoder features");
  ad::Tape t;
  auto fwd = student_forward_graph(t, student,
                                   t.constant(patchify(fbank, student.enc_cfg)));
  ad::Var feat = qm.adapter.apply(t, qm.params, fwd.fused);
  Mat hl(1, 8);
  for (int k = 0; k < 8; ++k) hl(0, k) = hl_db[std::size_t(k)] / 100.0;
  ad::Var hl_block = t.constant(Mat(hl.replicate(t.val(feat).rows(), 1)));
  ad::Var fr = qm.predictor.build(t, qm.params, t.concat_cols({feat, hl_block}));
  QualityPrediction q;
  const Mat& f = t.val(fr);
  q.frame_scores.assign(f.data(), f.data() + f.size());
  q.clip_score = f.mean();
  return q;
}

// ---------------------------------------------------------------------------
// Student serialization
// ---------------------------------------------------------------------------

inline void save_student(const std::string& path, const Student& s) {
  nlohmann::json meta;
  meta["kind"] = "student";
  meta["student"] = to_json(s.cfg);
  meta["encoder"] = to_json(s.enc_cfg);
  save_weights(path, meta, s.params);
}

inline Student load_student(const std::string& path) {
  LoadedWeights w = load_weights(path);
  require(w.meta.at("kind") == "student", "student: wrong weights kind");
  Student s = detail::make_student_skeleton(
      encoder_config_from_json(w.meta.at("encoder")),
      student_config_from_json(w.meta.at("student")), /*seed=*/0);
  restore_params(s.params, w);
  return s;
}

}  // namespace haaqi
