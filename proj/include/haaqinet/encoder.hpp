#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "haaqinet/features.hpp"
#include "haaqinet/nn.hpp"

namespace haaqi {

// Desk-scale stand-in for a 12-layer transformer audio encoder. The layer
// structure (patch embedding -> layer norm -> pre-norm encoder stack, with
// every layer's output exposed) matches the teacher the distiller taps at
// layers 6/9/12; dimensions are configurable.
struct EncoderConfig {
  int num_layers = 12;
  int model_dim = 96;
  int num_heads = 4;
  int ff_dim = 192;
  int mel_bins = 64;
  int patch_frames = 4;
  int patch_bins = 16;
};

inline void validate(const EncoderConfig& c) {
  require(c.num_layers >= 1, "encoder: num_layers >= 1");
  require(c.model_dim % c.num_heads == 0,
          "encoder: model_dim must be divisible by num_heads");
  require(c.mel_bins % c.patch_bins == 0,
          "encoder: mel_bins must be divisible by patch_bins");
  require(c.patch_frames >= 1 && c.patch_bins >= 1, "encoder: bad patch");
}

inline nlohmann::json to_json(const EncoderConfig& c) {
  return {{"num_layers", c.num_layers}, {"model_dim", c.model_dim},
          {"num_heads", c.num_heads},   {"ff_dim", c.ff_dim},
          {"mel_bins", c.mel_bins},     {"patch_frames", c.patch_frames},
          {"patch_bins", c.patch_bins}};
}

inline EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.num_layers = j.at("num_layers").get<int>();
  c.model_dim = j.at("model_dim").get<int>();
  c.num_heads = j.at("num_heads").get<int>();
  c.ff_dim = j.at("ff_dim").get<int>();
  c.mel_bins = j.at("mel_bins").get<int>();
  c.patch_frames = j.at("patch_frames").get<int>();
  c.patch_bins = j.at("patch_bins").get<int>();
  validate(c);
  return c;
}

// Tile the T x mel_bins filterbank into flattened patches, time-major outer,
// frequency inner. Trailing frames that do not fill a patch are dropped.
inline Mat patchify(const FeatureMatrix& fb, const EncoderConfig& cfg) {
  require(fb.cols() == cfg.mel_bins, "patchify: mel bin mismatch");
  const Eigen::Index tg = fb.rows() / cfg.patch_frames;
  const Eigen::Index fg = cfg.mel_bins / cfg.patch_bins;
  require(tg >= 1, "patchify: input shorter than one patch");
  Mat out(tg * fg, Eigen::Index(cfg.patch_frames) * cfg.patch_bins);
  for (Eigen::Index ti = 0; ti < tg; ++ti) {
    for (Eigen::Index fi = 0; fi < fg; ++fi) {
      Eigen::Index row = ti * fg + fi;
      for (Eigen::Index a = 0; a < cfg.patch_frames; ++a)
        for (Eigen::Index b = 0; b < cfg.patch_bins; ++b)
          out(row, a * cfg.patch_bins + b) =
              fb(ti * cfg.patch_frames + a, fi * cfg.patch_bins + b);
    }
  }
  return out;
}

struct Encoder {
  EncoderConfig cfg;
  nn::Linear patch_embed;
  nn::LayerNorm post_embed_norm;
  std::vector<nn::TransformerLayer> layers;

  static Encoder create(ad::ParamStore& p, const EncoderConfig& cfg,
                        std::uint64_t seed, const std::string& prefix) {
    validate(cfg);
    Rng rng(derive_seed(seed, prefix + "/init"));
    Encoder e;
    e.cfg = cfg;
    e.patch_embed = nn::Linear::create(
        p, prefix + ".pe", Eigen::Index(cfg.patch_frames) * cfg.patch_bins,
        cfg.model_dim, rng);
    e.post_embed_norm = nn::LayerNorm::create(p, prefix + ".pe_ln", cfg.model_dim);
    for (int i = 0; i < cfg.num_layers; ++i)
      e.layers.push_back(nn::TransformerLayer::create(
          p, prefix + ".layer" + std::to_string(i), cfg.model_dim,
          cfg.num_heads, cfg.ff_dim, rng));
    return e;
  }

  // Builds the encoder graph over already-patchified tokens and returns one
  // Var per transformer layer output. upto limits the depth (student trunks).
  std::vector<ad::Var> build(ad::Tape& t, ad::ParamStore& p, ad::Var tokens,
                             int upto = -1,
                             std::vector<Mat>* attn_probe = nullptr) const {
    int depth = upto < 0 ? int(layers.size()) : upto;
    require(depth >= 1 && depth <= int(layers.size()), "encoder: bad depth");
    ad::Var x = post_embed_norm.apply(t, p, patch_embed.apply(t, p, tokens));
    std::vector<ad::Var> outs;
    outs.reserve(std::size_t(depth));
    for (int i = 0; i < depth; ++i) {
      x = layers[std::size_t(i)].apply(t, p, x, attn_probe);
      outs.push_back(x);
    }
    return outs;
  }
};

// Per-layer feature matrices from a frozen encoder; plain values, no graph.
struct LayerOutputs {
  std::vector<Mat> layers;  // one T' x model_dim matrix per encoder layer
};

inline LayerOutputs encoder_forward(const FeatureMatrix& fbank,
                                    const Encoder& enc, ad::ParamStore& params,
                                    std::vector<Mat>* attn_probe = nullptr) {
  ad::Tape t;
  ad::Var tokens = t.constant(patchify(fbank, enc.cfg));
  auto vars = enc.build(t, params, tokens, -1, attn_probe);
  LayerOutputs out;
  out.layers.reserve(vars.size());
  for (auto v : vars) out.layers.push_back(t.val(v));
  return out;
}

// ---------------------------------------------------------------------------
// Softmax-weighted fusion of layer outputs: each layer is layer-normed, then
// scaled by its softmax weight and summed.
// ---------------------------------------------------------------------------

inline ad::Var weighted_sum_graph(ad::Tape& t, const std::vector<ad::Var>& layers,
                                  ad::Var logits) {
  require(!layers.empty(), "weighted_sum: no layers");
  require(t.val(logits).rows() == 1 &&
              t.val(logits).cols() == Eigen::Index(layers.size()),
          "weighted_sum: logit count must match layer count");
  ad::Var w = t.softmax_rows(logits);
  ad::Var acc;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    ad::Var term = t.mul(t.layer_norm_rows(layers[i]),
                         t.slice_cols(w, Eigen::Index(i), 1));
    acc = i == 0 ? term : t.add(acc, term);
  }
  return acc;
}

inline FeatureMatrix weighted_sum(const LayerOutputs& lo, const Vec& logits) {
  require(Eigen::Index(lo.layers.size()) == logits.size(),
          "weighted_sum: logit count must match layer count");
  for (Eigen::Index i = 0; i < logits.size(); ++i)
    require(std::isfinite(logits[i]), "weighted_sum: non-finite logit");
  ad::Tape t;
  std::vector<ad::Var> vars;
  vars.reserve(lo.layers.size());
  for (const auto& m : lo.layers) vars.push_back(t.constant(m));
  ad::Var lg = t.constant(logits.transpose());
  return t.val(weighted_sum_graph(t, vars, lg));
}

// ---------------------------------------------------------------------------
// Adapter: affine projection onto the predictor's feature width.
// ---------------------------------------------------------------------------

struct AdapterWeights {
  Mat w;  // in x out
  Mat b;  // 1 x out
};

inline FeatureMatrix adapt(const FeatureMatrix& x, const AdapterWeights& a) {
  require(x.cols() == a.w.rows(), "adapt: feature width mismatch");
  require(a.b.rows() == 1 && a.b.cols() == a.w.cols(), "adapt: bad bias shape");
  return (x * a.w).rowwise() + a.b.row(0);
}

}  // namespace haaqi
