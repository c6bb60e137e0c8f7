#pragma once

#include <string>
#include <vector>

#include "haaqinet/autodiff.hpp"

namespace haaqi::nn {

using ad::ParamStore;
using ad::Tape;
using ad::Var;

// ---------------------------------------------------------------------------
// Initializers
// ---------------------------------------------------------------------------

inline Mat xavier_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  double a = std::sqrt(6.0 / double(rows + cols));
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i)
    *(m.data() + i) = rng.uniform(-a, a);
  return m;
}

inline Mat zeros(Eigen::Index rows, Eigen::Index cols) {
  return Mat::Zero(rows, cols);
}

// ---------------------------------------------------------------------------
// Linear layer: y = x W + b, W stored input-major (in x out).
// ---------------------------------------------------------------------------

struct Linear {
  int w = -1, b = -1;

  static Linear create(ParamStore& p, const std::string& name, Eigen::Index in,
                       Eigen::Index out, Rng& rng) {
    Linear l;
    l.w = p.add(name + ".w", xavier_uniform(in, out, rng));
    l.b = p.add(name + ".b", zeros(1, out));
    return l;
  }

  static Linear identity(ParamStore& p, const std::string& name,
                         Eigen::Index dim) {
    Linear l;
    l.w = p.add(name + ".w", Mat::Identity(dim, dim));
    l.b = p.add(name + ".b", zeros(1, dim));
    return l;
  }

  Var apply(Tape& t, ParamStore& p, Var x) const {
    return t.add(t.matmul(x, t.param(p, w)), t.param(p, b));
  }
};

// Layer norm with learned gain/offset.
struct LayerNorm {
  int gamma = -1, beta = -1;

  static LayerNorm create(ParamStore& p, const std::string& name,
                          Eigen::Index dim) {
    LayerNorm ln;
    ln.gamma = p.add(name + ".gamma", Mat::Ones(1, dim));
    ln.beta = p.add(name + ".beta", zeros(1, dim));
    return ln;
  }

  Var apply(Tape& t, ParamStore& p, Var x) const {
    Var normed = t.layer_norm_rows(x);
    return t.add(t.mul(normed, t.param(p, gamma)), t.param(p, beta));
  }
};

// ---------------------------------------------------------------------------
// Multi-head self-attention
// ---------------------------------------------------------------------------

struct MultiHeadAttention {
  Linear q, k, v, out;
  int heads = 1;
  Eigen::Index dim = 0;

  static MultiHeadAttention create(ParamStore& p, const std::string& name,
                                   Eigen::Index dim, int heads, Rng& rng) {
    require(dim % heads == 0, "attention: head count must divide model dim");
    MultiHeadAttention a;
    a.q = Linear::create(p, name + ".q", dim, dim, rng);
    a.k = Linear::create(p, name + ".k", dim, dim, rng);
    a.v = Linear::create(p, name + ".v", dim, dim, rng);
    a.out = Linear::create(p, name + ".out", dim, dim, rng);
    a.heads = heads;
    a.dim = dim;
    return a;
  }

  // attn_probe, when non-null, receives each head's row-stochastic attention
  // matrix for inspection in tests.
  Var apply(Tape& t, ParamStore& p, Var x,
            std::vector<Mat>* attn_probe = nullptr) const {
    const Eigen::Index hd = dim / heads;
    Var qs = q.apply(t, p, x);
    Var ks = k.apply(t, p, x);
    Var vs = v.apply(t, p, x);
    std::vector<Var> ctx;
    ctx.reserve(std::size_t(heads));
    const double inv_sqrt = 1.0 / std::sqrt(double(hd));
    for (int h = 0; h < heads; ++h) {
      Var qh = t.slice_cols(qs, h * hd, hd);
      Var kh = t.slice_cols(ks, h * hd, hd);
      Var vh = t.slice_cols(vs, h * hd, hd);
      Var scores = t.scale(t.matmul(qh, t.transpose(kh)), inv_sqrt);
      Var att = t.softmax_rows(scores);
      if (attn_probe) attn_probe->push_back(t.val(att));
      ctx.push_back(t.matmul(att, vh));
    }
    return out.apply(t, p, t.concat_cols(ctx));
  }
};

// ---------------------------------------------------------------------------
// Pre-norm transformer encoder layer
// ---------------------------------------------------------------------------

struct TransformerLayer {
  LayerNorm ln1, ln2;
  MultiHeadAttention attn;
  Linear ff1, ff2;

  static TransformerLayer create(ParamStore& p, const std::string& name,
                                 Eigen::Index dim, int heads,
                                 Eigen::Index ff_dim, Rng& rng) {
    TransformerLayer l;
    l.ln1 = LayerNorm::create(p, name + ".ln1", dim);
    l.attn = MultiHeadAttention::create(p, name + ".attn", dim, heads, rng);
    l.ln2 = LayerNorm::create(p, name + ".ln2", dim);
    l.ff1 = Linear::create(p, name + ".ff1", dim, ff_dim, rng);
    l.ff2 = Linear::create(p, name + ".ff2", ff_dim, dim, rng);
    return l;
  }

  Var apply(Tape& t, ParamStore& p, Var x,
            std::vector<Mat>* attn_probe = nullptr) const {
    Var u = t.add(x, attn.apply(t, p, ln1.apply(t, p, x), attn_probe));
    Var ff = ff2.apply(t, p, t.gelu(ff1.apply(t, p, ln2.apply(t, p, u))));
    return t.add(u, ff);
  }
};

// ---------------------------------------------------------------------------
// Bidirectional LSTM
// ---------------------------------------------------------------------------

struct LstmDirection {
  int w_ih = -1, w_hh = -1, bias = -1;
  Eigen::Index hidden = 0;

  static LstmDirection create(ParamStore& p, const std::string& name,
                              Eigen::Index input, Eigen::Index hidden,
                              Rng& rng) {
    LstmDirection d;
    d.w_ih = p.add(name + ".w_ih", xavier_uniform(input, 4 * hidden, rng));
    d.w_hh = p.add(name + ".w_hh", xavier_uniform(hidden, 4 * hidden, rng));
    Mat b = zeros(1, 4 * hidden);
    b.middleCols(hidden, hidden).setOnes();  // forget-gate bias at 1
    d.bias = p.add(name + ".b", std::move(b));
    d.hidden = hidden;
    return d;
  }

  // Returns the T x hidden state sequence in input order.
  // reverse=true runs the recurrence back to front.
  Var apply(Tape& t, ParamStore& p, Var x, bool reverse) const {
    const Eigen::Index T = t.val(x).rows();
    const Eigen::Index H = hidden;
    // The input transform is one big matmul; the loop handles the recurrence.
    Var xw = t.add(t.matmul(x, t.param(p, w_ih)), t.param(p, bias));
    Var whh = t.param(p, w_hh);
    Var h = t.constant(Mat::Zero(1, H));
    Var c = t.constant(Mat::Zero(1, H));
    std::vector<Var> states(static_cast<std::size_t>(T));
    for (Eigen::Index step = 0; step < T; ++step) {
      Eigen::Index idx = reverse ? T - 1 - step : step;
      Var z = t.add(t.slice_rows(xw, idx, 1), t.matmul(h, whh));
      Var i = t.sigmoid(t.slice_cols(z, 0, H));
      Var f = t.sigmoid(t.slice_cols(z, H, H));
      Var g = t.tanh_op(t.slice_cols(z, 2 * H, H));
      Var o = t.sigmoid(t.slice_cols(z, 3 * H, H));
      c = t.add(t.mul(f, c), t.mul(i, g));
      h = t.mul(o, t.tanh_op(c));
      states[std::size_t(idx)] = h;
    }
    return t.concat_rows(states);
  }
};

struct Blstm {
  LstmDirection fwd, bwd;

  static Blstm create(ParamStore& p, const std::string& name,
                      Eigen::Index input, Eigen::Index hidden, Rng& rng) {
    Blstm b;
    b.fwd = LstmDirection::create(p, name + ".fwd", input, hidden, rng);
    b.bwd = LstmDirection::create(p, name + ".bwd", input, hidden, rng);
    return b;
  }

  Var apply(Tape& t, ParamStore& p, Var x) const {
    return t.concat_cols({fwd.apply(t, p, x, false), bwd.apply(t, p, x, true)});
  }
};

}  // namespace haaqi::nn
