#pragma once

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "haaqinet/common.hpp"

namespace haaqi::ad {

// Reverse-mode autodiff over Eigen matrices. A Tape owns the computation
// graph for one forward pass; Vars are handles into it. Graphs are rebuilt
// every step, parameters live in a ParamStore across steps.

struct Var {
  int idx = -1;
  bool valid() const { return idx >= 0; }
};

class ParamStore {
 public:
  int add(const std::string& name, Mat value) {
    require(index_.find(name) == index_.end(),
            "params: duplicate name " + name);
    index_[name] = int(names_.size());
    names_.push_back(name);
    grads_.push_back(Mat::Zero(value.rows(), value.cols()));
    values_.push_back(std::move(value));
    return int(values_.size()) - 1;
  }

  int index_of(const std::string& name) const {
    auto it = index_.find(name);
    require(it != index_.end(), "params: unknown name " + name);
    return it->second;
  }

  bool contains(const std::string& name) const {
    return index_.find(name) != index_.end();
  }

  int size() const { return int(values_.size()); }
  const std::string& name(int i) const { return names_[std::size_t(i)]; }
  Mat& value(int i) { return values_[std::size_t(i)]; }
  const Mat& value(int i) const { return values_[std::size_t(i)]; }
  Mat& value(const std::string& name) { return values_[std::size_t(index_of(name))]; }
  const Mat& value(const std::string& name) const {
    return values_[std::size_t(index_of(name))];
  }
  Mat& grad(int i) { return grads_[std::size_t(i)]; }

  void zero_grad() {
    for (auto& g : grads_) g.setZero();
  }

  std::size_t coefficient_count() const {
    std::size_t n = 0;
    for (const auto& v : values_) n += std::size_t(v.size());
    return n;
  }

  // Addresses of every parameter coefficient, in a stable order. Used by the
  // finite-difference oracle and the serializer.
  std::vector<double*> coefficient_pointers() {
    std::vector<double*> out;
    out.reserve(coefficient_count());
    for (auto& v : values_)
      for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v.data() + i);
    return out;
  }

  std::vector<double> flat_gradient() const {
    std::vector<double> out;
    out.reserve(coefficient_count());
    for (const auto& g : grads_)
      for (Eigen::Index i = 0; i < g.size(); ++i) out.push_back(*(g.data() + i));
    return out;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Mat> values_;
  std::vector<Mat> grads_;
  std::map<std::string, int> index_;
};

class Tape {
 public:
  Tape() { nodes_.reserve(1024); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }

  const Mat& val(Var v) const { return nodes_[std::size_t(v.idx)].val; }
  const Mat& grad_of(Var v) const { return nodes_[std::size_t(v.idx)].grad; }
  double scalar(Var v) const {
    const Mat& m = val(v);
    require(m.size() == 1, "tape: expected scalar node");
    return m(0, 0);
  }

  Var constant(Mat v) { return push(std::move(v), {}); }

  Var scalar_constant(double v) {
    Mat m(1, 1);
    m(0, 0) = v;
    return push(std::move(m), {});
  }

  // Leaf bound to a parameter; backward accumulates into the store.
  Var param(ParamStore& store, int pidx) {
    Var out = push(store.value(pidx), {});
    ParamStore* sp = &store;
    int node = out.idx;
    nodes_[std::size_t(node)].back = [this, sp, pidx, node]() {
      sp->grad(pidx) += nodes_[std::size_t(node)].grad;
    };
    return out;
  }

  // -- elementwise binary ops with scalar/row broadcasting -------------------

  Var add(Var a, Var b) { return binary(a, b, Op::kAdd); }
  Var sub(Var a, Var b) { return binary(a, b, Op::kSub); }
  Var mul(Var a, Var b) { return binary(a, b, Op::kMul); }
  Var div(Var a, Var b) { return binary(a, b, Op::kDiv); }

  Var scale(Var a, double c) {
    Var out = push(val(a) * c, {a});
    attach(out, [this, a, c, out]() { accum(a, nodes_[std::size_t(out.idx)].grad * c); });
    return out;
  }

  Var neg(Var a) { return scale(a, -1.0); }

  // -- matrix ops -------------------------------------------------------------

  Var matmul(Var a, Var b) {
    require(val(a).cols() == val(b).rows(), "tape: matmul shape mismatch");
    Var out = push(val(a) * val(b), {a, b});
    attach(out, [this, a, b, out]() {
      const Mat& g = nodes_[std::size_t(out.idx)].grad;
      accum(a, g * val(b).transpose());
      accum(b, val(a).transpose() * g);
    });
    return out;
  }

  Var transpose(Var a) {
    Var out = push(val(a).transpose(), {a});
    attach(out, [this, a, out]() {
      accum(a, nodes_[std::size_t(out.idx)].grad.transpose());
    });
    return out;
  }

  Var slice_rows(Var a, Eigen::Index r0, Eigen::Index n) {
    require(r0 >= 0 && r0 + n <= val(a).rows(), "tape: row slice out of range");
    Var out = push(val(a).middleRows(r0, n), {a});
    attach(out, [this, a, r0, n, out]() {
      Mat& ga = ensure_grad(a);
      ga.middleRows(r0, n) += nodes_[std::size_t(out.idx)].grad;
    });
    return out;
  }

  Var slice_cols(Var a, Eigen::Index c0, Eigen::Index n) {
    require(c0 >= 0 && c0 + n <= val(a).cols(), "tape: col slice out of range");
    Var out = push(val(a).middleCols(c0, n), {a});
    attach(out, [this, a, c0, n, out]() {
      Mat& ga = ensure_grad(a);
      ga.middleCols(c0, n) += nodes_[std::size_t(out.idx)].grad;
    });
    return out;
  }

  Var concat_rows(const std::vector<Var>& parts) {
    require(!parts.empty(), "tape: empty concat");
    Eigen::Index rows = 0, cols = val(parts[0]).cols();
    for (Var p : parts) {
      require(val(p).cols() == cols, "tape: concat_rows width mismatch");
      rows += val(p).rows();
    }
    Mat v(rows, cols);
    Eigen::Index r = 0;
    for (Var p : parts) {
      v.middleRows(r, val(p).rows()) = val(p);
      r += val(p).rows();
    }
    Var out = push(std::move(v), parts);
    std::vector<Var> ps = parts;
    attach(out, [this, ps, out]() {
      const Mat& g = nodes_[std::size_t(out.idx)].grad;
      Eigen::Index r0 = 0;
      for (Var p : ps) {
        Eigen::Index n = val(p).rows();
        accum(p, g.middleRows(r0, n));
        r0 += n;
      }
    });
    return out;
  }

  Var concat_cols(const std::vector<Var>& parts) {
    require(!parts.empty(), "tape: empty concat");
    Eigen::Index cols = 0, rows = val(parts[0]).rows();
    for (Var p : parts) {
      require(val(p).rows() == rows, "tape: concat_cols height mismatch");
      cols += val(p).cols();
    }
    Mat v(rows, cols);
    Eigen::Index c = 0;
    for (Var p : parts) {
      v.middleCols(c, val(p).cols()) = val(p);
      c += val(p).cols();
    }
    Var out = push(std::move(v), parts);
    std::vector<Var> ps = parts;
    attach(out, [this, ps, out]() {
      const Mat& g = nodes_[std::size_t(out.idx)].grad;
      Eigen::Index c0 = 0;
      for (Var p : ps) {
        Eigen::Index n = val(p).cols();
        accum(p, g.middleCols(c0, n));
        c0 += n;
      }
    });
    return out;
  }

  // -- elementwise nonlinearities ----------------------------------------------

  Var sigmoid(Var a) {
    Mat y = (1.0 / (1.0 + (-val(a).array()).exp())).matrix();
    Var out = push(std::move(y), {a});
    attach(out, [this, a, out]() {
      const Mat& y2 = nodes_[std::size_t(out.idx)].val;
      accum(a, (nodes_[std::size_t(out.idx)].grad.array() * y2.array() *
                (1.0 - y2.array()))
                   .matrix());
    });
    return out;
  }

  Var tanh_op(Var a) {
    Mat y = val(a).array().tanh().matrix();
    Var out = push(std::move(y), {a});
    attach(out, [this, a, out]() {
      const Mat& y2 = nodes_[std::size_t(out.idx)].val;
      accum(a, (nodes_[std::size_t(out.idx)].grad.array() *
                (1.0 - y2.array().square()))
                   .matrix());
    });
    return out;
  }

  Var relu(Var a) {
    Mat y = val(a).cwiseMax(0.0);
    Var out = push(std::move(y), {a});
    attach(out, [this, a, out]() {
      accum(a, (nodes_[std::size_t(out.idx)].grad.array() *
                (val(a).array() > 0.0).cast<double>())
                   .matrix());
    });
    return out;
  }

  Var gelu(Var a) {
    auto cdf_fn = [](double x) { return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))); };
    Mat y = (val(a).array() * val(a).array().unaryExpr(cdf_fn)).matrix();
    Var out = push(std::move(y), {a});
    attach(out, [this, a, out, cdf_fn]() {
      auto x = val(a).array();
      auto phi = (-0.5 * x.square()).exp() / std::sqrt(2.0 * M_PI);
      auto cdf = x.unaryExpr(cdf_fn);
      accum(a, (nodes_[std::size_t(out.idx)].grad.array() * (cdf + x * phi))
                   .matrix());
    });
    return out;
  }

  Var exp_op(Var a) {
    Var out = push(val(a).array().exp().matrix(), {a});
    attach(out, [this, a, out]() {
      accum(a, (nodes_[std::size_t(out.idx)].grad.array() *
                nodes_[std::size_t(out.idx)].val.array())
                   .matrix());
    });
    return out;
  }

  Var log_op(Var a) {
    Var out = push(val(a).array().log().matrix(), {a});
    attach(out, [this, a, out]() {
      accum(a, (nodes_[std::size_t(out.idx)].grad.array() / val(a).array())
                   .matrix());
    });
    return out;
  }

  Var abs_op(Var a) {
    Var out = push(val(a).array().abs().matrix(), {a});
    attach(out, [this, a, out]() {
      accum(a, (nodes_[std::size_t(out.idx)].grad.array() *
                val(a).array().sign())
                   .matrix());
    });
    return out;
  }

  Var sqrt_op(Var a) {
    Var out = push(val(a).array().sqrt().matrix(), {a});
    attach(out, [this, a, out]() {
      accum(a, (nodes_[std::size_t(out.idx)].grad.array() * 0.5 /
                nodes_[std::size_t(out.idx)].val.array())
                   .matrix());
    });
    return out;
  }

  Var square(Var a) { return mul(a, a); }

  // -- reductions and structured ops -------------------------------------------

  Var sum_all(Var a) {
    Mat v(1, 1);
    v(0, 0) = val(a).sum();
    Var out = push(std::move(v), {a});
    attach(out, [this, a, out]() {
      double g = nodes_[std::size_t(out.idx)].grad(0, 0);
      accum(a, Mat::Constant(val(a).rows(), val(a).cols(), g));
    });
    return out;
  }

  Var mean_all(Var a) {
    return scale(sum_all(a), 1.0 / double(val(a).size()));
  }

  Var softmax_rows(Var a) {
    Mat y = val(a);
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      double m = y.row(r).maxCoeff();
      y.row(r) = (y.row(r).array() - m).exp();
      y.row(r) /= y.row(r).sum();
    }
    Var out = push(std::move(y), {a});
    attach(out, [this, a, out]() {
      const Mat& y2 = nodes_[std::size_t(out.idx)].val;
      const Mat& g = nodes_[std::size_t(out.idx)].grad;
      Mat dx(y2.rows(), y2.cols());
      for (Eigen::Index r = 0; r < y2.rows(); ++r) {
        double dot = (g.row(r).array() * y2.row(r).array()).sum();
        dx.row(r) = (y2.row(r).array() * (g.row(r).array() - dot)).matrix();
      }
      accum(a, dx);
    });
    return out;
  }

  // Row-wise layer norm without learned affine; gamma/beta compose on top.
  Var layer_norm_rows(Var a, double eps = 1e-5) {
    const Mat& x = val(a);
    Mat y(x.rows(), x.cols());
    Mat inv_std(x.rows(), 1);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      double mean = x.row(r).mean();
      double var = (x.row(r).array() - mean).square().mean();
      double s = 1.0 / std::sqrt(var + eps);
      inv_std(r, 0) = s;
      y.row(r) = ((x.row(r).array() - mean) * s).matrix();
    }
    Var out = push(std::move(y), {a});
    Mat inv = std::move(inv_std);
    attach(out, [this, a, out, inv]() {
      const Mat& y2 = nodes_[std::size_t(out.idx)].val;
      const Mat& g = nodes_[std::size_t(out.idx)].grad;
      Mat dx(y2.rows(), y2.cols());
      for (Eigen::Index r = 0; r < y2.rows(); ++r) {
        double gmean = g.row(r).mean();
        double gymean = (g.row(r).array() * y2.row(r).array()).mean();
        dx.row(r) = (inv(r, 0) *
                     (g.row(r).array() - gmean - y2.row(r).array() * gymean))
                        .matrix();
      }
      accum(a, dx);
    });
    return out;
  }

  // -- backward -----------------------------------------------------------------

  void backward(Var loss) {
    require(val(loss).size() == 1, "tape: backward needs a scalar loss");
    for (auto& n : nodes_) n.grad.resize(0, 0);
    ensure_grad(loss)(0, 0) = 1.0;
    for (int i = int(nodes_.size()) - 1; i >= 0; --i) {
      Node& n = nodes_[std::size_t(i)];
      if (n.grad.size() > 0 && n.back) n.back();
    }
  }

 private:
  struct Node {
    Mat val;
    Mat grad;
    std::function<void()> back;
  };

  enum class Op { kAdd, kSub, kMul, kDiv };

  Var push(Mat v, const std::vector<Var>&) {
    nodes_.push_back(Node{std::move(v), Mat(), nullptr});
    return Var{int(nodes_.size()) - 1};
  }

  void attach(Var v, std::function<void()> f) {
    nodes_[std::size_t(v.idx)].back = std::move(f);
  }

  Mat& ensure_grad(Var v) {
    Node& n = nodes_[std::size_t(v.idx)];
    if (n.grad.size() == 0)
      n.grad = Mat::Zero(n.val.rows(), n.val.cols());
    return n.grad;
  }

  void accum(Var v, const Mat& g) {
    const Mat& tv = val(v);
    Mat& gv = ensure_grad(v);
    if (g.rows() == tv.rows() && g.cols() == tv.cols()) {
      gv += g;
    } else if (tv.size() == 1) {
      gv(0, 0) += g.sum();
    } else if (tv.rows() == 1 && g.cols() == tv.cols()) {
      gv += g.colwise().sum();
    } else {
      throw Error("tape: gradient shape mismatch");
    }
  }

  // Broadcast b over a: shapes must match, or b is 1x1, or b is a row vector
  // with matching width.
  static bool broadcastable(const Mat& a, const Mat& b) {
    if (a.rows() == b.rows() && a.cols() == b.cols()) return true;
    if (b.size() == 1) return true;
    if (b.rows() == 1 && b.cols() == a.cols()) return true;
    return false;
  }

  static Mat expand(const Mat& b, Eigen::Index rows, Eigen::Index cols) {
    if (b.rows() == rows && b.cols() == cols) return b;
    if (b.size() == 1) return Mat::Constant(rows, cols, b(0, 0));
    return b.replicate(rows, 1);
  }

  Var binary(Var a, Var b, Op op) {
    const Mat& av = val(a);
    const Mat& bv = val(b);
    bool swap = false;
    if (!broadcastable(av, bv)) {
      require(broadcastable(bv, av), "tape: shapes not broadcastable");
      swap = true;
    }
    const Mat& big = swap ? bv : av;
    Mat bx = expand(swap ? av : bv, big.rows(), big.cols());
    const Mat& ax = big;
    Mat v;
    switch (op) {
      case Op::kAdd: v = swap ? (bx + ax).eval() : (ax + bx).eval(); break;
      case Op::kSub: v = swap ? (bx - ax).eval() : (ax - bx).eval(); break;
      case Op::kMul: v = ax.cwiseProduct(bx); break;
      case Op::kDiv:
        v = swap ? bx.cwiseQuotient(ax) : ax.cwiseQuotient(bx);
        break;
    }
    Var out = push(std::move(v), {a, b});
    attach(out, [this, a, b, op, out]() {
      const Mat& g = nodes_[std::size_t(out.idx)].grad;
      const Mat& av2 = val(a);
      const Mat& bv2 = val(b);
      Eigen::Index rows = g.rows(), cols = g.cols();
      Mat ax2 = expand(av2, rows, cols);
      Mat bx2 = expand(bv2, rows, cols);
      switch (op) {
        case Op::kAdd:
          accum(a, g);
          accum(b, g);
          break;
        case Op::kSub:
          accum(a, g);
          accum(b, -g);
          break;
        case Op::kMul:
          accum(a, g.cwiseProduct(bx2));
          accum(b, g.cwiseProduct(ax2));
          break;
        case Op::kDiv:
          accum(a, g.cwiseQuotient(bx2));
          accum(b, (-g.array() * ax2.array() / bx2.array().square()).matrix());
          break;
      }
    });
    return out;
  }

  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Composite helpers
// ---------------------------------------------------------------------------

// Cosine similarity of two matrices flattened to vectors; errors on zero norm.
inline Var cosine_similarity(Tape& t, Var a, Var b) {
  require(t.val(a).norm() > 0 && t.val(b).norm() > 0,
          "cosine: zero-norm input");
  Var dot = t.sum_all(t.mul(a, b));
  Var na = t.sqrt_op(t.sum_all(t.mul(a, a)));
  Var nb = t.sqrt_op(t.sum_all(t.mul(b, b)));
  return t.div(dot, t.mul(na, nb));
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = AdamConfig{}) : cfg_(cfg) {}

  void step(ParamStore& params) {
    if (m_.empty()) {
      for (int i = 0; i < params.size(); ++i) {
        m_.push_back(Mat::Zero(params.value(i).rows(), params.value(i).cols()));
        v_.push_back(Mat::Zero(params.value(i).rows(), params.value(i).cols()));
      }
    }
    ++t_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (int i = 0; i < params.size(); ++i) {
      const Mat& g = params.grad(i);
      m_[std::size_t(i)] = cfg_.beta1 * m_[std::size_t(i)] + (1 - cfg_.beta1) * g;
      v_[std::size_t(i)] =
          (cfg_.beta2 * v_[std::size_t(i)].array() +
           (1 - cfg_.beta2) * g.array().square())
              .matrix();
      params.value(i).array() -=
          cfg_.lr * (m_[std::size_t(i)].array() / bc1) /
          ((v_[std::size_t(i)].array() / bc2).sqrt() + cfg_.eps);
    }
  }

  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  int t_ = 0;
  std::vector<Mat> m_, v_;
};

// Mask-aware Adam variant: skips parameters listed as frozen.
class MaskedAdam {
 public:
  MaskedAdam(AdamConfig cfg, std::vector<bool> trainable)
      : adam_(cfg), trainable_(std::move(trainable)) {}

  void step(ParamStore& params) {
    require(int(trainable_.size()) == params.size(), "adam: mask size mismatch");
    for (int i = 0; i < params.size(); ++i)
      if (!trainable_[std::size_t(i)]) params.grad(i).setZero();
    adam_.step(params);
  }

 private:
  Adam adam_;
  std::vector<bool> trainable_;
};

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

// Central differences over an explicit coefficient view. The loss closure is
// re-evaluated with perturbed coefficients; it must not cache state.
inline std::vector<double> numeric_gradient(
    const std::function<double()>& loss_fn, const std::vector<double*>& params,
    double eps) {
  require(eps > 0.0, "numeric_gradient: eps must be positive");
  {
    double base = loss_fn();
    require(std::isfinite(base), "numeric_gradient: loss not finite");
  }
  std::vector<double> grad(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    double orig = *params[i];
    *params[i] = orig + eps;
    double fp = loss_fn();
    *params[i] = orig - eps;
    double fm = loss_fn();
    *params[i] = orig;
    require(std::isfinite(fp) && std::isfinite(fm),
            "numeric_gradient: loss not finite at probe point");
    grad[i] = (fp - fm) / (2.0 * eps);
  }
  return grad;
}

}  // namespace haaqi::ad
