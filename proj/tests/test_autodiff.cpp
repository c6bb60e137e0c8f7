#include <catch2/catch_amalgamated.hpp>

#include "haaqinet/autodiff.hpp"

#include "support/gradcheck.hpp"

using namespace haaqi;
using ad::Tape;
using ad::Var;

using testsupport::check_gradient;
using testsupport::random_mat;

TEST_CASE("numeric_gradient: quadratic and constant") {
  double p = 3.0;
  auto g = ad::numeric_gradient([&]() { return p * p; }, {&p}, 1e-4);
  REQUIRE(g[0] == Catch::Approx(6.0).margin(1e-6));
  auto gc = ad::numeric_gradient([&]() { return 42.0; }, {&p}, 1e-4);
  REQUIRE(gc[0] == 0.0);
}

TEST_CASE("elementwise ops match finite differences") {
  Rng rng(1);
  ad::ParamStore p;
  p.add("a", random_mat(3, 4, rng));
  p.add("b", random_mat(3, 4, rng));
  check_gradient(
      [&](Tape& t, ad::ParamStore& ps) {
        Var a = t.param(ps, 0), b = t.param(ps, 1);
        Var y = t.add(t.mul(a, b), t.sub(a, t.scale(b, 0.7)));
        return t.mean_all(t.mul(y, y));
      },
      p);
}

TEST_CASE("division and broadcasting match finite differences") {
  Rng rng(2);
  ad::ParamStore p;
  p.add("a", random_mat(4, 3, rng));
  Mat row = random_mat(1, 3, rng);
  row.array() += 3.0;  // keep the divisor away from zero
  p.add("row", row);
  p.add("scalar", Mat::Constant(1, 1, 1.5));
  check_gradient(
      [&](Tape& t, ad::ParamStore& ps) {
        Var a = t.param(ps, 0), r = t.param(ps, 1), s = t.param(ps, 2);
        Var y = t.div(t.add(a, r), r);
        y = t.mul(y, s);
        return t.sum_all(t.mul(y, y));
      },
      p);
}

TEST_CASE("matmul transpose slice concat match finite differences") {
  Rng rng(3);
  ad::ParamStore p;
  p.add("a", random_mat(4, 5, rng));
  p.add("b", random_mat(5, 3, rng));
  check_gradient(
      [&](Tape& t, ad::ParamStore& ps) {
        Var a = t.param(ps, 0), b = t.param(ps, 1);
        Var y = t.matmul(a, b);                       // 4x3
        Var top = t.slice_rows(y, 0, 2);              // 2x3
        Var bottom = t.slice_rows(y, 2, 2);           // 2x3
        Var z = t.concat_cols({top, t.transpose(t.slice_cols(bottom, 0, 2))
                                        ,
                               bottom});
        return t.mean_all(t.mul(z, z));
      },
      p);
}

TEST_CASE("nonlinearities match finite differences") {
  Rng rng(4);
  ad::ParamStore p;
  p.add("a", random_mat(3, 6, rng, 0.8));
  check_gradient(
      [&](Tape& t, ad::ParamStore& ps) {
        Var a = t.param(ps, 0);
        Var y = t.add(t.sigmoid(a), t.tanh_op(a));
        y = t.add(y, t.gelu(a));
        y = t.add(y, t.relu(t.add(a, t.scalar_constant(0.3))));
        return t.mean_all(t.mul(y, y));
      },
      p);
}

TEST_CASE("exp log sqrt abs match finite differences") {
  Rng rng(5);
  ad::ParamStore p;
  Mat a = random_mat(3, 3, rng, 0.4);
  a.array() += 2.0;  // positive domain for log/sqrt
  p.add("a", a);
  check_gradient(
      [&](Tape& t, ad::ParamStore& ps) {
        Var x = t.param(ps, 0);
        Var y = t.add(t.log_op(x), t.sqrt_op(x));
        y = t.add(y, t.exp_op(t.scale(x, -0.5)));
        y = t.add(y, t.abs_op(t.sub(x, t.scalar_constant(2.0))));
        return t.sum_all(y);
      },
      p);
}

TEST_CASE("softmax rows: probability vectors and gradient") {
  Rng rng(6);
  ad::ParamStore p;
  p.add("a", random_mat(5, 7, rng));
  {
    Tape t;
    Var y = t.softmax_rows(t.param(p, 0));
    const Mat& v = t.val(y);
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      REQUIRE(v.row(r).minCoeff() >= 0.0);
      REQUIRE(v.row(r).sum() == Catch::Approx(1.0).margin(1e-9));
    }
  }
  check_gradient(
      [&](Tape& t, ad::ParamStore& ps) {
        Var y = t.softmax_rows(t.param(ps, 0));
        return t.mean_all(t.mul(y, y));
      },
      p);
}

TEST_CASE("layer norm rows: zero mean, unit variance, gradient") {
  Rng rng(7);
  ad::ParamStore p;
  p.add("a", random_mat(6, 16, rng, 2.0));
  {
    Tape t;
    Var y = t.layer_norm_rows(t.param(p, 0));
    const Mat& v = t.val(y);
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      REQUIRE(v.row(r).mean() == Catch::Approx(0.0).margin(1e-5));
      double var = (v.row(r).array() - v.row(r).mean()).square().mean();
      REQUIRE(var == Catch::Approx(1.0).margin(1e-5));
    }
  }
  Mat w = random_mat(6, 16, rng);
  check_gradient(
      [&](Tape& t, ad::ParamStore& ps) {
        Var y = t.layer_norm_rows(t.param(ps, 0));
        return t.mean_all(t.mul(y, t.constant(w)));
      },
      p);
}

TEST_CASE("cosine similarity values and gradient") {
  {
    Tape t;
    Var a = t.constant(Mat::Ones(2, 3));
    Var b = t.constant(Mat::Ones(2, 3));
    REQUIRE(t.scalar(ad::cosine_similarity(t, a, b)) ==
            Catch::Approx(1.0).margin(1e-12));
  }
  Rng rng(8);
  ad::ParamStore p;
  p.add("a", random_mat(2, 5, rng));
  p.add("b", random_mat(2, 5, rng));
  check_gradient(
      [&](Tape& t, ad::ParamStore& ps) {
        return ad::cosine_similarity(t, t.param(ps, 0), t.param(ps, 1));
      },
      p);
}

TEST_CASE("adam converges on a quadratic") {
  ad::ParamStore p;
  p.add("x", Mat::Constant(1, 1, 5.0));
  ad::AdamConfig cfg;
  cfg.lr = 0.1;
  ad::Adam opt(cfg);
  for (int i = 0; i < 500; ++i) {
    p.zero_grad();
    Tape t;
    Var x = t.param(p, 0);
    Var loss = t.mul(x, x);
    t.backward(loss);
    opt.step(p);
  }
  REQUIRE(std::abs(p.value(0)(0, 0)) < 1e-3);
}
