#include <catch2/catch_amalgamated.hpp>

#include "haaqinet/model.hpp"
#include "haaqinet/predictor.hpp"
#include "support/gradcheck.hpp"

using namespace haaqi;
using testsupport::check_gradient;
using testsupport::random_mat;

namespace {

PredictorConfig tiny_predictor_config() {
  PredictorConfig c;
  c.feature_dim = 6;
  c.hl_dim = 8;
  c.blstm_hidden = 4;
  c.fc_dim = 8;
  c.attn_heads = 2;
  return c;
}

LabeledExample synth_example(Rng& rng, int frames, int feature_dim,
                             double target) {
  LabeledExample ex;
  ex.layers = {random_mat(frames, feature_dim, rng)};
  for (auto& v : ex.hl_db) v = rng.uniform(0.0, 80.0);
  ex.target = target;
  return ex;
}

}  // namespace

TEST_CASE("forward: zero output layer gives 0.5 everywhere") {
  auto cfg = tiny_predictor_config();
  ad::ParamStore p;
  auto pred = Predictor::create(p, cfg, 1);
  p.value("pred.out.w").setZero();
  p.value("pred.out.b").setZero();
  Rng rng(2);
  PredictorInput in;
  in.features = random_mat(5, cfg.feature_dim, rng);
  in.hearing_loss_db = {10, 20, 30, 40, 50, 60, 70, 80};
  auto q = predictor_forward(in, pred, p);
  REQUIRE(q.frame_scores.size() == 5);
  for (double v : q.frame_scores) REQUIRE(v == Catch::Approx(0.5));
  REQUIRE(q.clip_score == Catch::Approx(0.5));
}

TEST_CASE("forward: clip score is exactly the frame mean; T=1 collapses") {
  auto cfg = tiny_predictor_config();
  ad::ParamStore p;
  auto pred = Predictor::create(p, cfg, 3);
  Rng rng(4);
  PredictorInput in;
  in.features = random_mat(7, cfg.feature_dim, rng);
  auto q = predictor_forward(in, pred, p);
  double mean = 0;
  for (double v : q.frame_scores) mean += v;
  mean /= double(q.frame_scores.size());
  REQUIRE(q.clip_score == Catch::Approx(mean).margin(1e-15));
  for (double v : q.frame_scores) {
    REQUIRE(v > 0.0);
    REQUIRE(v < 1.0);
  }

  in.features = random_mat(1, cfg.feature_dim, rng);
  auto q1 = predictor_forward(in, pred, p);
  REQUIRE(q1.clip_score == q1.frame_scores[0]);
}

TEST_CASE("forward: clips are independent of batch order") {
  auto cfg = tiny_predictor_config();
  ad::ParamStore p;
  auto pred = Predictor::create(p, cfg, 5);
  Rng rng(6);
  PredictorInput a, b;
  a.features = random_mat(4, cfg.feature_dim, rng);
  b.features = random_mat(6, cfg.feature_dim, rng);
  auto qa1 = predictor_forward(a, pred, p);
  auto qb1 = predictor_forward(b, pred, p);
  auto qb2 = predictor_forward(b, pred, p);
  auto qa2 = predictor_forward(a, pred, p);
  REQUIRE(qa1.clip_score == qa2.clip_score);
  REQUIRE(qb1.clip_score == qb2.clip_score);
}

TEST_CASE("forward: attention weights per query sum to 1") {
  auto cfg = tiny_predictor_config();
  ad::ParamStore p;
  auto pred = Predictor::create(p, cfg, 7);
  Rng rng(8);
  PredictorInput in;
  in.features = random_mat(6, cfg.feature_dim, rng);
  std::vector<Mat> probe;
  predictor_forward(in, pred, p, &probe);
  REQUIRE(probe.size() == std::size_t(cfg.attn_heads));
  for (const auto& m : probe)
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      REQUIRE(m.row(r).sum() == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("quality loss: hand example and symmetries") {
  // One clip: true 0.8, estimated clip 0.6, frames {0.7, 0.9}.
  QualityPrediction pred;
  pred.clip_score = 0.6;
  pred.frame_scores = {0.7, 0.9};
  REQUIRE(quality_loss({0.8}, {pred}) == Catch::Approx(0.05));

  // Perfect prediction: zero loss.
  QualityPrediction perfect;
  perfect.clip_score = 0.8;
  perfect.frame_scores = {0.8, 0.8, 0.8};
  REQUIRE(quality_loss({0.8}, {perfect}) == Catch::Approx(0.0).margin(1e-15));

  // Frame order within a clip does not matter.
  QualityPrediction shuffled = pred;
  std::swap(shuffled.frame_scores[0], shuffled.frame_scores[1]);
  REQUIRE(quality_loss({0.8}, {shuffled}) == quality_loss({0.8}, {pred}));

  REQUIRE_THROWS_AS(quality_loss({}, {}), Error);
  REQUIRE_THROWS_AS(quality_loss({0.5}, {}), Error);
}

TEST_CASE("quality loss graph agrees with the value form") {
  ad::Tape t;
  Mat f1(3, 1), f2(2, 1);
  f1 << 0.2, 0.4, 0.9;
  f2 << 0.7, 0.9;
  std::vector<ad::Var> frames = {t.constant(f1), t.constant(f2)};
  ad::Var loss = quality_loss_graph(t, frames, {0.5, 0.8});

  QualityPrediction p1, p2;
  p1.frame_scores = {0.2, 0.4, 0.9};
  p1.clip_score = (0.2 + 0.4 + 0.9) / 3.0;
  p2.frame_scores = {0.7, 0.9};
  p2.clip_score = 0.8;
  REQUIRE(t.scalar(loss) ==
          Catch::Approx(quality_loss({0.5, 0.8}, {p1, p2})).margin(1e-12));
}

TEST_CASE("full predictor + quality loss gradients match finite differences") {
  auto cfg = tiny_predictor_config();
  Rng rng(9);
  for (int trial = 0; trial < 3; ++trial) {
    ad::ParamStore p;
    auto pred = Predictor::create(p, cfg, std::uint64_t(trial + 10));
    Mat x1 = random_mat(3, cfg.input_dim(), rng, 0.5);
    Mat x2 = random_mat(5, cfg.input_dim(), rng, 0.5);
    check_gradient(
        [&](ad::Tape& t, ad::ParamStore& ps) {
          std::vector<ad::Var> frames = {pred.build(t, ps, t.constant(x1)),
                                         pred.build(t, ps, t.constant(x2))};
          return quality_loss_graph(t, frames, {0.3, 0.8});
        },
        p, 1e-3, 1e-5);
  }
}

TEST_CASE("hearing loss concat: normalization and bounds") {
  Mat f = Mat::Zero(3, 4);
  std::array<double, 8> hl = {0, 10, 20, 30, 40, 50, 60, 120};
  Mat x = concat_hearing_loss(f, hl);
  REQUIRE(x.cols() == 12);
  REQUIRE(x(0, 4) == 0.0);
  REQUIRE(x(2, 11) == Catch::Approx(1.2));
  hl[0] = 130;
  REQUIRE_THROWS_AS(concat_hearing_loss(f, hl), Error);
}

TEST_CASE("training overfits a tiny synthetic set") {
  QualityModelConfig mc;
  mc.kind = FeatureKind::kDirect;
  mc.predictor = tiny_predictor_config();
  auto model = QualityModel::create(mc, 123);

  Rng rng(124);
  std::vector<LabeledExample> data;
  for (int i = 0; i < 8; ++i)
    data.push_back(synth_example(rng, 4, mc.predictor.feature_dim,
                                 0.1 + 0.8 * double(i) / 7.0));

  TrainConfig tc;
  tc.lr = 0.01;
  tc.batch_size = 8;
  tc.max_epochs = 1000;
  tc.max_steps = 400;
  tc.seed = 7;
  auto report = train_quality_model(model, data, {}, tc);
  REQUIRE(report.final_train_loss < 1e-3);
}

TEST_CASE("training is bit-deterministic for a fixed seed") {
  QualityModelConfig mc;
  mc.kind = FeatureKind::kDirect;
  mc.predictor = tiny_predictor_config();

  Rng rng(125);
  std::vector<LabeledExample> data;
  for (int i = 0; i < 6; ++i)
    data.push_back(synth_example(rng, 3, mc.predictor.feature_dim, 0.2 + 0.1 * i));

  auto run = [&]() {
    auto model = QualityModel::create(mc, 55);
    TrainConfig tc;
    tc.lr = 0.005;
    tc.batch_size = 2;
    tc.max_epochs = 4;
    tc.seed = 99;
    train_quality_model(model, data, {}, tc);
    return snapshot_params(model.params);
  };
  auto a = run();
  auto b = run();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a[i] == b[i]);
}

TEST_CASE("warm start beats random init on the pre-trained distribution") {
  QualityModelConfig mc;
  mc.kind = FeatureKind::kDirect;
  mc.predictor = tiny_predictor_config();

  // Targets derive from the features, so pre-training learns something a
  // warm start can transfer to fresh draws from the same distribution.
  Rng rng(126);
  auto learnable = [&]() {
    LabeledExample ex = synth_example(rng, 4, mc.predictor.feature_dim, 0.0);
    ex.target = clamp(0.5 + 0.6 * ex.layers[0].col(0).mean(), 0.05, 0.95);
    return ex;
  };
  std::vector<LabeledExample> train_set, valid_set;
  for (int i = 0; i < 16; ++i) train_set.push_back(learnable());
  for (int i = 0; i < 8; ++i) valid_set.push_back(learnable());

  auto warm = QualityModel::create(mc, 77);
  TrainConfig tc;
  tc.lr = 0.01;
  tc.batch_size = 4;
  tc.max_epochs = 30;
  tc.seed = 5;
  train_quality_model(warm, train_set, {}, tc);

  auto fresh = QualityModel::create(mc, 78);
  double warm_initial = dataset_quality_loss(warm, valid_set);
  double fresh_initial = dataset_quality_loss(fresh, valid_set);
  REQUIRE(warm_initial <= fresh_initial);
}

TEST_CASE("non-finite features abort training with diagnostics") {
  QualityModelConfig mc;
  mc.kind = FeatureKind::kDirect;
  mc.predictor = tiny_predictor_config();
  auto model = QualityModel::create(mc, 1);
  Rng rng(2);
  auto ex = synth_example(rng, 3, mc.predictor.feature_dim, 0.5);
  ex.layers[0](0, 0) = std::numeric_limits<double>::quiet_NaN();
  TrainConfig tc;
  tc.max_epochs = 1;
  REQUIRE_THROWS_AS(train_quality_model(model, {ex}, {}, tc), Error);
}

TEST_CASE("model weights round trip through the container") {
  QualityModelConfig mc;
  mc.kind = FeatureKind::kEncoderWsAdapter;
  mc.encoder_layers = 3;
  mc.encoder_dim = 8;
  mc.predictor = tiny_predictor_config();
  auto model = QualityModel::create(mc, 42);

  auto path =
      (std::filesystem::temp_directory_path() / "haaqi_model.bin").string();
  save_quality_model(path, model);
  auto loaded = load_quality_model(path);
  REQUIRE(loaded.params.size() == model.params.size());
  for (int i = 0; i < model.params.size(); ++i) {
    REQUIRE(loaded.params.name(i) == model.params.name(i));
    REQUIRE(loaded.params.value(i) == model.params.value(i));
  }

  Rng rng(43);
  LabeledExample ex;
  ex.layers = {random_mat(6, 8, rng), random_mat(6, 8, rng),
               random_mat(6, 8, rng)};
  ex.hl_db = {25, 30, 35, 40, 45, 50, 55, 60};
  REQUIRE(model.predict(ex).clip_score ==
          Catch::Approx(loaded.predict(ex).clip_score).margin(1e-15));
  std::remove(path.c_str());
}
