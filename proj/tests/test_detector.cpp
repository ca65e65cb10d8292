#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include <omp.h>

#include "involve/dataset.h"
#include "involve/detector/checkpoint.h"
#include "involve/detector/detector.h"
#include "involve/detector/model.h"
#include "involve/detector/optimizer.h"
#include "involve/detector/trainer.h"
#include "involve/errors.h"
#include "involve/rng.h"
#include "involve/tokenizer.h"
#include "test_util.h"

namespace involve::detector {
namespace {

const double kLn2 = std::numbers::ln2;

DualHeadOutput output_with(std::size_t rows, std::size_t attention_len, double y_hat) {
    DualHeadOutput o;
    o.y_reg_hat = y_hat;
    o.token_logits.assign(rows * 2, 0.0);
    o.attention_len = attention_len;
    return o;
}

TokenLabelVector labels_with(std::size_t rows, std::size_t attention_len,
                             std::initializer_list<std::size_t> ones) {
    TokenLabelVector v;
    v.labels.assign(rows, 0);
    v.attention_len = attention_len;
    for (auto i : ones) v.labels[i] = 1;
    return v;
}

TEST(CombinedLoss, ZeroMseAndUniformLogits) {
    // one real position labeled 1, logits (0, 0): ce = 1.2 * ln 2
    const auto out = output_with(4, 1, 0.4);
    const auto y = labels_with(4, 1, {0});
    const auto l = combined_loss(out, 0.4, y, {1.0, 1.2});
    EXPECT_DOUBLE_EQ(l.mse, 0.0);
    EXPECT_NEAR(l.ce, 1.2 * kLn2, 1e-15);
    EXPECT_NEAR(l.total, 1.2 * kLn2, 1e-15);
}

TEST(CombinedLoss, HandComputedMixture) {
    auto out = output_with(3, 3, 0.9);
    out.token_logits = {2.0, 0.0, 0.0, 1.0, 0.5, 0.5};
    const auto y = labels_with(3, 3, {1});
    const auto l = combined_loss(out, 0.5, y, {1.0, 1.2});
    const double ce = std::log(1 + std::exp(-2.0)) + 1.2 * std::log(1 + std::exp(-1.0)) + kLn2;
    EXPECT_NEAR(l.mse, 0.16, 1e-15);
    EXPECT_NEAR(l.ce, ce, 1e-14);
    EXPECT_NEAR(l.total, 0.16 + ce, 1e-14);
}

TEST(CombinedLoss, LinearInClassWeights) {
    auto out = output_with(4, 4, 0.0);
    out.token_logits = {0.3, -0.2, 1.0, 0.1, -0.7, 0.4, 0.0, 2.0};
    const auto y = labels_with(4, 4, {1, 3});
    const double c0 = combined_loss(out, 0.0, y, {1.0, 0.0}).ce;
    const double c1 = combined_loss(out, 0.0, y, {0.0, 1.0}).ce;
    EXPECT_NEAR(combined_loss(out, 0.0, y, {2.5, 0.7}).ce, 2.5 * c0 + 0.7 * c1, 1e-13);
}

TEST(CombinedLoss, PaddingExcludedUnlessRequested) {
    auto out = output_with(4, 2, 0.0);
    const auto y = labels_with(4, 2, {});
    const double base = combined_loss(out, 0.0, y, {1.0, 1.2}).ce;
    out.token_logits[6] = -5.0;  // padding row 3
    EXPECT_EQ(combined_loss(out, 0.0, y, {1.0, 1.2}).ce, base);
    EXPECT_GT(combined_loss(out, 0.0, y, {1.0, 1.2}, true).ce, base);
}

TEST(CombinedLoss, Errors) {
    auto out = output_with(4, 2, std::nan(""));
    EXPECT_THROW(combined_loss(out, 0.0, labels_with(4, 2, {}), {1.0, 1.2}), NumericalError);
    out.y_reg_hat = 0.0;
    EXPECT_THROW(combined_loss(out, 0.0, labels_with(4, 3, {}), {1.0, 1.2}), ShapeError);
    EXPECT_THROW(combined_loss(out, 0.0, labels_with(3, 2, {}), {1.0, 1.2}, true), ShapeError);
}

EncoderShape tiny_shape() {
    return {.vocab_size = 30, .max_len = 8, .hidden = 8, .layers = 2, .heads = 2, .ffn = 12};
}

TrainingExample tiny_example() {
    TrainingExample ex;
    ex.ids = {1, 7, 12, 29, 5, 2, 0, 0};
    ex.attention_len = 6;
    ex.y_reg = 0.3;
    ex.labels = {0, 1, 1, 0, 1, 0, 0, 0};
    ex.polar_class = 1;
    return ex;
}

void gradient_check(TrainMode mode, bool include_padding) {
    DualHeadModel model(tiny_shape(), 5, 0.5);
    const auto ex = tiny_example();
    LossOptions opts{mode, {1.0, 1.2}, include_padding};
    std::vector<double> grad(model.num_params(), 0.0);
    model.loss_and_gradient(ex, opts, grad);

    Rng rng(77);
    const double h = 1e-5;
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
        const auto i = static_cast<std::size_t>(rng.uniform_index(model.num_params()));
        auto p = model.mutable_params();
        const double orig = p[i];
        p[i] = orig + h;
        const double up = model.loss(ex, opts).total;
        p[i] = orig - h;
        const double down = model.loss(ex, opts).total;
        p[i] = orig;
        const double fd = (up - down) / (2 * h);
        const double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-6});
        worst = std::max(worst, std::abs(fd - grad[i]) / denom);
    }
    EXPECT_LT(worst, 1e-4) << "mode " << mode_name(mode);
}

TEST(Gradient, MatchesFiniteDifferences) {
    gradient_check(TrainMode::kDual, false);
    gradient_check(TrainMode::kDual, true);
    gradient_check(TrainMode::kRegressionOnly, false);
    gradient_check(TrainMode::kTokenOnly, false);
    gradient_check(TrainMode::kBinary, false);
}

// Which heads receive gradient depends on the training mode.
TEST(Gradient, HeadsCarryGradientOnlyWhenActive) {
    DualHeadModel model(tiny_shape(), 5, 0.5);
    const auto ex = tiny_example();
    auto nonzero = [&](TrainMode mode, ParamRange r) {
        std::vector<double> g(model.num_params(), 0.0);
        model.loss_and_gradient(ex, {mode, {1.0, 1.2}, false}, g);
        for (std::size_t i = r.offset; i < r.offset + r.size; ++i)
            if (g[i] != 0.0) return true;
        return false;
    };
    EXPECT_TRUE(nonzero(TrainMode::kDual, model.regression_head()));
    EXPECT_TRUE(nonzero(TrainMode::kDual, model.token_head()));
    EXPECT_FALSE(nonzero(TrainMode::kDual, model.sequence_head()));
    EXPECT_FALSE(nonzero(TrainMode::kRegressionOnly, model.token_head()));
    EXPECT_FALSE(nonzero(TrainMode::kTokenOnly, model.regression_head()));
    EXPECT_TRUE(nonzero(TrainMode::kBinary, model.sequence_head()));
}

TEST(Model, PaddingDoesNotLeakIntoRealPositions) {
    DualHeadModel model(tiny_shape(), 9, 0.3);
    auto ex = tiny_example();
    const auto a = model.forward(ex.ids, ex.attention_len);
    ex.ids[6] = 17;
    ex.ids[7] = 3;
    const auto b = model.forward(ex.ids, ex.attention_len);
    EXPECT_EQ(a.y_reg_hat, b.y_reg_hat);
    for (std::size_t i = 0; i < ex.attention_len * 2; ++i) EXPECT_EQ(a.token_logits[i], b.token_logits[i]);
}

TEST(Model, RejectsBadInputs) {
    DualHeadModel model(tiny_shape(), 9, 0.3);
    auto ex = tiny_example();
    ex.ids[1] = 30;  // out of vocabulary
    EXPECT_THROW(model.forward(ex.ids, ex.attention_len), Error);
    EXPECT_THROW(DualHeadModel(tiny_shape(), std::vector<double>(10, 0.0)), ModelLoadError);
}

TEST(Optimizer, FrozenEntriesNeverMove) {
    AdamW opt(6, {.learning_rate = 0.1, .weight_decay = 0.5});
    opt.freeze({2, 2});
    std::vector<double> p = {1, 1, 1, 1, 1, 1};
    const std::vector<double> g = {1, -1, 1, -1, 1, -1};
    for (int i = 0; i < 5; ++i) opt.step(p, g);
    EXPECT_EQ(p[2], 1.0);
    EXPECT_EQ(p[3], 1.0);
    EXPECT_LT(p[0], 1.0);
    EXPECT_GT(p[1], 1.0 - 1e-9 - 5 * 0.1 * 0.5);  // decay pulls down, gradient pushes up
}

TEST(Optimizer, FirstStepMatchesClosedForm) {
    // bias-corrected first step is -lr * sign(g) (up to eps), then decay
    AdamW opt(2, {.learning_rate = 0.01, .beta1 = 0.9, .beta2 = 0.999, .eps = 0.0, .weight_decay = 0.1});
    std::vector<double> p = {2.0, -3.0};
    opt.step(p, std::vector<double>{0.5, -4.0});
    EXPECT_NEAR(p[0], 2.0 - 0.01 * 0.1 * 2.0 - 0.01, 1e-15);
    EXPECT_NEAR(p[1], -3.0 - 0.01 * 0.1 * -3.0 + 0.01, 1e-15);
}

DetectorConfig small_config() {
    DetectorConfig c;
    c.max_len = 64;
    c.hidden = 16;
    c.layers = 1;
    c.heads = 2;
    c.ffn = 32;
    c.learning_rate = 5e-3;
    c.batch_size = 4;
    c.epochs = 150;
    c.validation_fraction = 0.0;
    c.seed = 1;
    return c;
}

Dataset small_dataset(std::size_t max_len) {
    HashedPieceTokenizer tok(max_len);
    const std::vector<std::tuple<std::string, std::string, double>> rows = {
        {"sparse attention", "Sparse attention reduces memory for long inputs.", 0.8},
        {"graph networks", "We study convolutional filters for images.", 0.1},
        {"quantum error codes", "Quantum error codes protect logical qubits.", 0.9},
        {"federated learning", "Clients rarely share raw data with servers.", 0.3},
    };
    Dataset ds;
    ds.meta.tokenizer = tok.id();
    ds.meta.max_len = max_len;
    std::uint64_t id = 0;
    for (const auto& [prompt, gen, y] : rows) {
        LabeledPair p;
        p.pair_id = id++;
        p.prompt = prompt;
        p.generated = gen;
        p.y_reg = y;
        p.y_cls = common_token_labels(prompt, gen, tok);
        p.polar_class = y > 0.5 ? 1 : 0;
        ds.records.push_back(p);
    }
    return ds;
}

TEST(Detector, OutputShapeAtDefaultLength) {
    DetectorConfig c;
    HashedPieceTokenizer tok;
    Detector det(c, DualHeadModel(shape_for(c, tok.vocab_size()), 0, c.init_std));
    const auto out = det.forward("A short abstract about sparse attention.");
    EXPECT_EQ(out.token_logits.size(), 368u * 2);
    const auto pred = det.predict("A short abstract about sparse attention.");
    EXPECT_EQ(pred.token_labels.labels.size(), 368u);
    EXPECT_GE(pred.involvement, 0.0);
    EXPECT_LE(pred.involvement, 1.0);
    EXPECT_THROW(det.predict("   "), EmptyInput);
}

TEST(Detector, UnavailableEncodersFailToLoad) {
    EXPECT_NO_THROW(require_encoder("toy-transformer"));
    EXPECT_THROW(require_encoder("roberta-base"), ModelLoadError);
    EXPECT_THROW(require_encoder("roberta-large"), ModelLoadError);
    EXPECT_THROW(require_encoder("gpt-9"), ModelLoadError);
    auto c = small_config();
    c.encoder = "roberta-base";
    EXPECT_THROW(train(small_dataset(64), c), ModelLoadError);
}

TEST(Training, OverfitsOnePairAndIsThreadCountInvariant) {
    auto ds = small_dataset(64);
    ds.records.resize(1);
    const auto cfg = small_config();
    omp_set_num_threads(1);
    const auto r1 = train(ds, cfg);
    omp_set_num_threads(2);
    const auto r2 = train(ds, cfg);
    ASSERT_EQ(r1.detector.model().num_params(), r2.detector.model().num_params());
    EXPECT_TRUE(std::equal(r1.detector.model().params().begin(), r1.detector.model().params().end(),
                           r2.detector.model().params().begin()));

    const auto pred = r1.detector.predict(ds.records[0].generated);
    EXPECT_NEAR(pred.y_reg_hat, ds.records[0].y_reg, 0.03);
    EXPECT_EQ(pred.token_labels, ds.records[0].y_cls);
}

TEST(Training, FrozenHeadsKeepInitialWeights) {
    const auto ds = small_dataset(64);
    auto cfg = small_config();
    cfg.epochs = 3;
    HashedPieceTokenizer tok(64);
    const DualHeadModel init(shape_for(cfg, tok.vocab_size()), cfg.seed,
                             cfg.init_std);
    auto same_range = [](const DualHeadModel& a, const DualHeadModel& b, ParamRange r) {
        for (std::size_t i = r.offset; i < r.offset + r.size; ++i)
            if (a.params()[i] != b.params()[i]) return false;
        return true;
    };
    const auto reg = train_single_head(ds, cfg, SingleHead::kRegression);
    EXPECT_TRUE(same_range(reg.detector.model(), init, init.token_head()));
    EXPECT_FALSE(same_range(reg.detector.model(), init, init.regression_head()));
    const auto tokonly = train_single_head(ds, cfg, SingleHead::kToken);
    EXPECT_TRUE(same_range(tokonly.detector.model(), init, init.regression_head()));
    EXPECT_FALSE(same_range(tokonly.detector.model(), init, init.token_head()));
}

TEST(Training, EdgeCases) {
    auto cfg = small_config();
    EXPECT_THROW(train(Dataset{}, cfg), InsufficientData);
    auto ds = small_dataset(64);
    for (auto& r : ds.records) r.polar_class = 1;
    cfg.epochs = 1;
    EXPECT_THROW(train_binary_classifier(ds, cfg), PartitionDegenerate);
    cfg.learning_rate = 0.0;
    EXPECT_THROW(train(small_dataset(64), cfg), ConfigError);
}

TEST(Training, EarlyStopCallback) {
    auto cfg = small_config();
    cfg.epochs = 50;
    TrainOptions opts;
    opts.on_epoch = [](const EpochStats& s) { return s.epoch < 3; };
    const auto r = train(small_dataset(64), cfg, opts);
    EXPECT_EQ(r.state.curve.size(), 3u);
}

TEST(Checkpoint, RoundTripIsBitExact) {
    testing::TempDir dir;
    auto cfg = small_config();
    cfg.epochs = 2;
    TrainOptions opts;
    opts.checkpoint_dir = dir / "ckpt";
    const auto r = train(small_dataset(64), cfg, opts);
    const auto back = load_checkpoint(dir / "ckpt");
    EXPECT_EQ(back.model().shape(), r.detector.model().shape());
    EXPECT_TRUE(std::equal(back.model().params().begin(), back.model().params().end(),
                           r.detector.model().params().begin()));
    const std::string text = "Sparse attention reduces memory.";
    EXPECT_EQ(back.forward(text).token_logits, r.detector.forward(text).token_logits);
    EXPECT_TRUE(std::filesystem::exists(dir / "ckpt" / "training_curve.csv"));
}

TEST(Checkpoint, CorruptionIsModelLoadError) {
    testing::TempDir dir;
    EXPECT_THROW(load_checkpoint(dir / "nope"), ModelLoadError);
    auto cfg = small_config();
    HashedPieceTokenizer tok(64);
    Detector det(cfg, DualHeadModel(shape_for(cfg, tok.vocab_size()), 0, 0.02));
    save_checkpoint(dir / "c", det);
    EXPECT_NO_THROW(load_checkpoint(dir / "c"));
    const auto w = testing::slurp(dir / "c" / "weights.bin");
    testing::spit(dir / "c" / "weights.bin", w.substr(0, w.size() - 8));
    EXPECT_THROW(load_checkpoint(dir / "c"), ModelLoadError);
    testing::spit(dir / "c" / "weights.bin", "garbage");
    EXPECT_THROW(load_checkpoint(dir / "c"), ModelLoadError);
}

}  // namespace
}  // namespace involve::detector
