#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "involve/embedder.h"
#include "involve/errors.h"
#include "involve/rng.h"
#include "involve/similarity.h"
#include "test_util.h"

namespace involve {
namespace {

EmbeddingMatrix unit_rows(std::size_t r, std::size_t c, Rng& rng) {
    std::vector<double> v(r * c);
    for (double& x : v) x = rng.normal();
    return EmbeddingMatrix(r, c, std::move(v)).normalized();
}

double brute_recall(const EmbeddingMatrix& ref, const EmbeddingMatrix& cand) {
    double total = 0;
    for (std::size_t i = 0; i < ref.rows(); ++i) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < cand.rows(); ++j) {
            double dot = 0;
            for (std::size_t k = 0; k < ref.cols(); ++k) dot += ref.row(i)[k] * cand.row(j)[k];
            best = std::max(best, dot);
        }
        total += best;
    }
    return total / static_cast<double>(ref.rows());
}

TEST(GreedyMatch, AgreesWithBruteForce) {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const auto ref = unit_rows(1 + rng.uniform_index(30), 16, rng);
        const auto cand = unit_rows(1 + rng.uniform_index(30), 16, rng);
        const auto s = greedy_match_scores(ref, cand);
        EXPECT_NEAR(s.recall, brute_recall(ref, cand), 1e-12);
        EXPECT_NEAR(s.precision, brute_recall(cand, ref), 1e-12);
        const double f1 = s.precision * s.recall > 0
                              ? 2 * s.precision * s.recall / (s.precision + s.recall)
                              : 0.0;
        EXPECT_NEAR(s.f1, f1, 1e-12);
    }
}

// Two reference tokens, one candidate token equal to the first reference.
// recall = (1 + 0) / 2, precision = 1, f1 = 2/3.
TEST(GreedyMatch, HandComputedExample) {
    const EmbeddingMatrix ref(2, 2, {1, 0, 0, 1});
    const EmbeddingMatrix cand(1, 2, {1, 0});
    const auto s = greedy_match_scores(ref.normalized(), cand.normalized());
    EXPECT_DOUBLE_EQ(s.recall, 0.5);
    EXPECT_DOUBLE_EQ(s.precision, 1.0);
    EXPECT_NEAR(s.f1, 2.0 / 3.0, 1e-15);
}

TEST(GreedyMatch, RejectsBadInputs) {
    const EmbeddingMatrix a(1, 2, {1, 0});
    const EmbeddingMatrix b(1, 3, {1, 0, 0});
    EXPECT_THROW(greedy_match_scores(a.normalized(), b.normalized()), DimensionError);
    EXPECT_THROW(EmbeddingMatrix(0, 2, {}), EmptyInput);
    EXPECT_THROW(EmbeddingMatrix(2, 2, {1, 2, 3}), DimensionError);
    EXPECT_THROW(EmbeddingMatrix(1, 2, {1, std::nan("")}), NumericalError);
    EXPECT_THROW(EmbeddingMatrix(1, 2, {0, 0}).normalized(), NumericalError);
}

TEST(HarmonicF1, SignRule) {
    EXPECT_DOUBLE_EQ(harmonic_f1(0.5, 1.0), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(harmonic_f1(0.0, 0.0), 0.0);
    EXPECT_DOUBLE_EQ(harmonic_f1(-0.5, 0.5), 0.0);
}

TEST(Normalization, FallbackConstants) {
    const auto c = NormalizationConstants::fallback();
    EXPECT_DOUBLE_EQ(c.score_min, 0.3);
    EXPECT_DOUBLE_EQ(c.score_max, 1.0);
    EXPECT_NEAR(normalize_value(0.65, c), 0.5, 1e-12);
    EXPECT_DOUBLE_EQ(normalize_value(0.1, c), 0.0);
    EXPECT_DOUBLE_EQ(normalize_value(1.2, c), 1.0);
}

TEST(Normalization, FitFromBatch) {
    const std::vector<double> batch = {0.7, 0.4, 0.9, 0.55};
    const auto c = fit_normalization(batch);
    EXPECT_DOUBLE_EQ(c.score_min, 0.4);
    EXPECT_DOUBLE_EQ(c.score_max, 0.9);
    EXPECT_DOUBLE_EQ(normalize_value(0.4, c), 0.0);
    EXPECT_DOUBLE_EQ(normalize_value(0.9, c), 1.0);
    EXPECT_NEAR(normalize_value(0.65, c), 0.5, 1e-12);
}

TEST(Normalization, DegenerateBatches) {
    EXPECT_THROW(fit_normalization(std::vector<double>{0.5}), DegenerateRange);
    EXPECT_THROW(fit_normalization(std::vector<double>{0.5, 0.5, 0.5}), DegenerateRange);
    EXPECT_THROW(normalize_scores({}, NormalizationConstants{0.5, 0.5, "x"}), DegenerateRange);
}

TEST(Normalization, PersistenceRoundTrip) {
    testing::TempDir dir;
    const NormalizationConstants c{0.41, 0.97, "batch:test"};
    write_normalization(dir / "norm.json", c);
    const auto back = read_normalization(dir / "norm.json");
    EXPECT_EQ(back.score_min, c.score_min);
    EXPECT_EQ(back.score_max, c.score_max);
    EXPECT_EQ(back.provenance, c.provenance);
}

TEST(ScorePair, IdenticalTextsHaveFullRecall) {
    const auto emb = make_embedder(default_embedder_id());
    const std::string text = "Transformers learn contextual token representations from data.";
    const auto s = score_pair(text, text, *emb);
    EXPECT_NEAR(s.recall, 1.0, 1e-12);
    EXPECT_NEAR(s.precision, 1.0, 1e-12);
}

TEST(ScorePair, OverlapRaisesRecall) {
    const auto emb = make_embedder(default_embedder_id());
    const std::string prompt = "graph neural networks for molecule property prediction";
    const auto close = score_pair(prompt, "We apply graph neural networks to predict molecule properties.", *emb);
    const auto far = score_pair(prompt, "The weather in the mountains was cold and windy.", *emb);
    EXPECT_GT(close.recall, far.recall);
}

TEST(ScorePair, EmptyTextThrows) {
    const auto emb = make_embedder(default_embedder_id());
    EXPECT_THROW(score_pair("", "something", *emb), EmptyInput);
    EXPECT_THROW(score_pair("something", "   ", *emb), EmptyInput);
}

}  // namespace
}  // namespace involve
