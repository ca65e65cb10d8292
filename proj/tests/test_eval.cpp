#include <gtest/gtest.h>

#include <cmath>

#include "involve/bst.h"
#include "involve/errors.h"
#include "involve/eval.h"
#include "involve/rng.h"
#include "test_util.h"

namespace involve::eval {
namespace {

TEST(Binarize, StrictThreshold) {
    const BSTConfig half(0.5);
    EXPECT_EQ(binarize(0.6, half), Verdict::kHumanContribution);
    EXPECT_EQ(binarize(0.5, half), Verdict::kAIGeneration);
    for (double t : {0.01, 0.3, 0.99}) EXPECT_EQ(binarize(0.0, BSTConfig(t)), Verdict::kAIGeneration);
    EXPECT_THROW(BSTConfig(0.0), ConfigError);
    EXPECT_THROW(BSTConfig(1.0), ConfigError);
}

TEST(RegressionMetrics, Examples) {
    const std::vector<double> p = {0.2, 0.8}, y = {0.0, 1.0};
    const auto m = regression_metrics(p, y);
    EXPECT_NEAR(m.mse, 0.04, 1e-15);
    EXPECT_EQ(m.acc_within, 0.0);
    const auto id = regression_metrics(y, y);
    EXPECT_EQ(id.mse, 0.0);
    EXPECT_EQ(id.acc_within, 1.0);
    // boundary counts as within
    const std::vector<double> q = {0.25}, z = {0.5};
    EXPECT_EQ(regression_metrics(q, z, 0.25).acc_within, 1.0);
    EXPECT_THROW(regression_metrics(p, std::vector<double>{0.1}), ShapeError);
    EXPECT_THROW(regression_metrics(std::vector<double>{}, std::vector<double>{}), ShapeError);
}

// Brute-force AUC: fraction of (pos, neg) pairs ordered correctly, ties 1/2.
double pair_auc(const std::vector<double>& s, const std::vector<int>& g) {
    double good = 0;
    double total = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j)
            if (g[i] == 1 && g[j] == 0) {
                total += 1;
                good += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
            }
    return good / total;
}

TEST(RocAuc, SeparatedReversedAndTied) {
    const std::vector<int> g = {0, 0, 1, 1};
    EXPECT_EQ(roc_auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, g), 1.0);
    EXPECT_EQ(roc_auc(std::vector<double>{0.9, 0.8, 0.2, 0.1}, g), 0.0);
    EXPECT_EQ(roc_auc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, g), 0.5);
    EXPECT_THROW(roc_auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), AUCUndefined);
}

TEST(RocAuc, MatchesPairCountingOracle) {
    Rng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + rng.uniform_index(40);
        std::vector<double> s(n);
        std::vector<int> g(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = std::round(rng.uniform01() * 10) / 10;  // many ties
            g[i] = static_cast<int>(rng.uniform_index(2));
        }
        g[0] = 0;
        g[1] = 1;
        EXPECT_NEAR(roc_auc(s, g), pair_auc(s, g), 1e-12);
        // strictly increasing transform leaves AUC unchanged
        std::vector<double> t(n);
        for (std::size_t i = 0; i < n; ++i) t[i] = std::exp(3 * s[i]) - 7;
        EXPECT_NEAR(roc_auc(t, g), roc_auc(s, g), 1e-12);
    }
}

TEST(ClassificationMetrics, SeparatedAndSingleClass) {
    const std::vector<double> s = {0.1, 0.3, 0.7, 0.95};
    const auto m = classification_metrics(s, std::vector<int>{0, 0, 1, 1}, BSTConfig(0.5));
    EXPECT_EQ(m.acc, 1.0);
    EXPECT_EQ(m.auc, 1.0);
    const auto one = classification_metrics(s, std::vector<int>{1, 1, 1, 1}, BSTConfig(0.5));
    EXPECT_EQ(one.acc, 0.5);
    EXPECT_FALSE(one.auc.has_value());
}

TokenLabelVector tv(std::vector<std::uint8_t> real, std::size_t rows = 10) {
    TokenLabelVector v;
    v.attention_len = real.size();
    v.labels = real;
    v.labels.resize(rows, 0);
    return v;
}

TEST(TokenMetrics, Examples) {
    const auto gold = tv({0, 1, 1, 0, 1});
    const auto same = token_metrics(gold, gold);
    EXPECT_EQ(same.acc, 1.0);
    EXPECT_EQ(same.f1, 1.0);
    const auto zeros = token_metrics(tv({0, 0, 0, 0, 0}), gold);
    EXPECT_EQ(zeros.f1, 0.0);
    EXPECT_DOUBLE_EQ(zeros.acc, 0.4);
    // tp 1, fp 1, fn 2: precision 1/2, recall 1/3, f1 0.4
    const auto mixed = token_metrics(tv({1, 1, 0, 0, 0}), gold);
    EXPECT_NEAR(mixed.f1, 0.4, 1e-15);
    EXPECT_THROW(token_metrics(tv({0, 1}), gold), ShapeError);
}

TEST(TokenMetrics, PoolingCountsPositions) {
    const std::vector<TokenLabelVector> gold = {tv({1, 0}), tv({1, 1, 1, 0})};
    const std::vector<TokenLabelVector> pred = {tv({0, 0}), tv({1, 1, 1, 0})};
    const auto m = token_metrics(pred, gold);
    EXPECT_NEAR(m.acc, 5.0 / 6.0, 1e-15);
    EXPECT_NEAR(m.f1, 2 * 1.0 * 0.75 / 1.75, 1e-15);
}

Dataset labeled(const std::vector<double>& ys) {
    Dataset d;
    for (std::size_t i = 0; i < ys.size(); ++i) {
        LabeledPair p;
        p.pair_id = i;
        p.generated = "text number " + std::to_string(i);
        p.y_reg = ys[i];
        d.records.push_back(p);
    }
    return d;
}

TEST(Sweep, OracleAdapterIsPerfect) {
    const auto ds = labeled({0.05, 0.22, 0.41, 0.47, 0.63, 0.78, 0.86, 0.97});
    LabelOracleAdapter oracle(ds);
    const auto rows = bst_sweep(oracle, ds, parse_thresholds("0.1..0.9"));
    ASSERT_EQ(rows.size(), 9u);
    for (const auto& r : rows) {
        EXPECT_EQ(r.acc, 1.0) << r.threshold;
        ASSERT_TRUE(r.auc.has_value());
        EXPECT_EQ(*r.auc, 1.0);
        EXPECT_FALSE(r.degenerate);
    }
}

TEST(Sweep, ConstantAdapterScoresItsSideFraction) {
    const auto ds = labeled({0.05, 0.22, 0.41, 0.47, 0.63, 0.78, 0.86, 0.97});
    for (double c : {0.0, 1.0}) {
        ConstantAdapter constant(c);
        for (const auto& r : bst_sweep(constant, ds, parse_thresholds("0.1..0.9"))) {
            const double humans = static_cast<double>(r.human) / 8.0;
            EXPECT_DOUBLE_EQ(r.acc, c > r.threshold ? humans : 1.0 - humans);
        }
    }
}

TEST(Sweep, DegenerateThresholdsAreFlagged) {
    const auto ds = labeled({0.4, 0.6});
    LabelOracleAdapter oracle(ds);
    const auto rows = bst_sweep(oracle, ds, {0.1, 0.5, 0.9});
    EXPECT_TRUE(rows[0].degenerate);
    EXPECT_FALSE(rows[0].auc.has_value());
    EXPECT_FALSE(rows[1].degenerate);
    EXPECT_TRUE(rows[2].degenerate);
}

TEST(ParseThresholds, Forms) {
    const auto r = parse_thresholds("0.1..0.9");
    ASSERT_EQ(r.size(), 9u);
    EXPECT_NEAR(r[4], 0.5, 1e-12);
    EXPECT_EQ(parse_thresholds("0.2..0.6:0.2").size(), 3u);
    EXPECT_EQ(parse_thresholds("0.25,0.75"), (std::vector<double>{0.25, 0.75}));
    EXPECT_THROW(parse_thresholds("0..1"), ConfigError);
    EXPECT_THROW(parse_thresholds("abc"), ConfigError);
}

TEST(FittedLine, IdentityConstantAndClosedForm) {
    const std::vector<double> y = {0.1, 0.4, 0.5, 0.9};
    const auto id = fitted_line(y, y);
    EXPECT_NEAR(id.slope, 1.0, 1e-12);
    EXPECT_NEAR(id.intercept, 0.0, 1e-12);
    const auto flat = fitted_line(std::vector<double>(4, 0.5), y);
    EXPECT_NEAR(flat.slope, 0.0, 1e-12);
    EXPECT_NEAR(flat.intercept, 0.5, 1e-12);
    EXPECT_THROW(fitted_line(y, std::vector<double>(4, 0.3)), DegenerateRange);

    // normal equations solved by Cramer's rule
    Rng rng(21);
    std::vector<double> labels(200), preds(200);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        labels[i] = rng.uniform01();
        preds[i] = 0.7 * labels[i] + 0.1 + 0.05 * rng.normal();
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        sx += labels[i];
        sy += preds[i];
        sxx += labels[i] * labels[i];
        sxy += labels[i] * preds[i];
    }
    const double det = n * sxx - sx * sx;
    const double slope = (n * sxy - sx * sy) / det;
    const double intercept = (sxx * sy - sx * sxy) / det;
    const auto fit = fitted_line(preds, labels);
    EXPECT_NEAR(fit.slope, slope, 1e-9);
    EXPECT_NEAR(fit.intercept, intercept, 1e-9);
}

TEST(Spearman, MonotoneAndTies) {
    const std::vector<double> x = {1, 2, 3, 4, 5};
    EXPECT_DOUBLE_EQ(spearman(x, std::vector<double>{2, 4, 8, 16, 32}), 1.0);
    EXPECT_DOUBLE_EQ(spearman(x, std::vector<double>{5, 4, 3, 2, 1}), -1.0);
    EXPECT_THROW(spearman(x, std::vector<double>(5, 1.0)), DegenerateRange);
}

TEST(SpearmanDenoised, MonotoneDataKeepsEverything) {
    std::vector<double> x, y;
    for (int i = 0; i < 30; ++i) {
        x.push_back(i);
        y.push_back(2.0 * i + 1.0);
    }
    const auto r = spearman_denoised(x, y);
    EXPECT_DOUBLE_EQ(r.rho_raw, 1.0);
    EXPECT_DOUBLE_EQ(r.rho_denoised, 1.0);
    EXPECT_TRUE(r.outliers.empty());
}

TEST(SpearmanDenoised, RecoversPlantedOutliers) {
    Rng rng(5);
    std::vector<double> x, y;
    for (int i = 0; i < 40; ++i) {
        x.push_back(i / 40.0);
        y.push_back(i / 40.0 + 0.01 * rng.normal());
    }
    y[5] = 0.95;
    y[33] = 0.02;
    const auto r = spearman_denoised(x, y);
    EXPECT_EQ(r.outliers, (std::vector<std::size_t>{5, 33}));
    EXPECT_GT(r.rho_denoised, r.rho_raw);
    EXPECT_THROW(spearman_denoised(std::vector<double>{1, 2}, std::vector<double>{1, 2}),
                 InsufficientData);
}

TEST(CrossModel, SameDatasetGivesIdenticalRows) {
    const auto ds = labeled({0.1, 0.5, 0.9});
    ConstantAdapter half(0.5);
    const auto rows = cross_model_report(half, {{"gen-a", ds}, {"gen-b", ds}});
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].metrics.mse, rows[1].metrics.mse);
    EXPECT_EQ(rows[0].metrics.acc_within, rows[1].metrics.acc_within);
    EXPECT_EQ(rows[0].n, 3u);
    EXPECT_NE(cross_model_markdown(rows).find("gen-b"), std::string::npos);
}

TEST(Report, MarkdownHasSweepColumns) {
    const auto ds = labeled({0.05, 0.22, 0.41, 0.47, 0.63, 0.78, 0.86, 0.97});
    LabelOracleAdapter oracle(ds);
    const auto report = evaluate(oracle, ds, parse_thresholds("0.1..0.9"));
    const auto md = to_markdown(report);
    for (const char* col : {"0.1", "0.5", "0.9", "ACC", "AUC"}) {
        EXPECT_NE(md.find(col), std::string::npos) << col;
    }
    const auto j = to_json(report);
    EXPECT_EQ(j["sweep"].size(), 9u);
    testing::TempDir dir;
    write_scatter_csv(dir / "s.csv", report);
    EXPECT_EQ(testing::slurp(dir / "s.csv").rfind("label,prediction\n", 0), 0u);
}

}  // namespace
}  // namespace involve::eval
