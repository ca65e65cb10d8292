#pragma once

// Evaluation protocols: regression, binary and token metrics, threshold
// sweeps, cross-generator tables, fitted lines and denoised rank correlation.

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "involve/bst.h"
#include "involve/dataset.h"
#include "involve/detector/detector.h"
#include "involve/token_labeling.h"

namespace involve::eval {

inline constexpr double kAccTolerance = 0.15;

struct RegressionMetrics {
    double mse = 0.0;
    double acc_within = 0.0;  // fraction with |pred - label| <= tolerance
};

// Throws ShapeError on unequal or zero lengths.
RegressionMetrics regression_metrics(std::span<const double> preds, std::span<const double> labels,
                                     double tolerance = kAccTolerance);

// Mann-Whitney AUC with midranks for ties; gold entries are 0/1. Throws
// AUCUndefined unless both classes are present, ShapeError on length mismatch.
double roc_auc(std::span<const double> scores, std::span<const int> gold);

struct ClassificationMetrics {
    double acc = 0.0;
    std::optional<double> auc;  // absent when gold has a single class
};

// acc after binarizing scores at the threshold; auc over the raw scores.
ClassificationMetrics classification_metrics(std::span<const double> scores,
                                             std::span<const int> gold, const BSTConfig& bst);

struct TokenMetrics {
    double acc = 0.0;
    double f1 = 0.0;  // class 1 positive; 0 when there are no true positives
};

// Over real positions only. Throws ShapeError when attention lengths differ.
TokenMetrics token_metrics(const TokenLabelVector& pred, const TokenLabelVector& gold);
// Pooled over every real position of every pair.
TokenMetrics token_metrics(const std::vector<TokenLabelVector>& pred,
                           const std::vector<TokenLabelVector>& gold);

// Maps a text to a human-likeness score. score() lies in [0, 1];
// raw_score() is the unclamped value used for rank statistics.
class DetectorAdapter {
public:
    virtual ~DetectorAdapter() = default;
    virtual std::string name() const = 0;
    virtual double score(std::string_view text) const = 0;
    virtual double raw_score(std::string_view text) const { return score(text); }
};

// Returns the dataset's own y_reg for each generated text.
class LabelOracleAdapter final : public DetectorAdapter {
public:
    explicit LabelOracleAdapter(const Dataset& dataset);
    std::string name() const override { return "label-oracle"; }
    double score(std::string_view text) const override;

private:
    std::unordered_map<std::string, double> labels_;
};

class ConstantAdapter final : public DetectorAdapter {
public:
    explicit ConstantAdapter(double value) : value_(value) {}
    std::string name() const override;
    double score(std::string_view) const override { return value_; }

private:
    double value_;
};

// Regression head: score is the clamped estimate, raw_score the linear output.
class RegressionAdapter final : public DetectorAdapter {
public:
    explicit RegressionAdapter(const detector::Detector& detector) : detector_(detector) {}
    std::string name() const override { return "regression"; }
    double score(std::string_view text) const override;
    double raw_score(std::string_view text) const override;

private:
    const detector::Detector& detector_;
};

// Sequence head of a retrained binary classifier: probability of the human class.
class ClassifierAdapter final : public DetectorAdapter {
public:
    explicit ClassifierAdapter(const detector::Detector& detector) : detector_(detector) {}
    std::string name() const override { return "classifier"; }
    double score(std::string_view text) const override;

private:
    const detector::Detector& detector_;
};

struct AdapterScores {
    std::vector<double> score;
    std::vector<double> raw;
};
// Scores every generated text; parallel over records, results in record order.
AdapterScores score_dataset(const DetectorAdapter& adapter, const Dataset& dataset);

struct SweepRow {
    double threshold = 0.0;
    double acc = 0.0;
    std::optional<double> auc;
    std::size_t human = 0;  // gold Human-contribution count
    std::size_t ai = 0;
    bool degenerate = false;  // a gold class is empty at this threshold
};

// Re-binarizes gold y_reg at each threshold and scores the adapter's
// binarized predictions. Single-class thresholds are flagged, not fatal.
std::vector<SweepRow> bst_sweep(const DetectorAdapter& adapter, const Dataset& dataset,
                                const std::vector<double>& thresholds);
std::vector<SweepRow> bst_sweep(const AdapterScores& scores, std::span<const double> labels,
                                const std::vector<double>& thresholds);

// Parses "a..b" (step 0.1) or "a..b:step" or a comma list. Throws ConfigError.
std::vector<double> parse_thresholds(std::string_view spec);

struct Line {
    double slope = 0.0;
    double intercept = 0.0;
};
// Least squares of preds on labels. Throws DegenerateRange when labels take
// fewer than two distinct values.
Line fitted_line(std::span<const double> preds, std::span<const double> labels);

// Spearman correlation with midranks. Throws DegenerateRange when either
// variable is constant.
double spearman(std::span<const double> x, std::span<const double> y);

struct DenoisedCorrelation {
    double rho_raw = 0.0;
    double rho_denoised = 0.0;
    std::vector<std::size_t> outliers;
};
// Fits y on x, drops points whose residual exceeds two sample standard
// deviations and recomputes rho. Throws InsufficientData when fewer than 3
// points are given or survive.
DenoisedCorrelation spearman_denoised(std::span<const double> x, std::span<const double> y);

struct GeneratorRow {
    std::string generator;
    std::size_t n = 0;
    RegressionMetrics metrics;
};
std::vector<GeneratorRow> cross_model_report(const DetectorAdapter& adapter,
                                             const std::map<std::string, Dataset>& datasets);

struct EvalReport {
    std::string detector;
    std::size_t n = 0;
    std::optional<RegressionMetrics> regression;
    std::vector<SweepRow> sweep;
    std::optional<TokenMetrics> tokens;
    std::optional<Line> fit;
    nlohmann::json provenance;
    std::vector<std::pair<double, double>> scatter;  // (label, prediction)
};

// Full evaluation of a trained detector on a dataset. Regression and token
// metrics are skipped for binary classifiers.
EvalReport evaluate(const detector::Detector& detector, const Dataset& dataset,
                    const std::vector<double>& thresholds);
// Sweep-only evaluation for an arbitrary adapter.
EvalReport evaluate(const DetectorAdapter& adapter, const Dataset& dataset,
                    const std::vector<double>& thresholds);

nlohmann::json to_json(const EvalReport& report);
// Metrics table plus a sweep table with one column per threshold and a
// footer of published baseline rows for comparison.
std::string to_markdown(const EvalReport& report);
std::string cross_model_markdown(const std::vector<GeneratorRow>& rows);
void write_scatter_csv(const std::filesystem::path& path, const EvalReport& report);

}  // namespace involve::eval
