#include "involve/eval.h"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <numeric>

#include <fmt/format.h>

#include "involve/errors.h"

namespace involve::eval {

namespace {

void require_same_length(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw ShapeError(fmt::format("{}: length mismatch ({} vs {})", what, a, b));
    }
}

// 1-based ranks, ties share the mean of their positions.
std::vector<double> midranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw DegenerateRange("correlation of a constant variable");
    return sxy / std::sqrt(sxx * syy);
}

// Least squares of y on x.
Line ols(std::span<const double> x, std::span<const double> y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if (sxx == 0.0) throw DegenerateRange("least squares needs two distinct x values");
    Line l;
    l.slope = sxy / sxx;
    l.intercept = my - l.slope * mx;
    return l;
}

std::string fmt_opt(const std::optional<double>& v) {
    return v ? fmt::format("{:.4f}", *v) : std::string("-");
}

struct ReferenceRow {
    const char* name;
    double acc[9];
};

// Published accuracies of existing detectors on a continuous set at
// thresholds 0.1 .. 0.9. Shown for comparison only.
constexpr ReferenceRow kReferenceRows[] = {
    {"OpenAI detector", {0.63, 0.64, 0.68, 0.69, 0.68, 0.66, 0.64, 0.63, 0.64}},
    {"ChatGPT detector", {0.66, 0.69, 0.71, 0.72, 0.72, 0.69, 0.66, 0.65, 0.66}},
    {"Academic detector", {0.50, 0.50, 0.51, 0.51, 0.51, 0.51, 0.52, 0.55, 0.60}},
    {"DetectGPT detector", {0.58, 0.52, 0.52, 0.53, 0.51, 0.51, 0.52, 0.52, 0.52}},
    {"Regression (published)", {0.95, 0.75, 0.93, 0.96, 0.92, 0.84, 0.77, 0.80, 0.92}},
};

}  // namespace

RegressionMetrics regression_metrics(std::span<const double> preds, std::span<const double> labels,
                                     double tolerance) {
    require_same_length(preds.size(), labels.size(), "regression_metrics");
    if (preds.empty()) throw ShapeError("regression_metrics: no values");
    double se = 0.0;
    std::size_t within = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const double e = preds[i] - labels[i];
        se += e * e;
        if (std::abs(e) <= tolerance) ++within;
    }
    const double n = static_cast<double>(preds.size());
    return {se / n, static_cast<double>(within) / n};
}

double roc_auc(std::span<const double> scores, std::span<const int> gold) {
    require_same_length(scores.size(), gold.size(), "roc_auc");
    std::size_t pos = 0;
    for (int g : gold) pos += g == 1 ? 1 : 0;
    const std::size_t neg = gold.size() - pos;
    if (pos == 0 || neg == 0) throw AUCUndefined("AUC needs both classes in the gold labels");
    const std::vector<double> ranks = midranks(scores);
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (gold[i] == 1) rank_sum += ranks[i];
    }
    const double p = static_cast<double>(pos);
    return (rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

ClassificationMetrics classification_metrics(std::span<const double> scores,
                                             std::span<const int> gold, const BSTConfig& bst) {
    require_same_length(scores.size(), gold.size(), "classification_metrics");
    if (scores.empty()) throw ShapeError("classification_metrics: no values");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (verdict_class(binarize(scores[i], bst)) == gold[i]) ++correct;
    }
    ClassificationMetrics m;
    m.acc = static_cast<double>(correct) / static_cast<double>(scores.size());
    try {
        m.auc = roc_auc(scores, gold);
    } catch (const AUCUndefined&) {
        m.auc.reset();
    }
    return m;
}

namespace {

struct Confusion {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

    void add(const TokenLabelVector& pred, const TokenLabelVector& gold) {
        if (pred.attention_len != gold.attention_len) {
            throw ShapeError(fmt::format("token_metrics: attention_len {} vs {}",
                                         pred.attention_len, gold.attention_len));
        }
        if (pred.labels.size() < pred.attention_len || gold.labels.size() < gold.attention_len) {
            throw ShapeError("token_metrics: label vector shorter than attention_len");
        }
        for (std::size_t i = 0; i < gold.attention_len; ++i) {
            const bool p = pred.labels[i] != 0;
            const bool g = gold.labels[i] != 0;
            if (p && g) ++tp;
            else if (p) ++fp;
            else if (g) ++fn;
            else ++tn;
        }
    }

    TokenMetrics metrics() const {
        const std::size_t total = tp + fp + fn + tn;
        if (total == 0) throw EmptyVector("token_metrics: no real positions");
        TokenMetrics m;
        m.acc = static_cast<double>(tp + tn) / static_cast<double>(total);
        m.f1 = tp == 0 ? 0.0
                       : 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
        return m;
    }
};

}  // namespace

TokenMetrics token_metrics(const TokenLabelVector& pred, const TokenLabelVector& gold) {
    Confusion c;
    c.add(pred, gold);
    return c.metrics();
}

TokenMetrics token_metrics(const std::vector<TokenLabelVector>& pred,
                           const std::vector<TokenLabelVector>& gold) {
    require_same_length(pred.size(), gold.size(), "token_metrics");
    Confusion c;
    for (std::size_t i = 0; i < pred.size(); ++i) c.add(pred[i], gold[i]);
    return c.metrics();
}

LabelOracleAdapter::LabelOracleAdapter(const Dataset& dataset) {
    for (const auto& r : dataset.records) labels_.emplace(r.generated, r.y_reg);
}

double LabelOracleAdapter::score(std::string_view text) const {
    const auto it = labels_.find(std::string(text));
    if (it == labels_.end()) throw EmptyInput("label oracle has no label for this text");
    return it->second;
}

std::string ConstantAdapter::name() const { return fmt::format("constant-{}", value_); }

double RegressionAdapter::score(std::string_view text) const {
    return detector_.predict(text).involvement;
}

double RegressionAdapter::raw_score(std::string_view text) const {
    return detector_.predict(text).y_reg_hat;
}

double ClassifierAdapter::score(std::string_view text) const {
    return detector_.predict(text).human_probability;
}

AdapterScores score_dataset(const DetectorAdapter& adapter, const Dataset& dataset) {
    const std::size_t n = dataset.records.size();
    AdapterScores out;
    out.score.resize(n);
    out.raw.resize(n);
    std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < static_cast<long>(n); ++i) {
        const auto k = static_cast<std::size_t>(i);
        try {
            out.score[k] = adapter.score(dataset.records[k].generated);
            out.raw[k] = adapter.raw_score(dataset.records[k].generated);
        } catch (...) {
            errors[k] = std::current_exception();
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

std::vector<SweepRow> bst_sweep(const AdapterScores& scores, std::span<const double> labels,
                                const std::vector<double>& thresholds) {
    require_same_length(scores.score.size(), labels.size(), "bst_sweep");
    require_same_length(scores.raw.size(), labels.size(), "bst_sweep");
    if (labels.empty()) throw InsufficientData("bst_sweep: empty dataset");
    std::vector<SweepRow> rows;
    for (double t : thresholds) {
        const BSTConfig bst(t);
        SweepRow row;
        row.threshold = t;
        std::vector<int> gold(labels.size());
        std::size_t correct = 0;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            gold[i] = verdict_class(binarize(labels[i], bst));
            if (gold[i] == 1) ++row.human;
            else ++row.ai;
            if (verdict_class(binarize(scores.score[i], bst)) == gold[i]) ++correct;
        }
        row.acc = static_cast<double>(correct) / static_cast<double>(labels.size());
        row.degenerate = row.human == 0 || row.ai == 0;
        if (!row.degenerate) row.auc = roc_auc(scores.raw, gold);
        rows.push_back(row);
    }
    return rows;
}

std::vector<SweepRow> bst_sweep(const DetectorAdapter& adapter, const Dataset& dataset,
                                const std::vector<double>& thresholds) {
    std::vector<double> labels;
    labels.reserve(dataset.records.size());
    for (const auto& r : dataset.records) labels.push_back(r.y_reg);
    return bst_sweep(score_dataset(adapter, dataset), labels, thresholds);
}

std::vector<double> parse_thresholds(std::string_view spec) {
    auto parse_num = [](std::string_view s) {
        try {
            std::size_t used = 0;
            const double v = std::stod(std::string(s), &used);
            if (used != s.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw ConfigError("bad threshold '" + std::string(s) + "'");
        }
    };
    std::vector<double> out;
    const auto dots = spec.find("..");
    if (dots != std::string_view::npos) {
        const double a = parse_num(spec.substr(0, dots));
        std::string_view rest = spec.substr(dots + 2);
        double step = 0.1;
        const auto colon = rest.find(':');
        if (colon != std::string_view::npos) {
            step = parse_num(rest.substr(colon + 1));
            rest = rest.substr(0, colon);
        }
        const double b = parse_num(rest);
        if (!(step > 0.0) || b < a) throw ConfigError("bad threshold range");
        const auto count = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9)) + 1;
        for (std::size_t i = 0; i < count; ++i) {
            out.push_back(std::round((a + static_cast<double>(i) * step) * 1e9) / 1e9);
        }
    } else {
        std::size_t start = 0;
        while (start <= spec.size()) {
            const auto comma = spec.find(',', start);
            const auto end = comma == std::string_view::npos ? spec.size() : comma;
            out.push_back(parse_num(spec.substr(start, end - start)));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
    }
    for (double t : out) {
        if (!(t > 0.0 && t < 1.0)) throw ConfigError(fmt::format("threshold {} not in (0, 1)", t));
    }
    return out;
}

Line fitted_line(std::span<const double> preds, std::span<const double> labels) {
    require_same_length(preds.size(), labels.size(), "fitted_line");
    if (preds.size() < 2) throw DegenerateRange("fitted_line needs at least two points");
    return ols(labels, preds);
}

double spearman(std::span<const double> x, std::span<const double> y) {
    require_same_length(x.size(), y.size(), "spearman");
    if (x.size() < 2) throw InsufficientData("spearman needs at least two points");
    const auto rx = midranks(x);
    const auto ry = midranks(y);
    return pearson(rx, ry);
}

DenoisedCorrelation spearman_denoised(std::span<const double> x, std::span<const double> y) {
    require_same_length(x.size(), y.size(), "spearman_denoised");
    if (x.size() < 3) throw InsufficientData("spearman_denoised needs at least 3 points");
    DenoisedCorrelation out;
    out.rho_raw = spearman(x, y);
    const Line fit = ols(x, y);
    const std::size_t n = x.size();
    std::vector<double> resid(n);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        resid[i] = y[i] - (fit.intercept + fit.slope * x[i]);
        mean += resid[i];
    }
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double r : resid) ss += (r - mean) * (r - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    // Residuals at rounding level are never outliers.
    double spread = 0.0;
    for (double v : y) spread = std::max(spread, std::abs(v));
    const double floor = 1e-12 * std::max(spread, 1.0);
    std::vector<double> kx, ky;
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(resid[i]) > 2.0 * sd && std::abs(resid[i]) > floor) {
            out.outliers.push_back(i);
        } else {
            kx.push_back(x[i]);
            ky.push_back(y[i]);
        }
    }
    if (kx.size() < 3) throw InsufficientData("fewer than 3 points survive denoising");
    out.rho_denoised = spearman(kx, ky);
    return out;
}

std::vector<GeneratorRow> cross_model_report(const DetectorAdapter& adapter,
                                             const std::map<std::string, Dataset>& datasets) {
    std::vector<GeneratorRow> rows;
    for (const auto& [name, ds] : datasets) {
        const AdapterScores s = score_dataset(adapter, ds);
        std::vector<double> labels;
        for (const auto& r : ds.records) labels.push_back(r.y_reg);
        rows.push_back({name, ds.records.size(), regression_metrics(s.score, labels)});
    }
    return rows;
}

namespace {

nlohmann::json dataset_provenance(const Dataset& ds) {
    return {{"kind", ds.meta.kind},
            {"seed", ds.meta.seed},
            {"generator_model", ds.meta.generator_model},
            {"template", ds.meta.template_name},
            {"embedder", ds.meta.embedder},
            {"tokenizer", ds.meta.tokenizer},
            {"normalization", ds.meta.normalization.provenance},
            {"count", ds.records.size()}};
}

}  // namespace

EvalReport evaluate(const detector::Detector& detector, const Dataset& dataset,
                    const std::vector<double>& thresholds) {
    if (dataset.records.empty()) throw InsufficientData("evaluation dataset is empty");
    std::vector<std::string> texts;
    std::vector<double> labels;
    std::vector<TokenLabelVector> gold;
    for (const auto& r : dataset.records) {
        texts.push_back(r.generated);
        labels.push_back(r.y_reg);
        gold.push_back(r.y_cls);
    }
    const std::vector<detector::Prediction> preds = detector.predict(texts);

    EvalReport rep;
    rep.n = dataset.records.size();
    rep.provenance = dataset_provenance(dataset);
    rep.provenance["detector_mode"] = std::string(detector::mode_name(detector.config().mode));
    rep.provenance["encoder"] = detector.config().encoder;
    AdapterScores scores;
    if (detector.config().mode == detector::TrainMode::kBinary) {
        rep.detector = "classifier";
        for (const auto& p : preds) {
            scores.score.push_back(p.human_probability);
            scores.raw.push_back(p.human_probability);
        }
    } else {
        rep.detector = "regression";
        std::vector<TokenLabelVector> predicted;
        for (const auto& p : preds) {
            scores.score.push_back(p.involvement);
            scores.raw.push_back(p.y_reg_hat);
            predicted.push_back(p.token_labels);
        }
        if (detector.config().mode != detector::TrainMode::kTokenOnly) {
            rep.regression = regression_metrics(scores.score, labels);
            try {
                rep.fit = fitted_line(scores.score, labels);
            } catch (const DegenerateRange&) {
                rep.fit.reset();
            }
        }
        if (detector.config().mode != detector::TrainMode::kRegressionOnly) {
            rep.tokens = token_metrics(predicted, gold);
        }
    }
    for (std::size_t i = 0; i < labels.size(); ++i) rep.scatter.emplace_back(labels[i], scores.score[i]);
    rep.sweep = bst_sweep(scores, labels, thresholds);
    return rep;
}

EvalReport evaluate(const DetectorAdapter& adapter, const Dataset& dataset,
                    const std::vector<double>& thresholds) {
    if (dataset.records.empty()) throw InsufficientData("evaluation dataset is empty");
    std::vector<double> labels;
    for (const auto& r : dataset.records) labels.push_back(r.y_reg);
    const AdapterScores scores = score_dataset(adapter, dataset);
    EvalReport rep;
    rep.detector = adapter.name();
    rep.n = labels.size();
    rep.provenance = dataset_provenance(dataset);
    rep.regression = regression_metrics(scores.score, labels);
    try {
        rep.fit = fitted_line(scores.score, labels);
    } catch (const DegenerateRange&) {
        rep.fit.reset();
    }
    for (std::size_t i = 0; i < labels.size(); ++i) rep.scatter.emplace_back(labels[i], scores.score[i]);
    rep.sweep = bst_sweep(scores, labels, thresholds);
    return rep;
}

nlohmann::json to_json(const EvalReport& r) {
    nlohmann::json j;
    j["detector"] = r.detector;
    j["n"] = r.n;
    j["mse"] = r.regression ? nlohmann::json(r.regression->mse) : nlohmann::json(nullptr);
    j["acc_within_015"] =
        r.regression ? nlohmann::json(r.regression->acc_within) : nlohmann::json(nullptr);
    j["token_acc"] = r.tokens ? nlohmann::json(r.tokens->acc) : nlohmann::json(nullptr);
    j["token_f1"] = r.tokens ? nlohmann::json(r.tokens->f1) : nlohmann::json(nullptr);
    j["fit_slope"] = r.fit ? nlohmann::json(r.fit->slope) : nlohmann::json(nullptr);
    j["fit_intercept"] = r.fit ? nlohmann::json(r.fit->intercept) : nlohmann::json(nullptr);
    nlohmann::json sweep = nlohmann::json::array();
    for (const auto& row : r.sweep) {
        sweep.push_back({{"threshold", row.threshold},
                         {"acc", row.acc},
                         {"auc", row.auc ? nlohmann::json(*row.auc) : nlohmann::json(nullptr)},
                         {"human", row.human},
                         {"ai", row.ai},
                         {"degenerate", row.degenerate}});
    }
    j["sweep"] = sweep;
    j["provenance"] = r.provenance;
    return j;
}

std::string to_markdown(const EvalReport& r) {
    std::string out = fmt::format("## Evaluation: {} ({} pairs)\n\n", r.detector, r.n);
    out += "| Metric | Value |\n|---|---|\n";
    auto metric_row = [&out](const char* name, const std::optional<double>& v) {
        out += fmt::format("| {} | {} |\n", name, fmt_opt(v));
    };
    metric_row("MSE", r.regression ? std::optional(r.regression->mse) : std::nullopt);
    metric_row("ACC (±0.15)", r.regression ? std::optional(r.regression->acc_within) : std::nullopt);
    metric_row("Token ACC", r.tokens ? std::optional(r.tokens->acc) : std::nullopt);
    metric_row("Token F1", r.tokens ? std::optional(r.tokens->f1) : std::nullopt);
    metric_row("Fit slope", r.fit ? std::optional(r.fit->slope) : std::nullopt);
    metric_row("Fit intercept", r.fit ? std::optional(r.fit->intercept) : std::nullopt);

    if (!r.sweep.empty()) {
        out += "\n| Model/BST |";
        std::string rule = "|---|";
        for (const auto& row : r.sweep) {
            out += fmt::format(" {:g} |", row.threshold);
            rule += "---|";
        }
        out += "\n" + rule + "\n";
        out += fmt::format("| {} ACC |", r.detector);
        bool any_degenerate = false;
        for (const auto& row : r.sweep) {
            out += fmt::format(" {:.2f}{} |", row.acc, row.degenerate ? "*" : "");
            any_degenerate = any_degenerate || row.degenerate;
        }
        out += fmt::format("\n| {} AUC |", r.detector);
        for (const auto& row : r.sweep) out += fmt::format(" {} |", fmt_opt(row.auc));
        out += "\n";
        if (any_degenerate) out += "\n\\* ground truth has a single class at this threshold.\n";
    }

    out += "\nReference rows (published accuracies on a continuous set, not recomputed here):\n\n";
    out += "| Model/BST | 0.1 | 0.2 | 0.3 | 0.4 | 0.5 | 0.6 | 0.7 | 0.8 | 0.9 |\n";
    out += "|---|---|---|---|---|---|---|---|---|---|\n";
    for (const auto& ref : kReferenceRows) {
        out += fmt::format("| {} |", ref.name);
        for (double a : ref.acc) out += fmt::format(" {:.2f} |", a);
        out += "\n";
    }
    return out;
}

std::string cross_model_markdown(const std::vector<GeneratorRow>& rows) {
    std::string out = "| Generator | n | MSE | ACC (±0.15) |\n|---|---|---|---|\n";
    for (const auto& r : rows) {
        out += fmt::format("| {} | {} | {:.4f} | {:.1f}% |\n", r.generator, r.n, r.metrics.mse,
                           100.0 * r.metrics.acc_within);
    }
    return out;
}

void write_scatter_csv(const std::filesystem::path& path, const EvalReport& report) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << "label,prediction\n";
    for (const auto& [label, pred] : report.scatter) {
        out << fmt::format("{:.17g},{:.17g}\n", label, pred);
    }
    if (!out) throw IoError("short write to " + path.string());
}

}  // namespace involve::eval
