#include "involve/similarity.h"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <numeric>

#include "involve/embedder.h"
#include "involve/errors.h"
#include "involve/kernels.h"

namespace involve {

namespace {

constexpr double kUnitTolerance = 1e-6;

bool has_content(std::string_view s) {
    return std::any_of(s.begin(), s.end(), [](char c) {
        return !(c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v');
    });
}

EmbeddingMatrix content_rows(const TokenEmbeddings& emb) {
    if (emb.is_special.size() != emb.matrix.rows()) {
        throw EmbedderError("embedder returned a special-token mask of the wrong length");
    }
    std::vector<bool> keep(emb.is_special.size());
    for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = !emb.is_special[i];
    return emb.matrix.select_rows(keep).normalized();
}

TokenEmbeddings embed_or_throw(const ContextualEmbedder& embedder, std::string_view text) {
    try {
        return embedder.embed(text);
    } catch (const EmbedderError&) {
        throw;
    } catch (const std::exception& e) {
        throw EmbedderError("embedder '" + embedder.id() + "' failed: " + e.what());
    }
}

}  // namespace

EmbeddingMatrix::EmbeddingMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (rows == 0 || cols == 0) throw EmptyInput("embedding matrix must be non-empty");
    if (values_.size() != rows * cols) {
        throw DimensionError("embedding matrix has " + std::to_string(values_.size()) +
                             " values, expected " + std::to_string(rows * cols));
    }
    bool unit = true;
    for (std::size_t i = 0; i < rows_; ++i) {
        double sq = 0.0;
        for (double v : row(i)) {
            if (!std::isfinite(v)) throw NumericalError("embedding matrix has non-finite values");
            sq += v * v;
        }
        if (std::abs(std::sqrt(sq) - 1.0) > kUnitTolerance) unit = false;
    }
    unit_normalized_ = unit;
}

EmbeddingMatrix EmbeddingMatrix::normalized() const {
    std::vector<double> out(values_);
    for (std::size_t i = 0; i < rows_; ++i) {
        double* r = out.data() + i * cols_;
        double sq = 0.0;
        for (std::size_t p = 0; p < cols_; ++p) sq += r[p] * r[p];
        const double norm = std::sqrt(sq);
        if (norm == 0.0) throw NumericalError("cannot normalize a zero embedding row");
        for (std::size_t p = 0; p < cols_; ++p) r[p] /= norm;
    }
    return EmbeddingMatrix(rows_, cols_, std::move(out));
}

EmbeddingMatrix EmbeddingMatrix::select_rows(const std::vector<bool>& keep) const {
    if (keep.size() != rows_) throw DimensionError("row mask length does not match matrix");
    std::vector<double> out;
    std::size_t kept = 0;
    for (std::size_t i = 0; i < rows_; ++i) {
        if (!keep[i]) continue;
        out.insert(out.end(), row(i).begin(), row(i).end());
        ++kept;
    }
    if (kept == 0) throw EmptyInput("no content tokens left after dropping special tokens");
    return EmbeddingMatrix(kept, cols_, std::move(out));
}

NormalizationConstants NormalizationConstants::fallback() { return {0.3, 1.0, "fixed:0.3-1.0"}; }

double harmonic_f1(double precision, double recall) {
    const double sum = precision + recall;
    if (sum == 0.0) return 0.0;
    if ((precision > 0.0) != (recall > 0.0)) return 0.0;
    return 2.0 * precision * recall / sum;
}

RawScores greedy_match_scores(const EmbeddingMatrix& reference, const EmbeddingMatrix& candidate) {
    if (reference.rows() == 0 || candidate.rows() == 0) {
        throw EmptyInput("greedy matching needs non-empty matrices");
    }
    if (reference.cols() != candidate.cols()) {
        throw DimensionError("embedding dimensions differ: " + std::to_string(reference.cols()) +
                             " vs " + std::to_string(candidate.cols()));
    }
    if (!reference.unit_normalized() || !candidate.unit_normalized()) {
        throw NumericalError("greedy matching expects unit-normalized rows");
    }
    const kernels::Dims rd{reference.rows(), reference.cols()};
    const kernels::Dims cd{candidate.rows(), candidate.cols()};

    std::vector<double> best_for_ref(rd.rows);
    std::vector<double> best_for_cand(cd.rows);
    kernels::parallel::row_max_inner_products(reference.values(), rd, candidate.values(), cd,
                                              best_for_ref);
    kernels::parallel::row_max_inner_products(candidate.values(), cd, reference.values(), rd,
                                              best_for_cand);

    RawScores s;
    s.recall = std::accumulate(best_for_ref.begin(), best_for_ref.end(), 0.0) /
               static_cast<double>(rd.rows);
    s.precision = std::accumulate(best_for_cand.begin(), best_for_cand.end(), 0.0) /
                  static_cast<double>(cd.rows);
    s.f1 = harmonic_f1(s.precision, s.recall);
    return s;
}

RawScores score_pair(std::string_view prompt, std::string_view generated,
                     const ContextualEmbedder& embedder) {
    if (!has_content(prompt)) throw EmptyInput("prompt is empty");
    if (!has_content(generated)) throw EmptyInput("generated text is empty");
    TokenEmbeddings ref = embed_or_throw(embedder, prompt);
    TokenEmbeddings cand = embed_or_throw(embedder, generated);
    return greedy_match_scores(content_rows(ref), content_rows(cand));
}

NormalizationConstants fit_normalization(std::span<const double> raw_recalls,
                                         std::string provenance) {
    if (raw_recalls.size() < 2) {
        throw DegenerateRange("normalization needs at least two scores");
    }
    for (double v : raw_recalls) {
        if (!std::isfinite(v)) throw NumericalError("non-finite score in normalization batch");
    }
    auto [lo, hi] = std::minmax_element(raw_recalls.begin(), raw_recalls.end());
    if (!(*lo < *hi)) throw DegenerateRange("all scores in the batch are equal");
    return {*lo, *hi, std::move(provenance)};
}

double normalize_value(double value, const NormalizationConstants& c) {
    const double v = (value - c.score_min) / (c.score_max - c.score_min);
    return std::clamp(v, 0.0, 1.0);
}

InvolvementScores normalize_scores(const RawScores& raw, const NormalizationConstants& c) {
    if (!(c.score_min < c.score_max)) throw DegenerateRange("score_min must be below score_max");
    InvolvementScores out;
    out.raw = raw;
    out.involvement = normalize_value(raw.recall, c);
    out.utilization = normalize_value(raw.precision, c);
    out.similarity = normalize_value(raw.f1, c);
    return out;
}

nlohmann::json to_json(const RawScores& s) {
    return {{"recall", s.recall}, {"precision", s.precision}, {"f1", s.f1}};
}

RawScores raw_scores_from_json(const nlohmann::json& j) {
    return {j.at("recall").get<double>(), j.at("precision").get<double>(),
            j.at("f1").get<double>()};
}

nlohmann::json to_json(const NormalizationConstants& c) {
    return {{"score_min", c.score_min}, {"score_max", c.score_max}, {"provenance", c.provenance}};
}

NormalizationConstants normalization_from_json(const nlohmann::json& j) {
    NormalizationConstants c{j.at("score_min").get<double>(), j.at("score_max").get<double>(),
                             j.at("provenance").get<std::string>()};
    if (!(c.score_min < c.score_max)) throw DegenerateRange("score_min must be below score_max");
    return c;
}

nlohmann::json to_json(const InvolvementScores& s) {
    return {{"raw", to_json(s.raw)},
            {"involvement", s.involvement},
            {"utilization", s.utilization},
            {"similarity", s.similarity}};
}

void write_normalization(const std::filesystem::path& path, const NormalizationConstants& c) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << to_json(c).dump(2) << '\n';
}

NormalizationConstants read_normalization(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    try {
        return normalization_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

}  // namespace involve
