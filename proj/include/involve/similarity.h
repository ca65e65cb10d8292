#pragma once

// Greedy token-matching similarity between a prompt and a generated text,
// and its min-max normalization into involvement / utilization /
// similarity scores.

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace involve {

class ContextualEmbedder;

class EmbeddingMatrix {
public:
    EmbeddingMatrix() = default;
    // Throws EmptyInput for zero rows/cols, DimensionError when values.size()
    // != rows * cols, NumericalError on non-finite entries.
    EmbeddingMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool unit_normalized() const { return unit_normalized_; }
    std::span<const double> values() const { return values_; }
    std::span<const double> row(std::size_t i) const {
        return std::span<const double>(values_).subspan(i * cols_, cols_);
    }

    // Copy with every row scaled to unit L2 norm. Throws NumericalError on a
    // zero row.
    EmbeddingMatrix normalized() const;
    // Copy keeping only the rows where keep[i] is true.
    EmbeddingMatrix select_rows(const std::vector<bool>& keep) const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
    bool unit_normalized_ = false;
};

struct RawScores {
    double recall = 0.0;
    double precision = 0.0;
    double f1 = 0.0;
};

struct NormalizationConstants {
    double score_min = 0.3;
    double score_max = 1.0;
    std::string provenance = "fixed:0.3-1.0";

    // Constants used when no labeling batch is available.
    static NormalizationConstants fallback();
};

struct InvolvementScores {
    RawScores raw;
    double involvement = 0.0;  // normalized recall
    double utilization = 0.0;  // normalized precision
    double similarity = 0.0;   // normalized f1
};

// Harmonic mean of precision and recall. Zero when the two have opposite
// signs or sum to zero.
double harmonic_f1(double precision, double recall);

// recall: mean over reference rows of the best inner product against any
// candidate row; precision: the same with roles swapped.
// Both matrices must be unit-normalized and share the embedding dimension.
RawScores greedy_match_scores(const EmbeddingMatrix& reference, const EmbeddingMatrix& candidate);

// Embeds the prompt (reference) and generated text (candidate), drops
// special tokens, unit-normalizes rows and runs greedy matching.
RawScores score_pair(std::string_view prompt, std::string_view generated,
                     const ContextualEmbedder& embedder);

NormalizationConstants fit_normalization(std::span<const double> raw_recalls,
                                         std::string provenance = "batch");

double normalize_value(double value, const NormalizationConstants& constants);
InvolvementScores normalize_scores(const RawScores& raw, const NormalizationConstants& constants);

nlohmann::json to_json(const RawScores& s);
RawScores raw_scores_from_json(const nlohmann::json& j);
nlohmann::json to_json(const NormalizationConstants& c);
NormalizationConstants normalization_from_json(const nlohmann::json& j);
nlohmann::json to_json(const InvolvementScores& s);

void write_normalization(const std::filesystem::path& path, const NormalizationConstants& c);
NormalizationConstants read_normalization(const std::filesystem::path& path);

}  // namespace involve
