#pragma once

// Construction of continuous-involvement and polarized datasets from
// human-written abstracts.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "involve/dataset.h"
#include "involve/embedder.h"
#include "involve/llm_client.h"
#include "involve/rng.h"
#include "involve/tokenizer.h"

namespace involve {

struct Abstract {
    std::string id;
    std::string title;
    std::string text;
    std::vector<Sentence> sentences;
};

Abstract make_abstract(std::string id, std::string title, std::string text);

// Reads JSON lines with "id", "title" and "abstract" fields, or a plain-text
// file of blank-line separated blocks whose first line is the title.
std::vector<Abstract> load_abstracts(const std::filesystem::path& path);

// Draws Z uniformly from 1..n, then Z distinct sentence indices without
// replacement; the prompt lists the chosen sentences in document order.
PromptSpec sample_prompt(const Abstract& abstract, TemplateVariant variant, Rng& rng);

struct ForgeOptions {
    std::size_t count = 200;
    std::uint64_t seed = 0;
    TemplateVariant variant = TemplateVariant::kDirect;
    RetryPolicy retry;
    std::size_t concurrency = 4;
    double max_requests_per_second = 0.0;  // 0 disables pacing
    double max_failure_fraction = 0.1;
    // When set, every prompt uses Z = n (all sentences) or Z = 1.
    enum class ZMode { kUniform, kAll, kOne } z_mode = ZMode::kUniform;
};

// sample -> generate -> score -> normalize over the batch -> token labels.
// Failed generations are logged and skipped; throws GenerationFailed when
// more than max_failure_fraction of the records fail.
Dataset build_continuous_dataset(const std::vector<Abstract>& abstracts, const LLMClient& client,
                                 const ContextualEmbedder& embedder,
                                 const DetectorTokenizer& tokenizer, const ForgeOptions& options);

// options.count records per class: generations from title-only prompts
// (class 0, y_reg 0) and the human abstracts verbatim (class 1, y_reg 1).
Dataset build_polarized_dataset(const std::vector<Abstract>& abstracts, const LLMClient& client,
                                const ContextualEmbedder& embedder,
                                const DetectorTokenizer& tokenizer, const ForgeOptions& options);

// Assigns polar_class = 1 iff y_reg > bst. Throws PartitionDegenerate when a
// class would be empty and ConfigError when bst is outside (0, 1).
Dataset polarize_dataset(const Dataset& dataset, double bst);

}  // namespace involve
