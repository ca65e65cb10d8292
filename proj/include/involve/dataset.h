#pragma once

// Dataset records and their on-disk form: one JSON object per line
// (`<name>.jsonl`) plus a sidecar metadata document (`<name>.jsonl.meta.json`).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "involve/similarity.h"
#include "involve/textprep.h"
#include "involve/token_labeling.h"

namespace involve {

enum class TemplateVariant { kDirect, kStudent, kDual, kSummarization };

// Prompt template with a single "{X}" placeholder for the human content.
std::string_view template_text(TemplateVariant v);
std::string_view template_name(TemplateVariant v);
// Accepts direct | student | dual | summarization. Throws ConfigError.
TemplateVariant parse_template(std::string_view name);
std::vector<TemplateVariant> all_templates();

// Substitutes `content` for {X}. A template period right after {X} is dropped
// when the content already ends with sentence punctuation.
std::string render_prompt(TemplateVariant v, std::string_view content);

struct ExtractedPrompt {
    TemplateVariant variant;
    std::string content;
};
// Inverse of render_prompt; nullopt when the text matches no template.
std::optional<ExtractedPrompt> extract_prompt_content(std::string_view rendered);

struct PromptSpec {
    std::string source_doc_id;
    std::size_t z = 0;
    std::vector<std::size_t> sentence_indices;
    TemplateVariant variant = TemplateVariant::kDirect;
    std::string rendered;

    bool operator==(const PromptSpec&) const = default;
};

struct LabeledPair {
    std::uint64_t pair_id = 0;
    std::string prompt;
    std::string generated;
    double y_reg = 0.0;
    TokenLabelVector y_cls;
    std::string generator_model;
    std::optional<PromptSpec> prompt_spec;  // absent for human-written records
    std::optional<RawScores> raw;           // absent when y_reg is assigned by definition
    std::optional<int> polar_class;         // set in polarized datasets
    std::string preproc;                    // preproc_signature() of the labeling run
    std::string normalization;              // provenance of the constants used for y_reg

    bool operator==(const LabeledPair& o) const;
};

struct DatasetMeta {
    std::string format = "involve-dataset/1";
    std::string kind;  // "continuous" | "polarized" | "binarized"
    std::uint64_t seed = 0;
    std::string template_name;
    std::string generator_model;
    nlohmann::json llm_params = nlohmann::json::object();
    std::string embedder;
    std::string tokenizer;
    std::size_t max_len = 368;
    NormalizationConstants normalization;
    PreprocConfig preproc;
    std::size_t count = 0;
    std::size_t failed = 0;
    std::optional<double> bst;  // set by polarize_dataset

    bool operator==(const DatasetMeta& o) const;
};

struct Dataset {
    DatasetMeta meta;
    std::vector<LabeledPair> records;
};

std::string preproc_signature(const PreprocConfig& config);

nlohmann::json to_json(const PromptSpec& s);
PromptSpec prompt_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LabeledPair& p);
LabeledPair labeled_pair_from_json(const nlohmann::json& j, std::size_t max_len);
nlohmann::json to_json(const DatasetMeta& m);
DatasetMeta dataset_meta_from_json(const nlohmann::json& j);

// Checks y_reg range, label-vector invariants and non-empty generated text.
// Throws FormatError.
void validate(const LabeledPair& p, std::size_t max_len);

std::filesystem::path meta_path_for(const std::filesystem::path& records_path);

// Records serialized exactly as written to disk (one line each).
std::string serialize_records(const Dataset& dataset);
void write_dataset(const std::filesystem::path& records_path, const Dataset& dataset);
Dataset read_dataset(const std::filesystem::path& records_path);

}  // namespace involve
