#pragma once

// Analysis of an unseen document and its two-tone HTML rendering.

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "involve/bst.h"
#include "involve/detector/detector.h"
#include "involve/textprep.h"
#include "involve/token_labeling.h"
#include "involve/tokenizer.h"

namespace involve {

struct AttributedSpan {
    CharSpan span;      // byte offsets into AnalysisResult::text
    bool human = false;
};

struct AnalysisResult {
    std::string text;  // normalized document text
    double involvement = 0.0;
    double y_reg_hat = 0.0;
    TokenLabelVector token_labels;
    std::vector<CharSpan> human_spans;  // sorted, non-overlapping
    double bst = 0.5;
    Verdict verdict = Verdict::kAIGeneration;
    std::string model_id;
    std::string encoder;
    std::string tokenizer;
};

// Character spans of the pieces labeled 1, merging pieces of one word.
std::vector<CharSpan> label_spans(const Encoding& encoding, const TokenLabelVector& labels);

// Alternating machine/human segments covering the whole text.
std::vector<AttributedSpan> segments(const std::string& text, const std::vector<CharSpan>& human);

AnalysisResult analyze_document(const detector::Detector& detector, std::string_view document,
                                const BSTConfig& bst, std::string model_id);

std::string html_escape(std::string_view s);
// Self-contained HTML page; a pure function of the result.
std::string render_html(const AnalysisResult& result);
nlohmann::json to_json(const AnalysisResult& result);

}  // namespace involve
