#pragma once

#include <cstdint>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "involve/tokenizer.h"

namespace involve {

// Per-position human-contribution labels over the detector tokenization of a
// generated text. Length is the tokenizer's max_len (368 by default);
// positions at or beyond attention_len are padding and always 0.
struct TokenLabelVector {
    std::vector<std::uint8_t> labels;
    std::size_t attention_len = 0;

    bool operator==(const TokenLabelVector&) const = default;
};

// Lemmas of the content words (no stop words, no punctuation) of a text.
std::unordered_set<std::string> content_lemmas(std::string_view text);

// A piece is labeled 1 iff its parent word is a content word whose lemma is
// in the prompt's content-lemma set. Specials and padding are 0.
TokenLabelVector common_token_labels(std::string_view prompt, std::string_view generated,
                                     const DetectorTokenizer& tokenizer);
TokenLabelVector common_token_labels(const std::unordered_set<std::string>& prompt_lemmas,
                                     const Encoding& generated, std::size_t max_len);

// Fraction of real positions labeled 1. Throws EmptyVector when
// attention_len is 0.
double label_coverage(const TokenLabelVector& v);

// Throws FormatError unless the labels are 0/1, the length is max_len and
// padding is zero.
void validate(const TokenLabelVector& v, std::size_t max_len);

nlohmann::json to_json(const TokenLabelVector& v);
TokenLabelVector token_labels_from_json(const nlohmann::json& labels, std::size_t attention_len);

}  // namespace involve
