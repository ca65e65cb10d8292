#pragma once

// Deterministic English text preprocessing: canonical normalization,
// sentence splitting, word tokenization, lemmatization and stop-word /
// punctuation flagging. All functions are pure; the stop list and lemma
// tables are immutable statics, so concurrent callers need no locking.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace involve {

struct CharSpan {
    std::size_t start = 0;  // byte offset, inclusive
    std::size_t end = 0;    // byte offset, exclusive

    std::size_t size() const { return end - start; }
    bool operator==(const CharSpan&) const = default;
};

struct Sentence {
    std::string text;
    std::size_t index = 0;
    CharSpan span;

    bool operator==(const Sentence&) const = default;
};

struct AnalyzedToken {
    std::string surface;
    std::string lemma;
    bool is_stop = false;
    bool is_punct = false;
    CharSpan char_span;

    bool operator==(const AnalyzedToken&) const = default;
};

// Identifiers of the pinned preprocessing resources. Embedded in dataset
// metadata so labels can be reproduced.
struct PreprocConfig {
    std::string normalizer;
    std::string sentence_splitter;
    std::string lemmatizer;
    std::string stop_list;

    bool operator==(const PreprocConfig&) const = default;
};

PreprocConfig current_preproc_config();
nlohmann::json to_json(const PreprocConfig& config);
PreprocConfig preproc_config_from_json(const nlohmann::json& j);

// NFC composition followed by folding of typographic punctuation (curly
// quotes, dashes, ellipsis, non-breaking spaces) to ASCII. Invalid UTF-8
// sequences are replaced with U+FFFD.
std::string normalize_text(std::string_view text);

// Splits normalized text into sentences. Spans index the normalized text.
// Throws EmptyDocument when the text has no non-whitespace content.
std::vector<Sentence> split_sentences(std::string_view text);

// Word/punctuation tokenization of normalized text. Every non-whitespace
// byte is covered by exactly one token span; spans index normalize_text(text).
std::vector<AnalyzedToken> analyze_tokens(std::string_view text);

std::string lemmatize(std::string_view word);
bool is_stop_word(std::string_view lowercase_word);
std::string ascii_lower(std::string_view s);

}  // namespace involve
