#include "involve/token_labeling.h"

#include "involve/errors.h"

namespace involve {

std::unordered_set<std::string> content_lemmas(std::string_view text) {
    std::unordered_set<std::string> lemmas;
    for (const auto& t : analyze_tokens(text)) {
        if (!t.is_stop && !t.is_punct) lemmas.insert(t.lemma);
    }
    return lemmas;
}

TokenLabelVector common_token_labels(const std::unordered_set<std::string>& prompt_lemmas,
                                     const Encoding& generated, std::size_t max_len) {
    TokenLabelVector v;
    v.labels.assign(max_len, 0);
    v.attention_len = generated.attention_len;
    for (std::size_t i = 0; i < generated.pieces.size() && i < max_len; ++i) {
        const TokenPiece& piece = generated.pieces[i];
        if (piece.special) continue;
        const AnalyzedToken& word = generated.words[piece.word_index];
        if (word.is_stop || word.is_punct) continue;
        if (prompt_lemmas.count(word.lemma) > 0) v.labels[i] = 1;
    }
    return v;
}

TokenLabelVector common_token_labels(std::string_view prompt, std::string_view generated,
                                     const DetectorTokenizer& tokenizer) {
    return common_token_labels(content_lemmas(prompt), tokenizer.encode(generated),
                               tokenizer.max_len());
}

double label_coverage(const TokenLabelVector& v) {
    if (v.attention_len == 0) throw EmptyVector("label vector has no real positions");
    std::size_t ones = 0;
    for (std::size_t i = 0; i < v.attention_len; ++i) ones += v.labels[i];
    return static_cast<double>(ones) / static_cast<double>(v.attention_len);
}

void validate(const TokenLabelVector& v, std::size_t max_len) {
    if (v.labels.size() != max_len) {
        throw FormatError("label vector has length " + std::to_string(v.labels.size()) +
                          ", expected " + std::to_string(max_len));
    }
    if (v.attention_len > max_len) throw FormatError("attention_len exceeds vector length");
    for (std::size_t i = 0; i < v.labels.size(); ++i) {
        if (v.labels[i] > 1) throw FormatError("label values must be 0 or 1");
        if (i >= v.attention_len && v.labels[i] != 0) {
            throw FormatError("padding position " + std::to_string(i) + " is labeled 1");
        }
    }
}

nlohmann::json to_json(const TokenLabelVector& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (auto x : v.labels) arr.push_back(static_cast<int>(x));
    return arr;
}

TokenLabelVector token_labels_from_json(const nlohmann::json& labels, std::size_t attention_len) {
    TokenLabelVector v;
    v.attention_len = attention_len;
    v.labels.reserve(labels.size());
    for (const auto& x : labels) {
        int value = x.get<int>();
        if (value != 0 && value != 1) throw FormatError("label values must be 0 or 1");
        v.labels.push_back(static_cast<std::uint8_t>(value));
    }
    return v;
}

}  // namespace involve
