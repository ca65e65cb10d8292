#include "involve/tokenizer.h"

#include <charconv>

#include "involve/errors.h"
#include "involve/rng.h"

namespace involve {

namespace {

bool is_continuation_byte(char c) { return (static_cast<unsigned char>(c) & 0xC0) == 0x80; }

}  // namespace

HashedPieceTokenizer::HashedPieceTokenizer(std::size_t max_len, std::size_t buckets)
    : max_len_(max_len), buckets_(buckets) {
    if (max_len_ < 3) throw ConfigError("tokenizer max_len must be at least 3");
    if (buckets_ == 0) throw ConfigError("tokenizer needs at least one bucket");
}

std::string HashedPieceTokenizer::id() const {
    return "hashpiece-" + std::to_string(buckets_) + "/1";
}

std::int32_t HashedPieceTokenizer::piece_id(std::string_view piece) const {
    return static_cast<std::int32_t>(3 + fnv1a64(piece) % buckets_);
}

Encoding HashedPieceTokenizer::encode(std::string_view raw) const {
    Encoding enc;
    enc.text = normalize_text(raw);
    enc.words = analyze_tokens(enc.text);

    const std::size_t budget = max_len_ - 2;
    std::vector<TokenPiece> body;
    for (std::size_t w = 0; w < enc.words.size() && body.size() < budget; ++w) {
        const AnalyzedToken& word = enc.words[w];
        const std::string lower = ascii_lower(word.surface);
        if (word.is_punct || lower.size() <= kWholeWordBytes) {
            body.push_back({lower, piece_id(lower), word.char_span, w, false});
            continue;
        }
        std::size_t pos = 0;
        while (pos < lower.size() && body.size() < budget) {
            std::size_t end = std::min(pos + kChunkBytes, lower.size());
            while (end < lower.size() && is_continuation_byte(lower[end])) ++end;
            std::string chunk = lower.substr(pos, end - pos);
            std::string key = pos == 0 ? chunk : "##" + chunk;
            CharSpan span{word.char_span.start + pos, word.char_span.start + end};
            body.push_back({chunk, piece_id(key), span, w, false});
            pos = end;
        }
    }

    enc.pieces.reserve(body.size() + 2);
    enc.pieces.push_back({"<s>", kBosId, {}, 0, true});
    for (auto& p : body) enc.pieces.push_back(std::move(p));
    enc.pieces.push_back({"</s>", kEosId, {}, 0, true});

    enc.attention_len = enc.pieces.size();
    enc.ids.assign(max_len_, kPadId);
    for (std::size_t i = 0; i < enc.pieces.size(); ++i) enc.ids[i] = enc.pieces[i].id;
    return enc;
}

std::string default_tokenizer_id() { return "hashpiece-4096/1"; }

std::unique_ptr<DetectorTokenizer> make_tokenizer(std::string_view id, std::size_t max_len) {
    constexpr std::string_view prefix = "hashpiece-";
    constexpr std::string_view suffix = "/1";
    if (id.starts_with(prefix) && id.ends_with(suffix)) {
        std::string_view digits = id.substr(prefix.size(), id.size() - prefix.size() - suffix.size());
        std::size_t buckets = 0;
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), buckets);
        if (ec == std::errc() && ptr == digits.data() + digits.size() && buckets > 0) {
            return std::make_unique<HashedPieceTokenizer>(max_len, buckets);
        }
    }
    throw ConfigError("unknown tokenizer '" + std::string(id) + "'");
}

}  // namespace involve
