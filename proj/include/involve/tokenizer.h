#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "involve/textprep.h"

namespace involve {

inline constexpr std::size_t kDefaultMaxLen = 368;

inline constexpr std::int32_t kPadId = 0;
inline constexpr std::int32_t kBosId = 1;
inline constexpr std::int32_t kEosId = 2;

struct TokenPiece {
    std::string text;
    std::int32_t id = kPadId;
    CharSpan span;               // into Encoding::text; empty for specials
    std::size_t word_index = 0;  // index into Encoding::words, valid unless special
    bool special = false;
};

// Tokenized, truncated and padded view of one document.
struct Encoding {
    std::string text;                  // normalized document text
    std::vector<AnalyzedToken> words;  // word-level analysis of `text`
    std::vector<TokenPiece> pieces;    // real positions, specials included
    std::vector<std::int32_t> ids;     // max_len entries, padded with kPadId
    std::size_t attention_len = 0;     // == pieces.size()
};

// Subword tokenizer of the detector. Every non-special piece maps back to
// exactly one word of textprep's analysis and a character span inside it.
class DetectorTokenizer {
public:
    virtual ~DetectorTokenizer() = default;
    virtual std::string id() const = 0;
    virtual std::size_t max_len() const = 0;
    virtual std::size_t vocab_size() const = 0;
    virtual Encoding encode(std::string_view text) const = 0;
};

// Hashed subword vocabulary: words up to `whole_word_bytes` bytes are a
// single piece; longer words are cut into `chunk_bytes` pieces with "##"
// continuation marks. Piece ids are FNV-1a hashes into a fixed bucket count.
class HashedPieceTokenizer final : public DetectorTokenizer {
public:
    explicit HashedPieceTokenizer(std::size_t max_len = kDefaultMaxLen,
                                  std::size_t buckets = 4096);

    std::string id() const override;
    std::size_t max_len() const override { return max_len_; }
    std::size_t vocab_size() const override { return buckets_ + 3; }
    Encoding encode(std::string_view text) const override;

    std::int32_t piece_id(std::string_view piece) const;

private:
    std::size_t max_len_;
    std::size_t buckets_;
    static constexpr std::size_t kWholeWordBytes = 8;
    static constexpr std::size_t kChunkBytes = 6;
};

// Recognizes identifiers of the form "hashpiece-<buckets>/1".
std::unique_ptr<DetectorTokenizer> make_tokenizer(std::string_view id, std::size_t max_len);
std::string default_tokenizer_id();

}  // namespace involve
