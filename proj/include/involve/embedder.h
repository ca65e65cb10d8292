#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "involve/similarity.h"

namespace involve {

struct TokenEmbeddings {
    EmbeddingMatrix matrix;
    std::vector<bool> is_special;  // one flag per row
};

// Maps a text to one embedding row per token. Implementations must be
// deterministic. concurrent_safe() reports whether embed() may be called
// from several threads at once.
class ContextualEmbedder {
public:
    virtual ~ContextualEmbedder() = default;
    virtual std::string id() const = 0;
    virtual std::size_t dim() const = 0;
    virtual bool concurrent_safe() const = 0;
    virtual TokenEmbeddings embed(std::string_view text) const = 0;
};

// Deterministic stand-in for a pretrained contextual encoder. Each token gets
// a pseudo-random Gaussian direction keyed on its lemma and surface form; a
// window of neighbouring tokens is mixed in so the same word in different
// contexts maps to nearby but distinct vectors. A boundary row is emitted at
// both ends of the sequence and flagged as special.
class HashingContextEmbedder final : public ContextualEmbedder {
public:
    HashingContextEmbedder(std::string id, std::size_t dim, double context_weight,
                           std::uint64_t seed);

    std::string id() const override { return id_; }
    std::size_t dim() const override { return dim_; }
    bool concurrent_safe() const override { return true; }
    TokenEmbeddings embed(std::string_view text) const override;

private:
    std::vector<double> key_vector(std::string_view key) const;

    std::string id_;
    std::size_t dim_;
    double context_weight_;
    std::uint64_t seed_;
};

// Known identifiers: "hash-ctx/1" (default, dim 64) and "hash-bow/1"
// (no context mixing). Throws EmbedderError for unknown identifiers.
std::unique_ptr<ContextualEmbedder> make_embedder(std::string_view id);
std::string default_embedder_id();

}  // namespace involve
