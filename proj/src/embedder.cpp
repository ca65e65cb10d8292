#include "involve/embedder.h"

#include <cmath>

#include "involve/errors.h"
#include "involve/rng.h"
#include "involve/textprep.h"

namespace involve {

namespace {

constexpr std::uint64_t kDefaultSeed = 0x5eed0f1e1dULL;

void add_scaled(std::vector<double>& acc, const std::vector<double>& v, double w) {
    for (std::size_t p = 0; p < acc.size(); ++p) acc[p] += w * v[p];
}

void unit(std::vector<double>& v) {
    double sq = 0.0;
    for (double x : v) sq += x * x;
    const double n = std::sqrt(sq);
    for (double& x : v) x /= n;
}

}  // namespace

HashingContextEmbedder::HashingContextEmbedder(std::string id, std::size_t dim,
                                               double context_weight, std::uint64_t seed)
    : id_(std::move(id)), dim_(dim), context_weight_(context_weight), seed_(seed) {
    if (dim_ == 0) throw EmbedderError("embedding dimension must be positive");
}

std::vector<double> HashingContextEmbedder::key_vector(std::string_view key) const {
    Rng rng(fnv1a64(key, fnv1a64(id_) ^ seed_));
    std::vector<double> v(dim_);
    for (double& x : v) x = rng.normal();
    unit(v);
    return v;
}

TokenEmbeddings HashingContextEmbedder::embed(std::string_view text) const {
    const std::vector<AnalyzedToken> tokens = analyze_tokens(text);
    if (tokens.empty()) throw EmptyInput("nothing to embed");

    std::vector<std::vector<double>> base;
    base.reserve(tokens.size());
    for (const auto& t : tokens) {
        std::vector<double> v = key_vector("L:" + t.lemma);
        add_scaled(v, key_vector("S:" + ascii_lower(t.surface)), 0.5);
        unit(v);
        base.push_back(std::move(v));
    }

    const std::size_t n = tokens.size();
    std::vector<double> values;
    values.reserve((n + 2) * dim_);
    std::vector<bool> special;
    special.reserve(n + 2);

    auto push = [&](const std::vector<double>& v, bool is_special) {
        values.insert(values.end(), v.begin(), v.end());
        special.push_back(is_special);
    };

    push(key_vector("<bos>"), true);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> v = base[i];
        if (i > 0) add_scaled(v, base[i - 1], context_weight_);
        if (i + 1 < n) add_scaled(v, base[i + 1], context_weight_);
        unit(v);
        push(v, false);
    }
    push(key_vector("<eos>"), true);

    return {EmbeddingMatrix(n + 2, dim_, std::move(values)), std::move(special)};
}

std::string default_embedder_id() { return "hash-ctx/1"; }

std::unique_ptr<ContextualEmbedder> make_embedder(std::string_view id) {
    if (id == "hash-ctx/1") {
        return std::make_unique<HashingContextEmbedder>(std::string(id), 64, 0.3, kDefaultSeed);
    }
    if (id == "hash-bow/1") {
        return std::make_unique<HashingContextEmbedder>(std::string(id), 64, 0.0, kDefaultSeed);
    }
    throw EmbedderError("unknown embedder '" + std::string(id) + "'");
}

}  // namespace involve
