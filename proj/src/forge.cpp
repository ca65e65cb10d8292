#include "involve/forge.h"

#include <atomic>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "involve/bst.h"
#include "involve/errors.h"
#include "involve/token_labeling.h"

namespace involve {

namespace {

// Runs fn(i) for i in [0, n) on up to `workers` threads. Exceptions escaping
// fn are rethrown on the calling thread after all workers stop.
template <typename Fn>
void run_pool(std::size_t n, std::size_t workers, Fn&& fn) {
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mu);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : threads) t.join();
    if (error) std::rethrow_exception(error);
}

class RateLimiter {
public:
    explicit RateLimiter(double per_second) : per_second_(per_second) {}

    void acquire() {
        if (per_second_ <= 0.0) return;
        std::chrono::steady_clock::time_point slot;
        {
            std::lock_guard lock(mu_);
            auto now = std::chrono::steady_clock::now();
            if (next_ < now) next_ = now;
            slot = next_;
            next_ += std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                std::chrono::duration<double>(1.0 / per_second_));
        }
        std::this_thread::sleep_until(slot);
    }

private:
    double per_second_;
    std::mutex mu_;
    std::chrono::steady_clock::time_point next_{};
};

std::string trim(std::string s) {
    auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!s.empty() && ws(s.back())) s.pop_back();
    std::size_t b = 0;
    while (b < s.size() && ws(s[b])) ++b;
    return s.substr(b);
}

struct Job {
    std::uint64_t pair_id;
    PromptSpec spec;
};

struct Outcome {
    std::optional<GeneratedPair> pair;
    std::string error;
};

std::vector<Outcome> run_generation(const std::vector<Job>& jobs, const LLMClient& client,
                                    const ForgeOptions& options) {
    std::vector<Outcome> outcomes(jobs.size());
    RateLimiter limiter(options.max_requests_per_second);
    const std::size_t workers = client.concurrent_safe() ? options.concurrency : 1;
    run_pool(jobs.size(), workers, [&](std::size_t i) {
        limiter.acquire();
        try {
            outcomes[i].pair = generate_pair(jobs[i].spec, client, options.retry);
        } catch (const GenerationFailed& e) {
            outcomes[i].error = e.what();
        } catch (const EmptyGeneration& e) {
            outcomes[i].error = e.what();
        }
    });
    return outcomes;
}

std::size_t check_failures(const std::vector<Job>& jobs, const std::vector<Outcome>& outcomes,
                           const ForgeOptions& options) {
    std::size_t failed = 0;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (outcomes[i].pair) continue;
        ++failed;
        spdlog::warn("pair {} skipped: {}", jobs[i].pair_id, outcomes[i].error);
    }
    if (!jobs.empty() &&
        static_cast<double>(failed) > options.max_failure_fraction * static_cast<double>(jobs.size())) {
        throw GenerationFailed("aborting dataset build: " + std::to_string(failed) + " of " +
                               std::to_string(jobs.size()) + " generations failed");
    }
    return failed;
}

std::vector<RawScores> score_all(const std::vector<Outcome>& outcomes,
                                 const ContextualEmbedder& embedder, std::size_t concurrency) {
    std::vector<RawScores> scores(outcomes.size());
    const std::size_t workers = embedder.concurrent_safe() ? concurrency : 1;
    run_pool(outcomes.size(), workers, [&](std::size_t i) {
        if (outcomes[i].pair) {
            scores[i] = score_pair(outcomes[i].pair->prompt, outcomes[i].pair->generated, embedder);
        }
    });
    return scores;
}

DatasetMeta base_meta(const LLMClient& client, const ContextualEmbedder& embedder,
                      const DetectorTokenizer& tokenizer, const ForgeOptions& options) {
    DatasetMeta meta;
    meta.seed = options.seed;
    meta.template_name = std::string(template_name(options.variant));
    meta.generator_model = client.model();
    meta.llm_params = client.params();
    meta.embedder = embedder.id();
    meta.tokenizer = tokenizer.id();
    meta.max_len = tokenizer.max_len();
    meta.preproc = current_preproc_config();
    return meta;
}

}  // namespace

Abstract make_abstract(std::string id, std::string title, std::string text) {
    Abstract a;
    a.id = std::move(id);
    a.title = trim(std::move(title));
    a.text = normalize_text(trim(std::move(text)));
    a.sentences = split_sentences(a.text);
    return a;
}

std::vector<Abstract> load_abstracts(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string content = ss.str();

    std::vector<Abstract> out;
    const std::string first = trim(content.substr(0, std::min<std::size_t>(content.size(), 64)));
    if (!first.empty() && first.front() == '{') {
        std::istringstream lines(content);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(lines, line)) {
            ++lineno;
            if (trim(line).empty()) continue;
            try {
                auto j = nlohmann::json::parse(line);
                std::string id = j.contains("id") ? j["id"].get<std::string>()
                                                  : "doc-" + std::to_string(out.size());
                out.push_back(make_abstract(std::move(id), j.value("title", ""),
                                            j.at("abstract").get<std::string>()));
            } catch (const nlohmann::json::exception& e) {
                throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
            }
        }
    } else {
        std::istringstream lines(content);
        std::string line;
        std::vector<std::string> block;
        auto flush = [&] {
            if (block.empty()) return;
            std::string body;
            for (std::size_t i = 1; i < block.size(); ++i) body += (i > 1 ? " " : "") + block[i];
            if (trim(body).empty()) {
                throw FormatError(path.string() + ": abstract '" + block[0] + "' has no body");
            }
            out.push_back(make_abstract("doc-" + std::to_string(out.size()), block[0], body));
            block.clear();
        };
        while (std::getline(lines, line)) {
            if (trim(line).empty()) {
                flush();
            } else {
                block.push_back(trim(line));
            }
        }
        flush();
    }
    if (out.empty()) throw EmptyDocument(path.string() + " contains no abstracts");
    return out;
}

PromptSpec sample_prompt(const Abstract& abstract, TemplateVariant variant, Rng& rng) {
    const std::size_t n = abstract.sentences.size();
    if (n == 0) throw EmptyDocument("abstract " + abstract.id + " has no sentences");
    PromptSpec spec;
    spec.source_doc_id = abstract.id;
    spec.z = 1 + static_cast<std::size_t>(rng.uniform_index(n));
    spec.sentence_indices = rng.sample_without_replacement(n, spec.z);
    spec.variant = variant;
    std::string content;
    for (std::size_t idx : spec.sentence_indices) {
        if (!content.empty()) content += ' ';
        content += abstract.sentences[idx].text;
    }
    spec.rendered = render_prompt(variant, content);
    return spec;
}

Dataset build_continuous_dataset(const std::vector<Abstract>& abstracts, const LLMClient& client,
                                 const ContextualEmbedder& embedder,
                                 const DetectorTokenizer& tokenizer, const ForgeOptions& options) {
    if (abstracts.empty()) throw EmptyDocument("no source abstracts");
    if (options.count == 0) throw ConfigError("count must be at least 1");

    Rng rng(options.seed);
    std::vector<Job> jobs;
    jobs.reserve(options.count);
    for (std::size_t i = 0; i < options.count; ++i) {
        const Abstract& a = abstracts[rng.uniform_index(abstracts.size())];
        PromptSpec spec = sample_prompt(a, options.variant, rng);
        if (options.z_mode != ForgeOptions::ZMode::kUniform) {
            const std::size_t n = a.sentences.size();
            spec.z = options.z_mode == ForgeOptions::ZMode::kAll ? n : 1;
            spec.sentence_indices = rng.sample_without_replacement(n, spec.z);
            std::string content;
            for (std::size_t idx : spec.sentence_indices) {
                if (!content.empty()) content += ' ';
                content += a.sentences[idx].text;
            }
            spec.rendered = render_prompt(options.variant, content);
        }
        jobs.push_back({i, std::move(spec)});
    }

    std::vector<Outcome> outcomes = run_generation(jobs, client, options);
    const std::size_t failed = check_failures(jobs, outcomes, options);
    std::vector<RawScores> scores = score_all(outcomes, embedder, options.concurrency);

    std::vector<double> recalls;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (outcomes[i].pair) recalls.push_back(scores[i].recall);
    }
    NormalizationConstants constants = NormalizationConstants::fallback();
    try {
        constants = fit_normalization(recalls, "batch:seed=" + std::to_string(options.seed) +
                                                   ":n=" + std::to_string(recalls.size()));
    } catch (const DegenerateRange&) {
        spdlog::warn("batch recall range is degenerate; using fallback normalization constants");
    }

    Dataset d;
    d.meta = base_meta(client, embedder, tokenizer, options);
    d.meta.kind = "continuous";
    d.meta.normalization = constants;
    d.meta.failed = failed;
    const std::string preproc = preproc_signature(d.meta.preproc);

    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (!outcomes[i].pair) continue;
        LabeledPair p;
        p.pair_id = jobs[i].pair_id;
        p.prompt = outcomes[i].pair->prompt;
        p.generated = outcomes[i].pair->generated;
        p.raw = scores[i];
        p.y_reg = normalize_value(scores[i].recall, constants);
        p.y_cls = common_token_labels(p.prompt, p.generated, tokenizer);
        p.generator_model = client.model();
        p.prompt_spec = jobs[i].spec;
        p.preproc = preproc;
        p.normalization = constants.provenance;
        d.records.push_back(std::move(p));
    }
    d.meta.count = d.records.size();
    return d;
}

Dataset build_polarized_dataset(const std::vector<Abstract>& abstracts, const LLMClient& client,
                                const ContextualEmbedder& embedder,
                                const DetectorTokenizer& tokenizer, const ForgeOptions& options) {
    if (abstracts.empty()) throw EmptyDocument("no source abstracts");
    if (options.count == 0) throw ConfigError("count must be at least 1");

    Rng rng(options.seed);
    std::vector<Job> jobs;
    std::vector<std::size_t> human_sources;
    for (std::size_t i = 0; i < options.count; ++i) {
        const Abstract& a = abstracts[rng.uniform_index(abstracts.size())];
        std::string title = a.title.empty() ? a.sentences.front().text : a.title;
        PromptSpec spec;
        spec.source_doc_id = a.id;
        spec.variant = options.variant;
        spec.rendered = render_prompt(options.variant, title);
        jobs.push_back({2 * i, std::move(spec)});
        human_sources.push_back(rng.uniform_index(abstracts.size()));
    }

    std::vector<Outcome> outcomes = run_generation(jobs, client, options);
    const std::size_t failed = check_failures(jobs, outcomes, options);
    std::vector<RawScores> scores = score_all(outcomes, embedder, options.concurrency);

    Dataset d;
    d.meta = base_meta(client, embedder, tokenizer, options);
    d.meta.kind = "polarized";
    d.meta.normalization = {0.0, 1.0, "definition:polar"};
    d.meta.failed = failed;
    const std::string preproc = preproc_signature(d.meta.preproc);

    for (std::size_t i = 0; i < options.count; ++i) {
        if (outcomes[i].pair) {
            LabeledPair g;
            g.pair_id = jobs[i].pair_id;
            g.prompt = outcomes[i].pair->prompt;
            g.generated = outcomes[i].pair->generated;
            g.raw = scores[i];
            g.y_reg = 0.0;
            g.y_cls = common_token_labels(g.prompt, g.generated, tokenizer);
            g.generator_model = client.model();
            g.polar_class = 0;
            g.preproc = preproc;
            g.normalization = d.meta.normalization.provenance;
            d.records.push_back(std::move(g));
        }
        const Abstract& a = abstracts[human_sources[i]];
        LabeledPair h;
        h.pair_id = 2 * i + 1;
        h.prompt = a.text;
        h.generated = a.text;
        h.y_reg = 1.0;
        h.y_cls = common_token_labels(a.text, a.text, tokenizer);
        h.generator_model = "human";
        h.polar_class = 1;
        h.preproc = preproc;
        h.normalization = d.meta.normalization.provenance;
        d.records.push_back(std::move(h));
    }
    d.meta.count = d.records.size();
    return d;
}

Dataset polarize_dataset(const Dataset& dataset, double bst) {
    const BSTConfig config(bst);
    Dataset out = dataset;
    std::size_t ones = 0;
    for (auto& r : out.records) {
        r.polar_class = verdict_class(binarize(r.y_reg, config));
        ones += static_cast<std::size_t>(*r.polar_class);
    }
    if (ones == 0 || ones == out.records.size()) {
        throw PartitionDegenerate("threshold " + std::to_string(bst) +
                                  " puts every record in one class");
    }
    out.meta.kind = "binarized";
    out.meta.bst = bst;
    return out;
}

}  // namespace involve
