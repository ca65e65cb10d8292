#include "involve/llm_client.h"

#include <array>
#include <cstdlib>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "involve/rng.h"
#include "involve/textprep.h"

namespace involve {

namespace {

constexpr std::array<std::string_view, 24> kFiller = {
    "Recent years have witnessed growing interest in this line of inquiry.",
    "Despite considerable progress, several open challenges remain.",
    "In this paper, we present a systematic investigation of the problem.",
    "We further discuss practical implications for future deployments.",
    "Extensive experiments confirm the effectiveness of our design.",
    "Our findings offer new insight for researchers and practitioners alike.",
    "The remainder of this work outlines limitations and promising directions.",
    "Comprehensive evaluations demonstrate consistent gains over strong baselines.",
    "Moreover, ablation studies highlight the contribution of each component.",
    "This contribution opens avenues for subsequent exploration.",
    "We believe these observations will stimulate further discussion.",
    "Both qualitative and quantitative analyses support our conclusions.",
    "Code and resources will be released publicly upon acceptance.",
    "Such considerations motivate a closer examination of prevailing assumptions.",
    "Overall, the proposed framework achieves a favorable trade-off.",
    "Nevertheless, careful validation remains essential before widespread adoption.",
    "Preliminary results appear encouraging across diverse settings.",
    "These advances carry significant consequences for the broader community.",
    "To this end, we formulate a principled solution grounded in prior theory.",
    "Empirical evidence suggests robust behavior under varied conditions.",
    "Furthermore, the approach scales gracefully with increasing workloads.",
    "We conclude by summarizing key lessons learned.",
    "Ultimately, this study bridges an important gap in existing literature.",
    "Additional case studies illustrate practical benefits.",
};

std::string keep_words(std::string_view sentence, double drop_rate, Rng& rng) {
    std::istringstream in{std::string(sentence)};
    std::string word;
    std::string out;
    bool first = true;
    while (in >> word) {
        // The first word is always kept so the sentence still starts cleanly.
        if (!first && rng.uniform01() < drop_rate) continue;
        if (!out.empty()) out += ' ';
        out += word;
        first = false;
    }
    if (!out.empty() && out.back() != '.' && out.back() != '!' && out.back() != '?') out += '.';
    return out;
}

}  // namespace

MockLLMClient::MockLLMClient(MockOptions options) : options_(options) {}

nlohmann::json MockLLMClient::params() const {
    return {{"seed", options_.seed},
            {"drop_rate", options_.drop_rate},
            {"failure_rate", options_.failure_rate}};
}

std::string MockLLMClient::generate(std::string_view prompt) const {
    if (options_.empty_output) return "";
    const std::uint64_t prompt_hash = fnv1a64(prompt);
    Rng rng(derive_seed(options_.seed, prompt_hash));
    if (options_.failure_rate > 0.0 && rng.uniform01() < options_.failure_rate) {
        throw Error("mock client refused prompt");
    }

    std::string content(prompt);
    if (auto extracted = extract_prompt_content(prompt)) content = extracted->content;

    std::vector<std::string> body;
    try {
        for (const auto& s : split_sentences(content)) {
            std::string kept = keep_words(s.text, options_.drop_rate, rng);
            if (!kept.empty()) body.push_back(std::move(kept));
        }
    } catch (const EmptyDocument&) {
        // No human content: output is pure filler.
    }

    const std::size_t target = std::max<std::size_t>(body.size() + 1, 5 + rng.uniform_index(3));
    const std::size_t filler_count = target - body.size();
    std::vector<std::size_t> filler =
        rng.sample_without_replacement(kFiller.size(), std::min(filler_count, kFiller.size()));
    rng.shuffle(filler);

    std::string out(kFiller[filler[0]]);
    for (const auto& s : body) out += " " + s;
    for (std::size_t i = 1; i < filler.size(); ++i) out += " " + std::string(kFiller[filler[i]]);
    return out;
}

OpenAICompatibleClient::OpenAICompatibleClient(RemoteClientConfig config)
    : config_(std::move(config)) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
        throw ConfigError("environment variable " + config_.api_key_env + " is not set");
    }
    api_key_ = key;
}

nlohmann::json OpenAICompatibleClient::params() const {
    return {{"endpoint", config_.endpoint},
            {"temperature", config_.temperature},
            {"max_tokens", config_.max_tokens}};
}

std::string OpenAICompatibleClient::generate(std::string_view prompt) const {
    httplib::Client client(config_.endpoint);
    client.set_connection_timeout(config_.timeout_seconds, 0);
    client.set_read_timeout(config_.timeout_seconds, 0);
    client.set_bearer_token_auth(api_key_);

    nlohmann::json body = {
        {"model", config_.model},
        {"temperature", config_.temperature},
        {"max_tokens", config_.max_tokens},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", std::string(prompt)}}})}};
    auto res = client.Post("/v1/chat/completions", body.dump(), "application/json");
    if (!res) {
        throw TransientLLMError("request failed: " + httplib::to_string(res.error()));
    }
    if (res->status == 429 || res->status >= 500) {
        throw TransientLLMError("HTTP " + std::to_string(res->status));
    }
    if (res->status != 200) {
        throw Error("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    }
    try {
        auto j = nlohmann::json::parse(res->body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed completion response: ") + e.what());
    }
}

GeneratedPair generate_pair(const PromptSpec& spec, const LLMClient& client,
                            const RetryPolicy& policy) {
    auto sleep = policy.sleep ? policy.sleep
                              : [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    auto backoff = policy.initial_backoff;
    std::string last_cause = "no attempts made";
    for (int attempt = 1; attempt <= policy.max_attempts; ++attempt) {
        std::string text;
        try {
            text = client.generate(spec.rendered);
        } catch (const TransientLLMError& e) {
            last_cause = e.what();
            spdlog::debug("generation attempt {} failed: {}", attempt, last_cause);
            if (attempt < policy.max_attempts) {
                sleep(backoff);
                backoff = std::chrono::milliseconds(static_cast<long long>(
                    static_cast<double>(backoff.count()) * policy.backoff_multiplier));
            }
            continue;
        } catch (const std::exception& e) {
            throw GenerationFailed(std::string("permanent failure: ") + e.what());
        }
        bool blank = std::all_of(text.begin(), text.end(),
                                 [](unsigned char c) { return std::isspace(c) != 0; });
        if (blank) throw EmptyGeneration("model " + client.model() + " returned empty text");
        return {spec.rendered, std::move(text)};
    }
    throw GenerationFailed("retries exhausted after " + std::to_string(policy.max_attempts) +
                           " attempts; last cause: " + last_cause);
}

}  // namespace involve
