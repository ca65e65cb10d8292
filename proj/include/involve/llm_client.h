#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "involve/dataset.h"
#include "involve/errors.h"

namespace involve {

// Raised by clients for failures worth retrying (rate limits, timeouts,
// 5xx responses). Any other exception from generate() is permanent.
class TransientLLMError : public Error {
public:
    using Error::Error;
};

class LLMClient {
public:
    virtual ~LLMClient() = default;
    virtual std::string model() const = 0;
    // Request parameters recorded verbatim in dataset metadata.
    virtual nlohmann::json params() const = 0;
    virtual bool concurrent_safe() const = 0;
    virtual std::string generate(std::string_view prompt) const = 0;
};

struct MockOptions {
    std::uint64_t seed = 0;
    // Probability that a word of the human content is dropped.
    double drop_rate = 0.1;
    // Fraction of prompts (chosen by prompt hash) that fail permanently.
    double failure_rate = 0.0;
    bool empty_output = false;
};

// Deterministic offline generator. It recovers the human content from the
// rendered prompt, keeps it mostly verbatim, and pads it with generic
// academic filler sentences. Output depends only on (seed, prompt).
class MockLLMClient final : public LLMClient {
public:
    explicit MockLLMClient(MockOptions options);

    std::string model() const override { return "mock-llm/1"; }
    nlohmann::json params() const override;
    bool concurrent_safe() const override { return true; }
    std::string generate(std::string_view prompt) const override;

private:
    MockOptions options_;
};

struct RemoteClientConfig {
    std::string endpoint = "https://api.openai.com";
    std::string model = "gpt-3.5-turbo";
    std::string api_key_env = "OPENAI_API_KEY";
    double temperature = 1.0;
    int max_tokens = 400;
    int timeout_seconds = 60;
};

// Client for OpenAI-compatible chat-completion endpoints. The API key is read
// from the environment variable named in the config when constructed.
class OpenAICompatibleClient final : public LLMClient {
public:
    explicit OpenAICompatibleClient(RemoteClientConfig config);

    std::string model() const override { return config_.model; }
    nlohmann::json params() const override;
    bool concurrent_safe() const override { return true; }
    std::string generate(std::string_view prompt) const override;

private:
    RemoteClientConfig config_;
    std::string api_key_;
};

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{500};
    double backoff_multiplier = 2.0;
    std::function<void(std::chrono::milliseconds)> sleep;  // defaults to this_thread::sleep_for
};

struct GeneratedPair {
    std::string prompt;
    std::string generated;
};

// Sends the rendered prompt, retrying transient failures with exponential
// backoff. Throws GenerationFailed (carrying the last cause) once attempts are
// exhausted or on a permanent failure, EmptyGeneration on blank output.
GeneratedPair generate_pair(const PromptSpec& spec, const LLMClient& client,
                            const RetryPolicy& policy = {});

}  // namespace involve
