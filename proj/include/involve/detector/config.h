#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace involve::detector {

enum class TrainMode {
    kDual,            // regression + token heads
    kRegressionOnly,  // token head detached
    kTokenOnly,       // regression head detached
    kBinary,          // sequence-level two-class head (retrained classifier)
};

std::string_view mode_name(TrainMode m);
TrainMode parse_mode(std::string_view name);

struct DetectorConfig {
    // "toy-transformer" is trained from scratch. "roberta-base" names the
    // pretrained family; its weights are not bundled and loading it fails.
    std::string encoder = "toy-transformer";
    std::string tokenizer = "hashpiece-4096/1";
    std::size_t max_len = 368;
    std::size_t hidden = 64;
    std::size_t layers = 2;
    std::size_t heads = 4;
    std::size_t ffn = 128;

    double learning_rate = 1e-6;
    std::size_t batch_size = 64;
    std::size_t epochs = 100;
    double weight_decay = 0.001;
    std::array<double, 2> class_weights{1.0, 1.2};
    std::uint64_t seed = 0;
    double validation_fraction = 0.1;
    // Sum token cross-entropy over padding positions as well.
    bool ce_include_padding = false;
    double init_std = 0.02;

    TrainMode mode = TrainMode::kDual;
    std::optional<double> bst;  // binary mode: partition threshold

    // Throws ConfigError naming the first invalid field.
    void validate() const;
};

nlohmann::json to_json(const DetectorConfig& c);
// Missing keys keep their defaults; unknown keys are rejected.
DetectorConfig config_from_json(const nlohmann::json& j, DetectorConfig base = {});
DetectorConfig load_config(const std::filesystem::path& path, DetectorConfig base = {});

}  // namespace involve::detector
