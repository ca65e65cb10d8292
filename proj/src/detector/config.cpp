#include "involve/detector/config.h"

#include <cmath>
#include <fstream>
#include <set>

#include "involve/errors.h"

namespace involve::detector {

std::string_view mode_name(TrainMode m) {
    switch (m) {
        case TrainMode::kDual: return "dual";
        case TrainMode::kRegressionOnly: return "regression";
        case TrainMode::kTokenOnly: return "token";
        case TrainMode::kBinary: return "binary";
    }
    return "dual";
}

TrainMode parse_mode(std::string_view name) {
    if (name == "dual") return TrainMode::kDual;
    if (name == "regression" || name == "reg") return TrainMode::kRegressionOnly;
    if (name == "token") return TrainMode::kTokenOnly;
    if (name == "binary") return TrainMode::kBinary;
    throw ConfigError("unknown training mode '" + std::string(name) +
                      "' (expected dual|regression|token|binary)");
}

void DetectorConfig::validate() const {
    auto fail = [](const std::string& what) { throw ConfigError("invalid config: " + what); };
    if (encoder.empty()) fail("encoder must be set");
    if (max_len < 3) fail("max_len must be at least 3");
    if (hidden == 0 || layers == 0 || heads == 0 || ffn == 0) {
        fail("hidden, layers, heads and ffn must be positive");
    }
    if (hidden % heads != 0) fail("hidden must be divisible by heads");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be > 0");
    if (batch_size == 0) fail("batch_size must be positive");
    if (epochs == 0) fail("epochs must be positive");
    if (!(weight_decay >= 0.0)) fail("weight_decay must be >= 0");
    if (!(class_weights[0] > 0.0) || !(class_weights[1] > 0.0)) {
        fail("class_weights must be positive");
    }
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
        fail("validation_fraction must be in [0, 1)");
    }
    if (!(init_std > 0.0)) fail("init_std must be positive");
    if (bst && !(*bst > 0.0 && *bst < 1.0)) fail("bst must lie in (0, 1)");
}

nlohmann::json to_json(const DetectorConfig& c) {
    nlohmann::json j = {{"encoder", c.encoder},
                        {"tokenizer", c.tokenizer},
                        {"max_len", c.max_len},
                        {"hidden", c.hidden},
                        {"layers", c.layers},
                        {"heads", c.heads},
                        {"ffn", c.ffn},
                        {"learning_rate", c.learning_rate},
                        {"batch_size", c.batch_size},
                        {"epochs", c.epochs},
                        {"weight_decay", c.weight_decay},
                        {"class_weights", c.class_weights},
                        {"seed", c.seed},
                        {"validation_fraction", c.validation_fraction},
                        {"ce_include_padding", c.ce_include_padding},
                        {"init_std", c.init_std},
                        {"mode", mode_name(c.mode)}};
    j["bst"] = c.bst ? nlohmann::json(*c.bst) : nlohmann::json(nullptr);
    return j;
}

DetectorConfig config_from_json(const nlohmann::json& j, DetectorConfig c) {
    static const std::set<std::string> known = {
        "encoder", "tokenizer", "max_len", "hidden", "layers", "heads", "ffn",
        "learning_rate", "batch_size", "epochs", "weight_decay", "class_weights", "seed",
        "validation_fraction", "ce_include_padding", "init_std", "mode", "bst"};
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (known.count(key) == 0) throw ConfigError("unknown config key '" + key + "'");
    }
    try {
        if (j.contains("encoder")) c.encoder = j["encoder"].get<std::string>();
        if (j.contains("tokenizer")) c.tokenizer = j["tokenizer"].get<std::string>();
        if (j.contains("max_len")) c.max_len = j["max_len"].get<std::size_t>();
        if (j.contains("hidden")) c.hidden = j["hidden"].get<std::size_t>();
        if (j.contains("layers")) c.layers = j["layers"].get<std::size_t>();
        if (j.contains("heads")) c.heads = j["heads"].get<std::size_t>();
        if (j.contains("ffn")) c.ffn = j["ffn"].get<std::size_t>();
        if (j.contains("learning_rate")) c.learning_rate = j["learning_rate"].get<double>();
        if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<std::size_t>();
        if (j.contains("epochs")) c.epochs = j["epochs"].get<std::size_t>();
        if (j.contains("weight_decay")) c.weight_decay = j["weight_decay"].get<double>();
        if (j.contains("class_weights")) {
            c.class_weights = j["class_weights"].get<std::array<double, 2>>();
        }
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("validation_fraction")) {
            c.validation_fraction = j["validation_fraction"].get<double>();
        }
        if (j.contains("ce_include_padding")) {
            c.ce_include_padding = j["ce_include_padding"].get<bool>();
        }
        if (j.contains("init_std")) c.init_std = j["init_std"].get<double>();
        if (j.contains("mode")) c.mode = parse_mode(j["mode"].get<std::string>());
        if (j.contains("bst")) {
            c.bst = j["bst"].is_null() ? std::nullopt : std::optional<double>(j["bst"].get<double>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
    return c;
}

DetectorConfig load_config(const std::filesystem::path& path, DetectorConfig base) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return config_from_json(j, std::move(base));
}

}  // namespace involve::detector
