#pragma once

// Inference wrapper: a trained model bound to its tokenizer and config.
// Immutable after construction; predict() may be called concurrently.

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "involve/detector/config.h"
#include "involve/detector/model.h"
#include "involve/token_labeling.h"
#include "involve/tokenizer.h"

namespace involve::detector {

struct Prediction {
    double y_reg_hat = 0.0;
    double involvement = 0.0;        // clamp(y_reg_hat, 0, 1)
    double human_probability = 0.0;  // sequence head; meaningful for binary classifiers
    TokenLabelVector token_labels;   // argmax over real positions
};

class Detector {
public:
    // Throws ModelLoadError when the encoder is not available and
    // ConfigError when the config and model shape disagree.
    Detector(DetectorConfig config, DualHeadModel model);

    const DetectorConfig& config() const { return config_; }
    const DualHeadModel& model() const { return model_; }
    const DetectorTokenizer& tokenizer() const { return *tokenizer_; }

    // Full max_len x 2 logits; throws EmptyInput for blank text. Longer
    // inputs are truncated by the tokenizer.
    DualHeadOutput forward(std::string_view text) const;
    Prediction predict(std::string_view text) const;
    std::vector<Prediction> predict(const std::vector<std::string>& texts) const;

private:
    DetectorConfig config_;
    DualHeadModel model_;
    std::shared_ptr<const DetectorTokenizer> tokenizer_;
};

// The only encoder that can be instantiated locally.
inline constexpr std::string_view kToyEncoder = "toy-transformer";

// Throws ModelLoadError unless the encoder identifier is available.
void require_encoder(std::string_view encoder);

Prediction to_prediction(const DualHeadOutput& out);

}  // namespace involve::detector
