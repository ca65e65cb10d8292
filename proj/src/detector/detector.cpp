#include "involve/detector/detector.h"

#include <algorithm>
#include <cctype>

#include "involve/errors.h"

namespace involve::detector {

void require_encoder(std::string_view encoder) {
    if (encoder == kToyEncoder) return;
    if (encoder == "roberta-base" || encoder == "roberta-large") {
        throw ModelLoadError("pretrained encoder '" + std::string(encoder) +
                             "' is not bundled; use '" + std::string(kToyEncoder) + "'");
    }
    throw ModelLoadError("unknown encoder '" + std::string(encoder) + "'");
}

Detector::Detector(DetectorConfig config, DualHeadModel model)
    : config_(std::move(config)), model_(std::move(model)) {
    require_encoder(config_.encoder);
    tokenizer_ = make_tokenizer(config_.tokenizer, config_.max_len);
    if (!(model_.shape() == shape_for(config_, tokenizer_->vocab_size()))) {
        throw ConfigError("model shape does not match the detector config");
    }
}

Prediction to_prediction(const DualHeadOutput& out) {
    Prediction p;
    p.y_reg_hat = out.y_reg_hat;
    p.involvement = out.involvement();
    p.human_probability = out.human_probability();
    p.token_labels.labels = out.token_predictions();
    p.token_labels.attention_len = out.attention_len;
    return p;
}

DualHeadOutput Detector::forward(std::string_view text) const {
    if (std::all_of(text.begin(), text.end(),
                    [](unsigned char c) { return std::isspace(c) != 0; })) {
        throw EmptyInput("cannot score an empty text");
    }
    const Encoding enc = tokenizer_->encode(text);
    return model_.forward(enc.ids, enc.attention_len);
}

Prediction Detector::predict(std::string_view text) const { return to_prediction(forward(text)); }

std::vector<Prediction> Detector::predict(const std::vector<std::string>& texts) const {
    std::vector<Prediction> out(texts.size());
    const auto n = static_cast<long>(texts.size());
    // Exceptions must not escape an OpenMP region; rethrow the first one.
    std::vector<std::exception_ptr> errors(texts.size());
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        try {
            out[k] = predict(texts[k]);
        } catch (...) {
            errors[k] = std::current_exception();
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

}  // namespace involve::detector
