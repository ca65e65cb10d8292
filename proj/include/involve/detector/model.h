#pragma once

// Dual-head detector: a post-LN transformer encoder shared by a regression
// head on the first position, a per-position two-class token head, and a
// sequence-level two-class head used only when training a binary classifier.
//
// All parameters live in one flat vector so the optimizer, checkpointing and
// finite-difference checks can treat the model as a single array. Gradients
// are derived by hand; see loss_and_gradient().

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "involve/detector/config.h"
#include "involve/token_labeling.h"

namespace involve::detector {

struct EncoderShape {
    std::size_t vocab_size = 0;
    std::size_t max_len = 368;
    std::size_t hidden = 64;
    std::size_t layers = 2;
    std::size_t heads = 4;
    std::size_t ffn = 128;

    bool operator==(const EncoderShape&) const = default;
};

struct DualHeadOutput {
    double y_reg_hat = 0.0;
    std::vector<double> token_logits;  // rows x 2, row-major
    std::array<double, 2> sequence_logits{0.0, 0.0};
    std::size_t attention_len = 0;

    std::size_t rows() const { return token_logits.size() / 2; }
    // Regression estimate clamped to [0, 1] for reporting.
    double involvement() const;
    // Softmax probability of the human class from the sequence head.
    double human_probability() const;
    // Argmax token labels over the real positions.
    std::vector<std::uint8_t> token_predictions() const;
};

struct LossParts {
    double total = 0.0;
    double mse = 0.0;
    double ce = 0.0;
};

// total = mse + ce with mse = (y_reg_hat - y_reg)^2 and ce the class-weighted
// token cross-entropy summed over real positions (all positions when
// include_padding). Throws NumericalError on non-finite inputs and
// ShapeError when the label vector does not match the logits.
LossParts combined_loss(const DualHeadOutput& output, double y_reg, const TokenLabelVector& y_cls,
                        const std::array<double, 2>& class_weights,
                        bool include_padding = false);

struct TrainingExample {
    std::vector<std::int32_t> ids;  // max_len entries
    std::size_t attention_len = 0;
    double y_reg = 0.0;
    std::vector<std::uint8_t> labels;  // max_len entries
    int polar_class = 0;
};

struct LossOptions {
    TrainMode mode = TrainMode::kDual;
    std::array<double, 2> class_weights{1.0, 1.2};
    bool include_padding = false;
};

struct ParamRange {
    std::size_t offset = 0;
    std::size_t size = 0;
};

class DualHeadModel {
public:
    // Random initialization: N(0, init_std) weights, zero biases, unit
    // layer-norm gains.
    DualHeadModel(EncoderShape shape, std::uint64_t seed, double init_std);
    // Restores a model from a flat parameter vector. Throws ModelLoadError on
    // a size mismatch.
    DualHeadModel(EncoderShape shape, std::vector<double> params);

    const EncoderShape& shape() const { return shape_; }
    std::size_t num_params() const { return params_.size(); }
    std::span<const double> params() const { return params_; }
    std::span<double> mutable_params() { return params_; }

    // Computes the first `rows` positions (attention_len <= rows <= max_len);
    // positions at or beyond attention_len are excluded from attention keys.
    DualHeadOutput forward(std::span<const std::int32_t> ids, std::size_t attention_len,
                           std::size_t rows) const;
    DualHeadOutput forward(std::span<const std::int32_t> ids, std::size_t attention_len) const {
        return forward(ids, attention_len, shape_.max_len);
    }

    LossParts loss(const TrainingExample& example, const LossOptions& options) const;
    // Adds d(loss)/d(params) into grad (num_params() entries).
    LossParts loss_and_gradient(const TrainingExample& example, const LossOptions& options,
                                std::span<double> grad) const;

    ParamRange regression_head() const;
    ParamRange token_head() const;
    ParamRange sequence_head() const;

private:
    struct LayerOffsets {
        std::size_t wq, bq, wk, bk, wv, bv, wo, bo, ln1_g, ln1_b, w1, b1, w2, b2, ln2_g, ln2_b;
    };
    struct Layout {
        std::size_t tok_emb, pos_emb, emb_ln_g, emb_ln_b;
        std::vector<LayerOffsets> layers;
        std::size_t reg_w, reg_b, tok_w, tok_b, seq_w, seq_b;
        std::size_t total;
    };
    struct Cache;

    static Layout make_layout(const EncoderShape& shape);
    void check_inputs(std::span<const std::int32_t> ids, std::size_t attention_len,
                      std::size_t rows) const;
    void run_forward(std::span<const std::int32_t> ids, std::size_t attention_len,
                     std::size_t rows, Cache& cache) const;
    void run_backward(const Cache& cache, std::span<const std::int32_t> ids, double d_reg,
                      std::span<const double> d_token_logits,
                      const std::array<double, 2>& d_seq_logits, std::span<double> grad) const;
    LossParts evaluate_loss(const Cache& cache, const TrainingExample& example,
                            const LossOptions& options, double* d_reg,
                            std::vector<double>* d_token, std::array<double, 2>* d_seq) const;
    std::size_t rows_for(const TrainingExample& example, const LossOptions& options) const;

    EncoderShape shape_;
    Layout layout_;
    std::vector<double> params_;
};

EncoderShape shape_for(const DetectorConfig& config, std::size_t vocab_size);

}  // namespace involve::detector
