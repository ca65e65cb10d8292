#include "involve/detector/trainer.h"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>

#include <spdlog/spdlog.h>

#include "involve/bst.h"
#include "involve/detector/checkpoint.h"
#include "involve/detector/optimizer.h"
#include "involve/errors.h"
#include "involve/rng.h"

namespace involve::detector {

namespace {

// Gradients are summed over fixed groups of examples, then the group sums are
// added in order, so the result does not depend on the thread count.
constexpr std::size_t kChunk = 4;

LossOptions loss_options(const DetectorConfig& c) {
    LossOptions o;
    o.mode = c.mode;
    o.class_weights = c.class_weights;
    o.include_padding = c.ce_include_padding;
    return o;
}

void add_into(LossParts& a, const LossParts& b) {
    a.total += b.total;
    a.mse += b.mse;
    a.ce += b.ce;
}

LossParts scaled(LossParts p, double s) {
    p.total *= s;
    p.mse *= s;
    p.ce *= s;
    return p;
}

double selection_metric(TrainMode mode, const LossParts& p) {
    return mode == TrainMode::kDual || mode == TrainMode::kRegressionOnly ? p.mse : p.ce;
}

void rethrow_first(const std::vector<std::exception_ptr>& errors) {
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace

std::vector<TrainingExample> make_examples(const Dataset& dataset, const DetectorConfig& config,
                                           const DetectorTokenizer& tokenizer) {
    std::optional<BSTConfig> bst;
    if (config.bst) bst.emplace(*config.bst);
    const bool binary = config.mode == TrainMode::kBinary;
    std::vector<TrainingExample> out;
    out.reserve(dataset.records.size());
    for (const auto& r : dataset.records) {
        const Encoding enc = tokenizer.encode(r.generated);
        TrainingExample ex;
        ex.ids = enc.ids;
        ex.attention_len = enc.attention_len;
        ex.y_reg = r.y_reg;
        if (r.y_cls.labels.size() != tokenizer.max_len() ||
            r.y_cls.attention_len != enc.attention_len) {
            throw FormatError("token labels of pair " + std::to_string(r.pair_id) +
                              " do not match tokenizer " + tokenizer.id());
        }
        ex.labels = r.y_cls.labels;
        if (binary) {
            if (bst) {
                ex.polar_class = verdict_class(binarize(r.y_reg, *bst));
            } else if (r.polar_class) {
                ex.polar_class = *r.polar_class;
            } else {
                throw FormatError("pair " + std::to_string(r.pair_id) +
                                  " has no polar class and no bst is configured");
            }
        }
        out.push_back(std::move(ex));
    }
    if (binary) {
        const auto ones = std::count_if(out.begin(), out.end(),
                                        [](const TrainingExample& e) { return e.polar_class == 1; });
        if (ones == 0 || static_cast<std::size_t>(ones) == out.size()) {
            throw PartitionDegenerate("binary training needs both classes");
        }
    }
    return out;
}

LossParts mean_loss(const DualHeadModel& model, const std::vector<TrainingExample>& examples,
                    const LossOptions& options) {
    if (examples.empty()) throw InsufficientData("no examples to evaluate");
    std::vector<LossParts> parts(examples.size());
    std::vector<std::exception_ptr> errors(examples.size());
    const auto n = static_cast<long>(examples.size());
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        try {
            parts[k] = model.loss(examples[k], options);
        } catch (...) {
            errors[k] = std::current_exception();
        }
    }
    rethrow_first(errors);
    LossParts sum;
    for (const auto& p : parts) add_into(sum, p);
    return scaled(sum, 1.0 / static_cast<double>(examples.size()));
}

TrainingResult train(const Dataset& dataset, const DetectorConfig& config,
                     const TrainOptions& options) {
    config.validate();
    require_encoder(config.encoder);
    if (dataset.records.empty()) throw InsufficientData("training dataset is empty");
    const auto tokenizer = make_tokenizer(config.tokenizer, config.max_len);
    const std::vector<TrainingExample> examples = make_examples(dataset, config, *tokenizer);
    const LossOptions lo = loss_options(config);

    // Fixed-seed split.
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng split_rng(derive_seed(config.seed, fnv1a64("split")));
    split_rng.shuffle(order);
    auto n_val = static_cast<std::size_t>(
        std::floor(config.validation_fraction * static_cast<double>(examples.size()) + 0.5));
    n_val = std::min(n_val, examples.size() - 1);
    std::vector<TrainingExample> val;
    std::vector<std::size_t> train_idx;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (i < n_val) {
            val.push_back(examples[order[i]]);
        } else {
            train_idx.push_back(order[i]);
        }
    }
    std::vector<TrainingExample> train_set;
    for (std::size_t i : train_idx) train_set.push_back(examples[i]);

    const EncoderShape shape = shape_for(config, tokenizer->vocab_size());
    DualHeadModel model(shape, config.seed, config.init_std);
    AdamWOptions ao;
    ao.learning_rate = config.learning_rate;
    ao.weight_decay = config.weight_decay;
    AdamW opt(model.num_params(), ao);
    switch (config.mode) {
        case TrainMode::kDual:
            opt.freeze(model.sequence_head());
            break;
        case TrainMode::kRegressionOnly:
            opt.freeze(model.token_head());
            opt.freeze(model.sequence_head());
            break;
        case TrainMode::kTokenOnly:
            opt.freeze(model.regression_head());
            opt.freeze(model.sequence_head());
            break;
        case TrainMode::kBinary:
            opt.freeze(model.regression_head());
            opt.freeze(model.token_head());
            break;
    }

    TrainingState state;
    state.train_size = train_set.size();
    state.val_size = val.size();
    state.best_metric = INFINITY;
    std::vector<double> best_params(model.params().begin(), model.params().end());

    Rng shuffle_rng(derive_seed(config.seed, fnv1a64("shuffle")));
    const std::size_t bs = std::min(config.batch_size, train_set.size());
    const std::size_t max_chunks = (bs + kChunk - 1) / kChunk;
    std::vector<std::vector<double>> chunk_grads(max_chunks,
                                                 std::vector<double>(model.num_params()));
    std::vector<double> grad(model.num_params());
    std::vector<std::size_t> idx(train_set.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        shuffle_rng.shuffle(idx);
        LossParts epoch_sum;
        for (std::size_t start = 0; start < idx.size(); start += bs) {
            const std::size_t end = std::min(start + bs, idx.size());
            const std::size_t nchunks = (end - start + kChunk - 1) / kChunk;
            std::vector<LossParts> chunk_loss(nchunks);
            std::vector<std::exception_ptr> errors(nchunks);
#pragma omp parallel for schedule(dynamic)
            for (long ci = 0; ci < static_cast<long>(nchunks); ++ci) {
                const auto c = static_cast<std::size_t>(ci);
                auto& buf = chunk_grads[c];
                std::fill(buf.begin(), buf.end(), 0.0);
                try {
                    const std::size_t a = start + c * kChunk;
                    for (std::size_t k = a; k < std::min(a + kChunk, end); ++k) {
                        add_into(chunk_loss[c], model.loss_and_gradient(train_set[idx[k]], lo, buf));
                    }
                } catch (...) {
                    errors[c] = std::current_exception();
                }
            }
            try {
                rethrow_first(errors);
            } catch (const NumericalError& e) {
                throw NumericalError("training diverged at epoch " + std::to_string(epoch) +
                                     ": " + e.what());
            }
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t c = 0; c < nchunks; ++c) {
                const auto& buf = chunk_grads[c];
                for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += buf[i];
                add_into(epoch_sum, chunk_loss[c]);
            }
            const double inv = 1.0 / static_cast<double>(end - start);
            for (double& g : grad) g *= inv;
            opt.step(model.mutable_params(), grad);
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train = scaled(epoch_sum, 1.0 / static_cast<double>(train_set.size()));
        double metric = 0.0;
        try {
            if (!val.empty()) {
                stats.val = mean_loss(model, val, lo);
                metric = selection_metric(config.mode, *stats.val);
            } else {
                metric = selection_metric(config.mode, mean_loss(model, train_set, lo));
            }
        } catch (const NumericalError& e) {
            throw NumericalError("training diverged at epoch " + std::to_string(epoch) + ": " +
                                 e.what());
        }
        if (!std::isfinite(stats.train.total) || !std::isfinite(metric)) {
            throw NumericalError("training diverged at epoch " + std::to_string(epoch) +
                                 ": non-finite loss");
        }
        state.epoch = epoch;
        state.running = stats.train;
        state.curve.push_back(stats);
        stats.model = &model;
        if (metric < state.best_metric) {
            state.best_metric = metric;
            state.best_epoch = epoch;
            std::copy(model.params().begin(), model.params().end(), best_params.begin());
        }
        spdlog::debug("epoch {} loss {:.6f} mse {:.6f} ce {:.6f} select {:.6f}", epoch,
                      stats.train.total, stats.train.mse, stats.train.ce, metric);
        if (options.on_epoch && !options.on_epoch(stats)) break;
    }

    TrainingResult result{Detector(config, DualHeadModel(shape, std::move(best_params))), state};
    if (options.checkpoint_dir) {
        save_checkpoint(*options.checkpoint_dir, result.detector, result.state);
        result.state.checkpoint = *options.checkpoint_dir;
    }
    spdlog::info("trained {} mode for {} epochs; best epoch {} ({:.6g})", mode_name(config.mode),
                 result.state.epoch, result.state.best_epoch, result.state.best_metric);
    return result;
}

TrainingResult train_single_head(const Dataset& dataset, DetectorConfig config, SingleHead head,
                                 const TrainOptions& options) {
    config.mode = head == SingleHead::kRegression ? TrainMode::kRegressionOnly : TrainMode::kTokenOnly;
    return train(dataset, config, options);
}

TrainingResult train_binary_classifier(const Dataset& dataset, DetectorConfig config,
                                       const TrainOptions& options) {
    config.mode = TrainMode::kBinary;
    return train(dataset, config, options);
}

}  // namespace involve::detector
