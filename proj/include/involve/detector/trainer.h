#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "involve/dataset.h"
#include "involve/detector/config.h"
#include "involve/detector/detector.h"
#include "involve/detector/model.h"

namespace involve::detector {

struct EpochStats {
    std::size_t epoch = 0;
    LossParts train;               // running mean over the epoch's updates
    std::optional<LossParts> val;  // mean over the validation split
    // Weights after this epoch; only valid during the on_epoch callback.
    const DualHeadModel* model = nullptr;
};

struct TrainingState {
    std::size_t epoch = 0;
    LossParts running;
    std::filesystem::path checkpoint;  // empty when nothing was written
    // Selection metric of the kept weights: validation MSE (CE for the token
    // and binary modes); training values when there is no validation split.
    double best_metric = 0.0;
    std::size_t best_epoch = 0;
    std::size_t train_size = 0;
    std::size_t val_size = 0;
    std::vector<EpochStats> curve;
};

struct TrainingResult {
    Detector detector;  // weights of the best epoch
    TrainingState state;
};

struct TrainOptions {
    // When set, the best weights are written here as a checkpoint.
    std::optional<std::filesystem::path> checkpoint_dir;
    // Called after every epoch; return false to stop early.
    std::function<bool(const EpochStats&)> on_epoch;
};

// Tokenizes generated texts and attaches labels. Labels must have been
// produced with the same tokenizer (FormatError otherwise). In binary mode the
// class is config.bst applied to y_reg when set, else the record's
// polar_class.
std::vector<TrainingExample> make_examples(const Dataset& dataset, const DetectorConfig& config,
                                           const DetectorTokenizer& tokenizer);

// Minimizes the loss selected by config.mode with AdamW. Throws
// InsufficientData on an empty dataset, PartitionDegenerate when binary
// training sees a single class, NumericalError when the loss diverges.
TrainingResult train(const Dataset& dataset, const DetectorConfig& config,
                     const TrainOptions& options = {});

enum class SingleHead { kRegression, kToken };
TrainingResult train_single_head(const Dataset& dataset, DetectorConfig config, SingleHead head,
                                 const TrainOptions& options = {});
TrainingResult train_binary_classifier(const Dataset& dataset, DetectorConfig config,
                                       const TrainOptions& options = {});

// Mean loss parts of a model over examples, reduced in index order.
LossParts mean_loss(const DualHeadModel& model, const std::vector<TrainingExample>& examples,
                    const LossOptions& options);

}  // namespace involve::detector
