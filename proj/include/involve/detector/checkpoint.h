#pragma once

// Checkpoint directory layout:
//   weights.bin          magic, parameter count, raw little-endian doubles
//   config.json          detector config, encoder shape, selection summary
//   training_curve.csv   one row per epoch

#include <filesystem>

#include "involve/detector/detector.h"
#include "involve/detector/trainer.h"

namespace involve::detector {

void save_checkpoint(const std::filesystem::path& dir, const Detector& detector,
                     const TrainingState& state);
void save_checkpoint(const std::filesystem::path& dir, const Detector& detector);

// Throws ModelLoadError for a missing, truncated or inconsistent checkpoint.
Detector load_checkpoint(const std::filesystem::path& dir);

void write_training_curve(const std::filesystem::path& path, const std::vector<EpochStats>& curve);

}  // namespace involve::detector
