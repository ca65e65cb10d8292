#pragma once

#include <string_view>

#include "involve/errors.h"

namespace involve {

enum class Verdict { kAIGeneration = 0, kHumanContribution = 1 };

// Binarization static threshold: a cutoff in (0, 1) that maps a continuous
// involvement value onto a verdict.
class BSTConfig {
public:
    explicit BSTConfig(double threshold) : threshold_(threshold) {
        if (!(threshold > 0.0 && threshold < 1.0)) {
            throw ConfigError("BST threshold must lie strictly between 0 and 1");
        }
    }
    double threshold() const { return threshold_; }

private:
    double threshold_;
};

// Human contribution iff y > threshold; equality maps to AI generation.
inline Verdict binarize(double y, const BSTConfig& bst) {
    return y > bst.threshold() ? Verdict::kHumanContribution : Verdict::kAIGeneration;
}

inline int verdict_class(Verdict v) { return static_cast<int>(v); }

inline std::string_view verdict_name(Verdict v) {
    return v == Verdict::kHumanContribution ? "Human contribution" : "AI generation";
}

}  // namespace involve
