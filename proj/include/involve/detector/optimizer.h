#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "involve/detector/model.h"

namespace involve::detector {

struct AdamWOptions {
    double learning_rate = 1e-6;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.001;
};

// Adam with decoupled weight decay. Parameters marked frozen are never
// touched, neither by the gradient step nor by the decay.
class AdamW {
public:
    AdamW(std::size_t num_params, AdamWOptions options);

    void freeze(ParamRange range);
    bool frozen(std::size_t index) const { return frozen_[index] != 0; }
    void step(std::span<double> params, std::span<const double> grad);
    std::size_t steps() const { return t_; }

private:
    AdamWOptions opt_;
    std::vector<double> m_;
    std::vector<double> v_;
    std::vector<std::uint8_t> frozen_;
    std::size_t t_ = 0;
};

}  // namespace involve::detector
