#include "involve/detector/optimizer.h"

#include <cmath>

#include "involve/errors.h"

namespace involve::detector {

AdamW::AdamW(std::size_t num_params, AdamWOptions options)
    : opt_(options), m_(num_params, 0.0), v_(num_params, 0.0), frozen_(num_params, 0) {}

void AdamW::freeze(ParamRange range) {
    if (range.offset + range.size > frozen_.size()) throw ShapeError("freeze range out of bounds");
    for (std::size_t i = 0; i < range.size; ++i) frozen_[range.offset + i] = 1;
}

void AdamW::step(std::span<double> params, std::span<const double> grad) {
    if (params.size() != m_.size() || grad.size() != m_.size()) {
        throw ShapeError("optimizer state does not match the parameter count");
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    const double lr = opt_.learning_rate;
    const auto n = static_cast<long>(params.size());
#pragma omp parallel for schedule(static) if (n > (1 << 16))
    for (long li = 0; li < n; ++li) {
        const auto i = static_cast<std::size_t>(li);
        if (frozen_[i]) continue;
        const double g = grad[i];
        m_[i] = opt_.beta1 * m_[i] + (1.0 - opt_.beta1) * g;
        v_[i] = opt_.beta2 * v_[i] + (1.0 - opt_.beta2) * g * g;
        const double mhat = m_[i] / bc1;
        const double vhat = v_[i] / bc2;
        params[i] -= lr * (mhat / (std::sqrt(vhat) + opt_.eps) + opt_.weight_decay * params[i]);
    }
}

}  // namespace involve::detector
