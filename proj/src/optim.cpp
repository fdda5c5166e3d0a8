#include "m3t/optim.hpp"

#include <cmath>
#include <numbers>

#include "m3t/errors.hpp"

namespace m3t {

void adam_step(std::vector<Tensor>& params, AdamState& state) {
    for (const auto& p : params)
        if (!p.has_grad()) throw UsageError("adam_step: parameter of shape " + shape_str(p.shape()) + " has no gradient");
    if (state.first_moment.empty()) {
        for (const auto& p : params) {
            state.first_moment.emplace_back(p.numel(), 0.0);
            state.second_moment.emplace_back(p.numel(), 0.0);
        }
    }
    if (state.first_moment.size() != params.size()) throw UsageError("adam_step: parameter list changed between steps");

    ++state.step_count;
    const auto t = static_cast<Real>(state.step_count);
    const Real c1 = 1.0 - std::pow(state.beta1, t);
    const Real c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& m = state.first_moment[k];
        auto& v = state.second_moment[k];
        if (m.size() != params[k].numel()) throw UsageError("adam_step: moment buffer does not match parameter shape");
        auto w = params[k].mutable_data();
        auto g = params[k].grad();
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            const Real mhat = m[i] / c1;
            const Real vhat = v[i] / c2;
            w[i] -= state.lr * mhat / (std::sqrt(vhat) + state.epsilon);
        }
    }
}

Adam::Adam(std::vector<Tensor> params, Real lr, Real beta1, Real beta2, Real epsilon) : params_(std::move(params)) {
    if (!(lr > 0.0)) throw UsageError("Adam learning rate must be positive");
    state_.lr = lr;
    state_.beta1 = beta1;
    state_.beta2 = beta2;
    state_.epsilon = epsilon;
}

void Adam::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

Real cosine_lr(const CosineSchedule& s, std::size_t epoch) {
    if (s.total_epochs == 0 || s.warmup_epochs == 0) throw UsageError("cosine_lr: epoch counts must be positive");
    if (!(s.min_lr > 0.0) || s.min_lr > s.base_lr) throw UsageError("cosine_lr: need 0 < min_lr <= base_lr");
    if (epoch >= s.total_epochs)
        throw UsageError("cosine_lr: epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(s.total_epochs) + ")");
    const std::size_t last = s.total_epochs - 1;
    if (epoch == last) return s.min_lr;
    if (epoch < s.warmup_epochs) {
        const Real frac = static_cast<Real>(epoch) / static_cast<Real>(s.warmup_epochs);
        return s.min_lr + (s.base_lr - s.min_lr) * frac;
    }
    const Real progress = static_cast<Real>(epoch - s.warmup_epochs) / static_cast<Real>(last - s.warmup_epochs);
    return s.min_lr + 0.5 * (s.base_lr - s.min_lr) * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace m3t
