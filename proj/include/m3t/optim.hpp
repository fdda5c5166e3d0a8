#pragma once

#include <cstddef>
#include <vector>

#include "m3t/tensor.hpp"

namespace m3t {

struct AdamState {
    std::vector<std::vector<Real>> first_moment;
    std::vector<std::vector<Real>> second_moment;
    std::size_t step_count = 0;
    Real lr = 1e-3;
    Real beta1 = 0.9;
    Real beta2 = 0.999;
    Real epsilon = 1e-8;
};

// Bias-corrected Adam update on `params`. Moment buffers are allocated on
// the first call. Throws UsageError if any parameter has no gradient.
void adam_step(std::vector<Tensor>& params, AdamState& state);

class Adam {
public:
    Adam(std::vector<Tensor> params, Real lr, Real beta1 = 0.9, Real beta2 = 0.999, Real epsilon = 1e-8);

    void step() { adam_step(params_, state_); }
    void zero_grad();
    void set_lr(Real lr) { state_.lr = lr; }
    Real lr() const { return state_.lr; }
    const AdamState& state() const { return state_; }
    std::vector<Tensor>& params() { return params_; }

private:
    std::vector<Tensor> params_;
    AdamState state_;
};

// Linear warm-up from min_lr to base_lr over warmup_epochs, then half-cosine
// decay reaching min_lr at total_epochs - 1.
struct CosineSchedule {
    Real base_lr = 1e-4;
    Real min_lr = 1e-6;
    std::size_t warmup_epochs = 25;
    std::size_t total_epochs = 100;
};

Real cosine_lr(const CosineSchedule& schedule, std::size_t epoch);

}  // namespace m3t
