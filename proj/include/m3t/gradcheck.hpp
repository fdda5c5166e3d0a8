#pragma once

#include <functional>
#include <span>

#include "m3t/tensor.hpp"

namespace m3t {

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate
// of x. `f` receives a fresh leaf tensor per evaluation and must not retain it.
Tensor finite_difference_gradient(const std::function<Real(const Tensor&)>& f, const Tensor& x, Real h = 1e-5);

// |a - b| <= max(rel * max(|a|, |b|), abs_floor)
bool grad_close(Real a, Real b, Real rel = 1e-4, Real abs_floor = 1e-6);

// Largest violation ratio |a-b| / max(rel*max(|a|,|b|), abs_floor) over the
// pair; <= 1 means every coordinate passes grad_close.
Real grad_mismatch(std::span<const Real> a, std::span<const Real> b, Real rel = 1e-4, Real abs_floor = 1e-6);

}  // namespace m3t
