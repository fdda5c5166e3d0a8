#include "m3t/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "m3t/errors.hpp"

namespace m3t {

Tensor finite_difference_gradient(const std::function<Real(const Tensor&)>& f, const Tensor& x, Real h) {
    if (!(h > 0.0)) throw UsageError("finite difference step must be positive");
    auto base = x.to_vector();
    std::vector<Real> grad(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
        auto plus = base;
        auto minus = base;
        plus[i] += h;
        minus[i] -= h;
        Real fp = f(Tensor::from(x.shape(), std::move(plus)));
        Real fm = f(Tensor::from(x.shape(), std::move(minus)));
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return Tensor::from(x.shape(), std::move(grad));
}

bool grad_close(Real a, Real b, Real rel, Real abs_floor) {
    return std::abs(a - b) <= std::max(rel * std::max(std::abs(a), std::abs(b)), abs_floor);
}

Real grad_mismatch(std::span<const Real> a, std::span<const Real> b, Real rel, Real abs_floor) {
    if (a.size() != b.size()) throw DimensionError("grad_mismatch: length mismatch");
    Real worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        Real tol = std::max(rel * std::max(std::abs(a[i]), std::abs(b[i])), abs_floor);
        worst = std::max(worst, std::abs(a[i] - b[i]) / tol);
    }
    return worst;
}

}  // namespace m3t
