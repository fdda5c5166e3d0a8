#pragma once

// Minimal reverse-mode differentiable tensor.
//
// A Tensor is a shared handle onto a graph node holding row-major doubles.
// Operations on tensors that require gradients record their inputs and a
// vector-Jacobian product; Tensor::backward() walks the graph in reverse
// topological order. Leaf gradients accumulate across backward() calls until
// zero_grad() is called; intermediate gradients are reset at the start of
// every backward().

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace m3t {

using Real = double;
using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {
struct Node;
}

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, Real value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<Real> data, bool requires_grad = false);
    static Tensor scalar(Real value, bool requires_grad = false);

    bool defined() const noexcept { return static_cast<bool>(node_); }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t numel() const;

    std::span<const Real> data() const;
    // Direct write access. Only valid on leaves (parameters, inputs); writing
    // into an intermediate after construction invalidates recorded gradients.
    std::span<Real> mutable_data();
    std::vector<Real> to_vector() const;
    Real item() const;
    Real at(std::initializer_list<std::size_t> index) const;

    bool requires_grad() const;
    void set_requires_grad(bool value);
    bool is_leaf() const;

    bool has_grad() const;
    std::span<const Real> grad() const;
    std::span<Real> mutable_grad();
    void zero_grad();

    // Accumulates d(this)/d(leaf) into every reachable leaf that requires
    // gradients. `this` must be a scalar.
    void backward() const;

    // New leaf sharing no graph history; values copied.
    Tensor detach() const;

    bool same_node(const Tensor& other) const noexcept { return node_ == other.node_; }

    // Graph construction hook used by ops. `vjp` receives the output gradient
    // and must accumulate into each parent via Tensor::accumulate_grad.
    using Backward = std::function<void(std::span<const Real> out_grad)>;
    static Tensor make_result(Shape shape, std::vector<Real> data, std::vector<Tensor> parents,
                              Backward vjp);

    // Adds `g` into this tensor's gradient buffer (allocating it on first use).
    void accumulate_grad(std::span<const Real> g) const;
    // Raw gradient slot for ops that scatter-add into it; allocates on demand.
    std::span<Real> grad_slot() const;

private:
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
    std::shared_ptr<detail::Node> node_;
};

// Declared forward values with a caller-supplied backward. The output takes
// `values` (shape of `input`) and routes the gradient through `vjp`, which
// maps the output gradient to the input gradient. With vjp = identity this is
// the straight-through estimator.
Tensor custom_unary(const Tensor& input, std::vector<Real> values,
                    std::function<std::vector<Real>(std::span<const Real> out_grad)> vjp);

// Forward `values`, backward identity.
Tensor straight_through(const Tensor& input, std::vector<Real> values);

}  // namespace m3t
