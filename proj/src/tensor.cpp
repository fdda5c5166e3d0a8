#include "m3t/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "m3t/errors.hpp"

namespace m3t {

namespace detail {

struct Node {
    Shape shape;
    std::vector<Real> data;
    std::vector<Real> grad;
    bool requires_grad = false;
    std::vector<Tensor> parents;
    Tensor::Backward backward;

    bool leaf() const { return !backward; }
    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
};

}  // namespace detail

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto e : shape) n *= e;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << ']';
    return os.str();
}

namespace {

void check_shape(const Shape& shape, std::size_t n) {
    for (auto e : shape)
        if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
    if (shape_numel(shape) != n)
        throw DimensionError("data length " + std::to_string(n) + " does not match shape " +
                             shape_str(shape));
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, Real value, bool requires_grad) {
    auto n = shape_numel(shape);
    return from(std::move(shape), std::vector<Real>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<Real> data, bool requires_grad) {
    check_shape(shape, data.size());
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(Real value, bool requires_grad) { return from({1}, {value}, requires_grad); }

const Shape& Tensor::shape() const {
    if (!node_) throw UsageError("undefined tensor");
    return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
    const auto& s = shape();
    if (axis >= s.size()) throw DimensionError("axis out of range for shape " + shape_str(s));
    return s[axis];
}

std::size_t Tensor::numel() const { return shape_numel(shape()); }

std::span<const Real> Tensor::data() const {
    shape();
    return node_->data;
}

std::span<Real> Tensor::mutable_data() {
    shape();
    return node_->data;
}

std::vector<Real> Tensor::to_vector() const {
    auto d = data();
    return {d.begin(), d.end()};
}

Real Tensor::item() const {
    if (numel() != 1) throw UsageError("item() on tensor of shape " + shape_str(shape()));
    return node_->data[0];
}

Real Tensor::at(std::initializer_list<std::size_t> index) const {
    const auto& s = shape();
    if (index.size() != s.size()) throw DimensionError("index rank does not match " + shape_str(s));
    std::size_t off = 0;
    std::size_t i = 0;
    for (auto idx : index) {
        if (idx >= s[i]) throw DimensionError("index out of range for " + shape_str(s));
        off = off * s[i] + idx;
        ++i;
    }
    return node_->data[off];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool value) {
    shape();
    if (!node_->leaf()) throw UsageError("requires_grad can only be changed on leaf tensors");
    node_->requires_grad = value;
}

bool Tensor::is_leaf() const { return node_ && node_->leaf(); }

bool Tensor::has_grad() const { return node_ && node_->grad.size() == node_->data.size() && !node_->data.empty(); }

std::span<const Real> Tensor::grad() const {
    if (!has_grad()) throw UsageError("tensor has no gradient; call backward() first");
    return node_->grad;
}

std::span<Real> Tensor::mutable_grad() {
    if (!has_grad()) throw UsageError("tensor has no gradient; call backward() first");
    return node_->grad;
}

void Tensor::zero_grad() {
    if (node_ && !node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::accumulate_grad(std::span<const Real> g) const {
    if (!node_->requires_grad) return;
    node_->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) node_->grad[i] += g[i];
}

std::span<Real> Tensor::grad_slot() const {
    node_->ensure_grad();
    return node_->grad;
}

Tensor Tensor::make_result(Shape shape, std::vector<Real> data, std::vector<Tensor> parents,
                           Backward vjp) {
    check_shape(shape, data.size());
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    bool any = std::any_of(parents.begin(), parents.end(),
                           [](const Tensor& p) { return p.requires_grad(); });
    if (any) {
        node->requires_grad = true;
        node->parents = std::move(parents);
        node->backward = std::move(vjp);
    }
    return Tensor(std::move(node));
}

void Tensor::backward() const {
    if (numel() != 1) throw UsageError("backward() requires a scalar loss, got shape " + shape_str(shape()));
    if (!node_->requires_grad) return;

    // Iterative post-order DFS gives a topological order (parents first).
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> seen;
    std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
    seen.insert(node_.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            auto* p = node->parents[next++].node_.get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (auto* n : order) {
        if (n->leaf()) {
            n->ensure_grad();
        } else {
            n->grad.assign(n->data.size(), 0.0);
        }
    }
    node_->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        auto* n = *it;
        if (!n->leaf()) n->backward(n->grad);
    }
}

Tensor Tensor::detach() const { return from(shape(), to_vector(), false); }

Tensor custom_unary(const Tensor& input, std::vector<Real> values,
                    std::function<std::vector<Real>(std::span<const Real>)> vjp) {
    if (values.size() != input.numel())
        throw DimensionError("custom_unary: value count does not match input " + shape_str(input.shape()));
    Tensor in = input;
    return Tensor::make_result(input.shape(), std::move(values), {input},
                               [in, vjp = std::move(vjp)](std::span<const Real> g) {
                                   auto gi = vjp(g);
                                   if (gi.size() != in.numel())
                                       throw DimensionError("custom_unary: vjp returned wrong length");
                                   in.accumulate_grad(gi);
                               });
}

Tensor straight_through(const Tensor& input, std::vector<Real> values) {
    return custom_unary(input, std::move(values), [](std::span<const Real> g) {
        return std::vector<Real>(g.begin(), g.end());
    });
}

}  // namespace m3t
