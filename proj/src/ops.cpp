#include "m3t/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "m3t/errors.hpp"

namespace m3t {

namespace {

using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

// Element offsets of both operands for every output element.
struct Broadcast {
    Shape out;
    bool same = false;
    std::vector<std::size_t> a_off;
    std::vector<std::size_t> b_off;
};

std::vector<std::size_t> strides_for(const Shape& s, std::size_t rank) {
    // Strides aligned to the right in a rank-`rank` frame; broadcast axes get 0.
    std::vector<std::size_t> st(rank, 0);
    std::size_t acc = 1;
    for (std::size_t i = 0; i < s.size(); ++i) {
        std::size_t axis = s.size() - 1 - i;
        std::size_t frame = rank - 1 - i;
        st[frame] = s[axis] == 1 ? 0 : acc;
        acc *= s[axis];
    }
    return st;
}

Broadcast broadcast(const Shape& a, const Shape& b, const char* op) {
    Broadcast bc;
    if (a == b) {
        bc.out = a;
        bc.same = true;
        return bc;
    }
    std::size_t rank = std::max(a.size(), b.size());
    bc.out.assign(rank, 1);
    for (std::size_t i = 0; i < rank; ++i) {
        std::size_t ea = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
        std::size_t eb = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
        if (ea != eb && ea != 1 && eb != 1)
            throw DimensionError(std::string(op) + ": shapes " + shape_str(a) + " and " + shape_str(b) +
                                 " are not broadcast-compatible");
        bc.out[i] = std::max(ea, eb);
    }
    auto sa = strides_for(a, rank);
    auto sb = strides_for(b, rank);
    std::size_t n = shape_numel(bc.out);
    bc.a_off.resize(n);
    bc.b_off.resize(n);
    std::vector<std::size_t> idx(rank, 0);
    std::size_t oa = 0, ob = 0;
    for (std::size_t k = 0; k < n; ++k) {
        bc.a_off[k] = oa;
        bc.b_off[k] = ob;
        for (std::size_t ax = rank; ax-- > 0;) {
            ++idx[ax];
            oa += sa[ax];
            ob += sb[ax];
            if (idx[ax] < bc.out[ax]) break;
            oa -= sa[ax] * idx[ax];
            ob -= sb[ax] * idx[ax];
            idx[ax] = 0;
        }
    }
    return bc;
}

// Shared driver for broadcasting binary ops. `f` computes the value,
// `da`/`db` the partial derivatives given (a, b).
template <class F, class DA, class DB>
Tensor binary(const Tensor& a, const Tensor& b, const char* name, F f, DA da, DB db) {
    auto bc = std::make_shared<Broadcast>(broadcast(a.shape(), b.shape(), name));
    auto av = a.data();
    auto bv = b.data();
    std::size_t n = shape_numel(bc->out);
    std::vector<Real> out(n);
    if (bc->same) {
        for (std::size_t i = 0; i < n; ++i) out[i] = f(av[i], bv[i]);
    } else {
        for (std::size_t i = 0; i < n; ++i) out[i] = f(av[bc->a_off[i]], bv[bc->b_off[i]]);
    }
    Shape shape = bc->out;
    return Tensor::make_result(std::move(shape), std::move(out), {a, b},
                               [a, b, bc, da, db](std::span<const Real> g) {
                                   auto av = a.data();
                                   auto bv = b.data();
                                   std::size_t n = g.size();
                                   if (a.requires_grad()) {
                                       auto ga = a.grad_slot();
                                       for (std::size_t i = 0; i < n; ++i) {
                                           std::size_t ia = bc->same ? i : bc->a_off[i];
                                           std::size_t ib = bc->same ? i : bc->b_off[i];
                                           ga[ia] += g[i] * da(av[ia], bv[ib]);
                                       }
                                   }
                                   if (b.requires_grad()) {
                                       auto gb = b.grad_slot();
                                       for (std::size_t i = 0; i < n; ++i) {
                                           std::size_t ia = bc->same ? i : bc->a_off[i];
                                           std::size_t ib = bc->same ? i : bc->b_off[i];
                                           gb[ib] += g[i] * db(av[ia], bv[ib]);
                                       }
                                   }
                               });
}

// Unary op whose derivative is expressed through input x and output y.
template <class F, class D>
Tensor unary(const Tensor& a, F f, D d) {
    auto av = a.data();
    std::vector<Real> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
    if (!a.requires_grad()) return Tensor::from(a.shape(), std::move(out));
    auto yv = std::make_shared<std::vector<Real>>(out);
    return Tensor::make_result(a.shape(), std::move(out), {a}, [a, yv, d](std::span<const Real> g) {
        auto av = a.data();
        auto ga = a.grad_slot();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * d(av[i], (*yv)[i]);
    });
}

std::pair<std::size_t, std::size_t> outer_inner(const Shape& s, std::size_t axis) {
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
    return {outer, inner};
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary(
        a, b, "add", [](Real x, Real y) { return x + y; }, [](Real, Real) { return 1.0; },
        [](Real, Real) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary(
        a, b, "sub", [](Real x, Real y) { return x - y; }, [](Real, Real) { return 1.0; },
        [](Real, Real) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary(
        a, b, "mul", [](Real x, Real y) { return x * y; }, [](Real, Real y) { return y; },
        [](Real x, Real) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return binary(
        a, b, "div", [](Real x, Real y) { return x / y; }, [](Real, Real y) { return 1.0 / y; },
        [](Real x, Real y) { return -x / (y * y); });
}

Tensor scale(const Tensor& a, Real factor) {
    return unary(
        a, [factor](Real x) { return factor * x; }, [factor](Real, Real) { return factor; });
}

Tensor add_scalar(const Tensor& a, Real value) {
    return unary(
        a, [value](Real x) { return x + value; }, [](Real, Real) { return 1.0; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor tanh(const Tensor& a) {
    return unary(
        a, [](Real x) { return std::tanh(x); }, [](Real, Real y) { return 1.0 - y * y; });
}

Tensor square(const Tensor& a) {
    return unary(
        a, [](Real x) { return x * x; }, [](Real x, Real) { return 2.0 * x; });
}

Tensor sqrt(const Tensor& a) {
    return unary(
        a, [](Real x) { return std::sqrt(x); }, [](Real, Real y) { return 0.5 / y; });
}

Tensor relu(const Tensor& a) {
    return unary(
        a, [](Real x) { return x > 0.0 ? x : 0.0; }, [](Real x, Real) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor elementwise(ElementwiseKind kind, const Tensor& a, const Tensor* b) {
    auto need_b = [&]() -> const Tensor& {
        if (!b) throw UsageError("elementwise: binary op requires a second operand");
        return *b;
    };
    switch (kind) {
        case ElementwiseKind::add: return add(a, need_b());
        case ElementwiseKind::sub: return sub(a, need_b());
        case ElementwiseKind::mul: return mul(a, need_b());
        case ElementwiseKind::scale: return scale(a, need_b().item());
        case ElementwiseKind::tanh: return tanh(a);
        case ElementwiseKind::square: return square(a);
    }
    throw UsageError("elementwise: unknown op kind");
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw DimensionError("matmul expects rank-2 operands, got " + shape_str(a.shape()) + " and " +
                             shape_str(b.shape()));
    std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k)
        throw DimensionError("matmul inner dimensions differ: " + shape_str(a.shape()) + " . " +
                             shape_str(b.shape()));
    std::vector<Real> out(m * n);
    MapMat(out.data(), m, n).noalias() = ConstMapMat(a.data().data(), m, k) * ConstMapMat(b.data().data(), k, n);
    return Tensor::make_result({m, n}, std::move(out), {a, b}, [a, b, m, k, n](std::span<const Real> g) {
        ConstMapMat G(g.data(), m, n);
        if (a.requires_grad())
            MapMat(a.grad_slot().data(), m, k).noalias() += G * ConstMapMat(b.data().data(), k, n).transpose();
        if (b.requires_grad())
            MapMat(b.grad_slot().data(), k, n).noalias() += ConstMapMat(a.data().data(), m, k).transpose() * G;
    });
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2 && a.rank() != 3) throw DimensionError("transpose expects rank 2 or 3, got " + shape_str(a.shape()));
    const std::size_t batch = a.rank() == 3 ? a.dim(0) : 1;
    const std::size_t m = a.dim(a.rank() - 2), n = a.dim(a.rank() - 1);
    std::vector<Real> out(batch * m * n);
    for (std::size_t b = 0; b < batch; ++b)
        MapMat(out.data() + b * m * n, n, m) = ConstMapMat(a.data().data() + b * m * n, m, n).transpose();
    Shape os = a.shape();
    std::swap(os[os.size() - 1], os[os.size() - 2]);
    return Tensor::make_result(std::move(os), std::move(out), {a}, [a, batch, m, n](std::span<const Real> g) {
        auto ga = a.grad_slot();
        for (std::size_t b = 0; b < batch; ++b)
            MapMat(ga.data() + b * m * n, m, n) += ConstMapMat(g.data() + b * m * n, n, m).transpose();
    });
}

Tensor gather_rows(const Tensor& table, const std::vector<std::size_t>& indices) {
    if (table.rank() != 2) throw DimensionError("gather_rows expects a rank-2 table, got " + shape_str(table.shape()));
    if (indices.empty()) throw UsageError("gather_rows needs at least one index");
    const std::size_t K = table.dim(0), d = table.dim(1);
    std::vector<Real> out(indices.size() * d);
    auto tv = table.data();
    for (std::size_t r = 0; r < indices.size(); ++r) {
        if (indices[r] >= K) throw DimensionError("gather_rows index " + std::to_string(indices[r]) + " >= " + std::to_string(K));
        std::copy_n(tv.begin() + indices[r] * d, d, out.begin() + r * d);
    }
    return Tensor::make_result({indices.size(), d}, std::move(out), {table}, [table, indices, d](std::span<const Real> g) {
        auto gt = table.grad_slot();
        for (std::size_t r = 0; r < indices.size(); ++r)
            for (std::size_t j = 0; j < d; ++j) gt[indices[r] * d + j] += g[r * d + j];
    });
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_numel(shape) != a.numel())
        throw DimensionError("reshape " + shape_str(a.shape()) + " -> " + shape_str(shape));
    return Tensor::make_result(std::move(shape), a.to_vector(), {a},
                               [a](std::span<const Real> g) { a.accumulate_grad(g); });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length) {
    const auto& s = a.shape();
    if (axis >= s.size()) throw DimensionError("slice axis out of range for " + shape_str(s));
    if (length == 0 || start + length > s[axis])
        throw DimensionError("slice [" + std::to_string(start) + ", " + std::to_string(start + length) +
                             ") exceeds extent " + std::to_string(s[axis]));
    auto [outer, inner] = outer_inner(s, axis);
    std::size_t ext = s[axis];
    Shape os = s;
    os[axis] = length;
    std::vector<Real> out(outer * length * inner);
    auto av = a.data();
    for (std::size_t o = 0; o < outer; ++o)
        std::copy_n(av.begin() + (o * ext + start) * inner, length * inner, out.begin() + o * length * inner);
    return Tensor::make_result(std::move(os), std::move(out), {a},
                               [a, outer, inner, ext, start, length](std::span<const Real> g) {
                                   auto ga = a.grad_slot();
                                   for (std::size_t o = 0; o < outer; ++o)
                                       for (std::size_t i = 0; i < length * inner; ++i)
                                           ga[(o * ext + start) * inner + i] += g[o * length * inner + i];
                               });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) throw UsageError("concat of zero tensors");
    Shape os = parts[0].shape();
    if (axis >= os.size()) throw DimensionError("concat axis out of range for " + shape_str(os));
    std::size_t total = 0;
    for (const auto& p : parts) {
        auto s = p.shape();
        if (s.size() != os.size()) throw DimensionError("concat rank mismatch");
        for (std::size_t i = 0; i < s.size(); ++i)
            if (i != axis && s[i] != os[i])
                throw DimensionError("concat shape mismatch: " + shape_str(s) + " vs " + shape_str(os));
        total += s[axis];
    }
    os[axis] = total;
    auto [outer, inner] = outer_inner(os, axis);
    std::vector<Real> out(shape_numel(os));
    std::size_t offset = 0;
    std::vector<std::size_t> offsets;
    for (const auto& p : parts) {
        std::size_t ext = p.dim(axis);
        auto pv = p.data();
        for (std::size_t o = 0; o < outer; ++o)
            std::copy_n(pv.begin() + o * ext * inner, ext * inner, out.begin() + (o * total + offset) * inner);
        offsets.push_back(offset);
        offset += ext;
    }
    return Tensor::make_result(std::move(os), std::move(out), parts,
                               [parts, offsets, outer, inner, total, axis](std::span<const Real> g) {
                                   for (std::size_t k = 0; k < parts.size(); ++k) {
                                       const auto& p = parts[k];
                                       if (!p.requires_grad()) continue;
                                       std::size_t ext = p.dim(axis);
                                       auto gp = p.grad_slot();
                                       for (std::size_t o = 0; o < outer; ++o)
                                           for (std::size_t i = 0; i < ext * inner; ++i)
                                               gp[o * ext * inner + i] += g[(o * total + offsets[k]) * inner + i];
                                   }
                               });
}

Tensor stack(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw UsageError("stack of zero tensors");
    std::vector<Tensor> lifted;
    lifted.reserve(parts.size());
    for (const auto& p : parts) {
        Shape s{1};
        s.insert(s.end(), p.shape().begin(), p.shape().end());
        lifted.push_back(reshape(p, s));
    }
    return concat(lifted, 0);
}

Tensor sum(const Tensor& a) {
    Real s = 0.0;
    for (auto v : a.data()) s += v;
    return Tensor::make_result({1}, {s}, {a}, [a](std::span<const Real> g) {
        auto ga = a.grad_slot();
        for (auto& v : ga) v += g[0];
    });
}

Tensor sum_axis(const Tensor& a, std::size_t axis, bool keepdim) {
    const auto& s = a.shape();
    if (axis >= s.size()) throw DimensionError("sum_axis: axis out of range for " + shape_str(s));
    auto [outer, inner] = outer_inner(s, axis);
    std::size_t ext = s[axis];
    Shape os = s;
    if (keepdim || s.size() == 1) {
        os[axis] = 1;
    } else {
        os.erase(os.begin() + static_cast<std::ptrdiff_t>(axis));
    }
    std::vector<Real> out(outer * inner, 0.0);
    auto av = a.data();
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t e = 0; e < ext; ++e)
            for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] += av[(o * ext + e) * inner + i];
    return Tensor::make_result(std::move(os), std::move(out), {a}, [a, outer, inner, ext](std::span<const Real> g) {
        auto ga = a.grad_slot();
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t e = 0; e < ext; ++e)
                for (std::size_t i = 0; i < inner; ++i) ga[(o * ext + e) * inner + i] += g[o * inner + i];
    });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<Real>(a.numel())); }

Tensor mse(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw DimensionError("mse shape mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    return mean(square(sub(a, b)));
}

Tensor conv1d(const Tensor& x, const Tensor& kernel, const Tensor* bias, std::size_t stride,
              std::size_t dilation) {
    if (x.rank() != 2 && x.rank() != 3)
        throw DimensionError("conv1d input must be [C x T] or [B x C x T], got " + shape_str(x.shape()));
    if (kernel.rank() != 3) throw DimensionError("conv1d kernel must be [C_out x C_in x K]");
    if (stride == 0 || dilation == 0) throw UsageError("conv1d stride and dilation must be positive");
    const bool batched = x.rank() == 3;
    const std::size_t B = batched ? x.dim(0) : 1;
    const std::size_t Ci = x.dim(batched ? 1 : 0);
    const std::size_t T = x.dim(batched ? 2 : 1);
    const std::size_t Co = kernel.dim(0);
    const std::size_t K = kernel.dim(2);
    if (kernel.dim(1) != Ci)
        throw DimensionError("conv1d channel mismatch: input has " + std::to_string(Ci) + ", kernel expects " +
                             std::to_string(kernel.dim(1)));
    if (K % 2 == 0) throw UsageError("conv1d same padding requires an odd kernel size");
    if (bias && (bias->rank() != 1 || bias->dim(0) != Co)) throw DimensionError("conv1d bias must be [C_out]");
    const std::size_t pad = dilation * (K - 1) / 2;
    const std::size_t To = (T + stride - 1) / stride;
    const std::size_t rows = Ci * K;
    const std::size_t cols_n = B * To;

    // im2col: cols[(ci*K + k), (b*To + t)] = x[b, ci, t*stride + k*dilation - pad]
    auto cols = std::make_shared<std::vector<Real>>(rows * cols_n, 0.0);
    auto xv = x.data();
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t ci = 0; ci < Ci; ++ci) {
            const Real* xs = xv.data() + (b * Ci + ci) * T;
            for (std::size_t k = 0; k < K; ++k) {
                Real* row = cols->data() + (ci * K + k) * cols_n + b * To;
                for (std::size_t t = 0; t < To; ++t) {
                    auto pos = static_cast<std::ptrdiff_t>(t * stride + k * dilation) - static_cast<std::ptrdiff_t>(pad);
                    if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(T)) row[t] = xs[pos];
                }
            }
        }

    RowMat Y(Co, cols_n);
    Y.noalias() = ConstMapMat(kernel.data().data(), Co, rows) * ConstMapMat(cols->data(), rows, cols_n);
    std::vector<Real> out(B * Co * To);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t co = 0; co < Co; ++co) {
            Real bv = bias ? bias->data()[co] : 0.0;
            for (std::size_t t = 0; t < To; ++t) out[(b * Co + co) * To + t] = Y(co, b * To + t) + bv;
        }
    Shape os = batched ? Shape{B, Co, To} : Shape{Co, To};
    std::vector<Tensor> parents{x, kernel};
    if (bias) parents.push_back(*bias);
    Tensor bias_t = bias ? *bias : Tensor();
    return Tensor::make_result(
        std::move(os), std::move(out), std::move(parents),
        [=](std::span<const Real> g) {
            RowMat G(Co, cols_n);
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t co = 0; co < Co; ++co)
                    for (std::size_t t = 0; t < To; ++t) G(co, b * To + t) = g[(b * Co + co) * To + t];
            if (kernel.requires_grad())
                MapMat(kernel.grad_slot().data(), Co, rows).noalias() +=
                    G * ConstMapMat(cols->data(), rows, cols_n).transpose();
            if (bias_t.defined() && bias_t.requires_grad()) {
                auto gb = bias_t.grad_slot();
                for (std::size_t co = 0; co < Co; ++co) gb[co] += G.row(static_cast<Eigen::Index>(co)).sum();
            }
            if (x.requires_grad()) {
                RowMat dcols(rows, cols_n);
                dcols.noalias() = ConstMapMat(kernel.data().data(), Co, rows).transpose() * G;
                auto gx = x.grad_slot();
                for (std::size_t b = 0; b < B; ++b)
                    for (std::size_t ci = 0; ci < Ci; ++ci) {
                        Real* xs = gx.data() + (b * Ci + ci) * T;
                        for (std::size_t k = 0; k < K; ++k) {
                            const Real* row = dcols.data() + (ci * K + k) * cols_n + b * To;
                            for (std::size_t t = 0; t < To; ++t) {
                                auto pos = static_cast<std::ptrdiff_t>(t * stride + k * dilation) -
                                           static_cast<std::ptrdiff_t>(pad);
                                if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(T)) xs[pos] += row[t];
                            }
                        }
                    }
            }
        });
}

Tensor upsample_nearest(const Tensor& x, std::size_t factor) {
    if (factor == 0) throw UsageError("upsample factor must be positive");
    Shape os = x.shape();
    std::size_t T = os.back();
    std::size_t rows = x.numel() / T;
    os.back() = T * factor;
    std::vector<Real> out(x.numel() * factor);
    auto xv = x.data();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t f = 0; f < factor; ++f) out[(r * T + t) * factor + f] = xv[r * T + t];
    return Tensor::make_result(std::move(os), std::move(out), {x}, [x, rows, T, factor](std::span<const Real> g) {
        auto gx = x.grad_slot();
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t t = 0; t < T; ++t)
                for (std::size_t f = 0; f < factor; ++f) gx[r * T + t] += g[(r * T + t) * factor + f];
    });
}

}  // namespace m3t
