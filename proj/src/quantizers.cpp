#include "m3t/quantizers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "m3t/errors.hpp"
#include "m3t/ops.hpp"

namespace m3t::quant {

namespace {

Real level_offset(int L) { return L % 2 == 0 ? 0.5 : 0.0; }
int low_index(int L) { return -(L / 2); }
int high_index(int L) { return (L + 1) / 2 - 1; }

// Integer level index k in [-floor(L/2), ceil(L/2)-1]; level value is k + offset.
int snap_index(Real bounded, int L) {
    const Real shifted = bounded - level_offset(L);
    const Real r = std::round(shifted);
    // tanh saturates to exactly 1 in double precision for large |z|, which
    // would otherwise round one step past the outermost level.
    return static_cast<int>(std::clamp(r, static_cast<Real>(low_index(L)), static_cast<Real>(high_index(L))));
}

void check_dims(std::size_t got, const LevelSpec& spec) {
    if (got != spec.dims())
        throw UsageError("latent has " + std::to_string(got) + " dimensions, level spec has " + std::to_string(spec.dims()));
}

std::pair<std::size_t, std::size_t> outer_inner(const Shape& s, std::size_t axis) {
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
    return {outer, inner};
}

}  // namespace

std::size_t LevelSpec::codebook_size() const {
    std::size_t c = 1;
    for (int L : levels) c *= static_cast<std::size_t>(L);
    return c;
}

void LevelSpec::validate() const {
    if (levels.empty()) throw UsageError("level spec needs at least one dimension");
    for (int L : levels)
        if (L < 2) throw UsageError("every level count must be >= 2, got " + std::to_string(L));
}

LevelSpec LevelSpec::for_modality(Modality m) {
    switch (m) {
        case Modality::body: return body();
        case Modality::left_hand:
        case Modality::right_hand: return hand();
        case Modality::face: return face();
    }
    return body();
}

FsqFrame fsq_quantize(std::span<const Real> z, const LevelSpec& spec) {
    spec.validate();
    check_dims(z.size(), spec);
    FsqFrame out;
    out.quantized.resize(z.size());
    out.digits.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        const int L = spec.levels[i];
        const int k = snap_index(0.5 * L * std::tanh(z[i]), L);
        out.quantized[i] = k + level_offset(L);
        out.digits[i] = k - low_index(L);
    }
    return out;
}

std::vector<Real> fsq_snap(std::span<const Real> bounded, const LevelSpec& spec) {
    check_dims(bounded.size(), spec);
    std::vector<Real> q(bounded.size());
    for (std::size_t i = 0; i < q.size(); ++i) q[i] = snap_index(bounded[i], spec.levels[i]) + level_offset(spec.levels[i]);
    return q;
}

std::vector<int> fsq_digits_of(std::span<const Real> quantized, const LevelSpec& spec) {
    check_dims(quantized.size(), spec);
    std::vector<int> d(quantized.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = snap_index(quantized[i], spec.levels[i]) - low_index(spec.levels[i]);
    return d;
}

std::vector<Real> fsq_levels_of(std::span<const int> digits, const LevelSpec& spec) {
    check_dims(digits.size(), spec);
    std::vector<Real> q(digits.size());
    for (std::size_t i = 0; i < q.size(); ++i) {
        const int L = spec.levels[i];
        if (digits[i] < 0 || digits[i] >= L)
            throw UsageError("digit " + std::to_string(digits[i]) + " outside [0, " + std::to_string(L) + ")");
        q[i] = digits[i] + low_index(L) + level_offset(L);
    }
    return q;
}

Tensor fsq_bound(const Tensor& z, const LevelSpec& spec, std::size_t axis) {
    spec.validate();
    if (axis >= z.rank()) throw DimensionError("fsq axis out of range for " + shape_str(z.shape()));
    check_dims(z.dim(axis), spec);
    Shape half_shape(z.rank(), 1);
    half_shape[axis] = spec.dims();
    std::vector<Real> half(spec.dims());
    for (std::size_t i = 0; i < half.size(); ++i) half[i] = 0.5 * spec.levels[i];
    return mul(tanh(z), Tensor::from(half_shape, std::move(half)));
}

Tensor fsq_quantize_tensor(const Tensor& z, const LevelSpec& spec, std::size_t axis) {
    Tensor bounded = fsq_bound(z, spec, axis);
    auto [outer, inner] = outer_inner(bounded.shape(), axis);
    const std::size_t d = spec.dims();
    auto bv = bounded.data();
    std::vector<Real> q(bv.size());
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t r = 0; r < inner; ++r) {
                const std::size_t k = (o * d + i) * inner + r;
                const int L = spec.levels[i];
                q[k] = snap_index(bv[k], L) + level_offset(L);
            }
    return straight_through(bounded, std::move(q));
}

std::vector<int> fsq_digits_tensor(const Tensor& quantized, const LevelSpec& spec, std::size_t axis) {
    if (axis >= quantized.rank()) throw DimensionError("fsq axis out of range");
    check_dims(quantized.dim(axis), spec);
    auto [outer, inner] = outer_inner(quantized.shape(), axis);
    const std::size_t d = spec.dims();
    auto qv = quantized.data();
    std::vector<int> digits(qv.size());
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t r = 0; r < inner; ++r)
            for (std::size_t i = 0; i < d; ++i) {
                const int L = spec.levels[i];
                digits[(o * inner + r) * d + i] = snap_index(qv[(o * d + i) * inner + r], L) - low_index(L);
            }
    return digits;
}

std::vector<Real> fsq_decoder_scale(const LevelSpec& spec) {
    std::vector<Real> s(spec.dims());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = 2.0 / spec.levels[i];
    return s;
}

std::size_t digits_to_index(std::span<const int> digits, const LevelSpec& spec) {
    check_dims(digits.size(), spec);
    std::size_t index = 0;
    std::size_t radix = 1;
    for (std::size_t i = 0; i < digits.size(); ++i) {
        const int L = spec.levels[i];
        if (digits[i] < 0 || digits[i] >= L)
            throw UsageError("digit " + std::to_string(digits[i]) + " outside [0, " + std::to_string(L) + ")");
        index += static_cast<std::size_t>(digits[i]) * radix;
        radix *= static_cast<std::size_t>(L);
    }
    return index;
}

std::vector<int> index_to_digits(std::size_t index, const LevelSpec& spec) {
    spec.validate();
    if (index >= spec.codebook_size())
        throw UsageError("index " + std::to_string(index) + " outside [0, " + std::to_string(spec.codebook_size()) + ")");
    std::vector<int> digits(spec.dims());
    for (std::size_t i = 0; i < digits.size(); ++i) {
        const auto L = static_cast<std::size_t>(spec.levels[i]);
        digits[i] = static_cast<int>(index % L);
        index /= L;
    }
    return digits;
}

void Codebook::validate() const {
    if (size() == 0) throw UsageError("codebook is empty");
    if (usage_counts.size() != size()) throw UsageError("codebook usage counts do not match entry count");
    for (auto v : entries.data())
        if (!std::isfinite(v)) throw NumericError("codebook entry is not finite");
}

Codebook Codebook::uniform_init(std::size_t K, std::size_t d, unsigned long long seed) {
    if (K == 0 || d == 0) throw UsageError("codebook dimensions must be positive");
    std::mt19937_64 rng(seed);
    const Real bound = 1.0 / static_cast<Real>(K);
    std::uniform_real_distribution<Real> u(-bound, bound);
    std::vector<Real> v(K * d);
    for (auto& x : v) x = u(rng);
    return from_entries(K, d, std::move(v));
}

Codebook Codebook::from_entries(std::size_t K, std::size_t d, std::vector<Real> values) {
    if (K == 0) throw UsageError("codebook is empty");
    Codebook cb;
    cb.entries = Tensor::from({K, d}, std::move(values), true);
    cb.usage_counts.assign(K, 0);
    return cb;
}

std::size_t vq_nearest(std::span<const Real> z, const Tensor& entries) {
    if (!entries.defined() || entries.dim(0) == 0) throw UsageError("codebook is empty");
    const std::size_t K = entries.dim(0), d = entries.dim(1);
    if (z.size() != d) throw UsageError("latent has " + std::to_string(z.size()) + " dims, codebook has " + std::to_string(d));
    auto ev = entries.data();
    std::size_t best = 0;
    Real best_dist = std::numeric_limits<Real>::infinity();
    for (std::size_t k = 0; k < K; ++k) {
        Real dist = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const Real diff = z[j] - ev[k * d + j];
            dist += diff * diff;
        }
        if (dist < best_dist) {  // strict: first minimum wins ties
            best_dist = dist;
            best = k;
        }
    }
    return best;
}

VqMatch vq_quantize(std::span<const Real> z, Codebook& codebook) {
    if (codebook.size() == 0) throw UsageError("codebook is empty");
    VqMatch m;
    m.index = vq_nearest(z, codebook.entries);
    const std::size_t d = codebook.dims();
    auto ev = codebook.entries.data();
    m.entry.assign(ev.begin() + m.index * d, ev.begin() + (m.index + 1) * d);
    Real dist = 0.0;
    for (std::size_t j = 0; j < d; ++j) dist += (z[j] - m.entry[j]) * (z[j] - m.entry[j]);
    m.distance = std::sqrt(dist);
    ++codebook.usage_counts[m.index];
    return m;
}

VqTensorResult vq_quantize_tensor(const Tensor& z_rows, Codebook& codebook) {
    if (codebook.size() == 0) throw UsageError("codebook is empty");
    if (z_rows.rank() != 2 || z_rows.dim(1) != codebook.dims())
        throw DimensionError("vq expects rows [n x " + std::to_string(codebook.dims()) + "], got " + shape_str(z_rows.shape()));
    const std::size_t n = z_rows.dim(0), d = z_rows.dim(1);
    VqTensorResult r;
    r.indices.resize(n);
    auto zv = z_rows.data();
    for (std::size_t i = 0; i < n; ++i) {
        r.indices[i] = vq_nearest(zv.subspan(i * d, d), codebook.entries);
        ++codebook.usage_counts[r.indices[i]];
    }
    r.entries = gather_rows(codebook.entries, r.indices);
    r.quantized = straight_through(z_rows, r.entries.to_vector());
    return r;
}

VqLosses vq_losses(const Tensor& z, const Tensor& entry) {
    if (z.shape() != entry.shape())
        throw DimensionError("vq_losses shape mismatch: " + shape_str(z.shape()) + " vs " + shape_str(entry.shape()));
    return {sum(square(sub(z.detach(), entry))), sum(square(sub(z, entry.detach())))};
}

UtilizationReport utilization(std::span<const TokenStream> streams, std::size_t codebook_size) {
    if (codebook_size == 0) throw UsageError("codebook size must be positive");
    UtilizationReport rep;
    rep.frequency_histogram.assign(codebook_size, 0);
    for (const auto& s : streams)
        for (auto idx : s.indices) {
            if (idx >= codebook_size)
                throw DataError("token index " + std::to_string(idx) + " >= codebook size " + std::to_string(codebook_size));
            ++rep.frequency_histogram[idx];
            ++rep.total_tokens;
        }
    std::size_t used = 0;
    for (auto c : rep.frequency_histogram) used += c > 0;
    rep.used_fraction = static_cast<Real>(used) / static_cast<Real>(codebook_size);
    const Real mu = static_cast<Real>(rep.total_tokens) / static_cast<Real>(codebook_size);
    Real var = 0.0;
    for (auto c : rep.frequency_histogram) var += (static_cast<Real>(c) - mu) * (static_cast<Real>(c) - mu);
    rep.frequency_sd = std::sqrt(var / static_cast<Real>(codebook_size));
    return rep;
}

}  // namespace m3t::quant
