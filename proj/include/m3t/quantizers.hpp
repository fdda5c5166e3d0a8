#pragma once

// Finite scalar quantization (FSQ), the plain VQ baseline, mixed-radix token
// packing, and codebook usage statistics.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "m3t/modality.hpp"
#include "m3t/tensor.hpp"

namespace m3t::quant {

// Per-dimension level counts of an FSQ quantizer.
struct LevelSpec {
    std::vector<int> levels;

    std::size_t dims() const { return levels.size(); }
    std::size_t codebook_size() const;
    void validate() const;  // throws UsageError

    static LevelSpec body() { return {{5, 5, 4}}; }   // 100 codes
    static LevelSpec hand() { return {{6, 6, 5}}; }   // 180 codes
    static LevelSpec face() { return {{6, 6, 6}}; }   // 216 codes
    static LevelSpec for_modality(Modality m);

    bool operator==(const LevelSpec&) const = default;
};

// Quantization of one latent frame.
//
// Dimension i is squashed to b = (L/2) tanh(z) and snapped to one of L
// levels. Odd L uses integer levels -(L-1)/2 .. (L-1)/2. Even L snaps
// round(b - 1/2) + 1/2, giving half-integer levels -(L-1)/2 .. (L-1)/2, so
// both parities yield exactly L values. The digit of a level is its rank in
// [0, L).
struct FsqFrame {
    std::vector<Real> quantized;  // level values, in level units
    std::vector<int> digits;
};

FsqFrame fsq_quantize(std::span<const Real> z, const LevelSpec& spec);

// Snaps already-bounded values (level units) to the nearest admissible
// level. Idempotent: snapping a level value returns it unchanged.
std::vector<Real> fsq_snap(std::span<const Real> bounded, const LevelSpec& spec);
std::vector<int> fsq_digits_of(std::span<const Real> quantized, const LevelSpec& spec);
// Level value of each digit.
std::vector<Real> fsq_levels_of(std::span<const int> digits, const LevelSpec& spec);

// Differentiable forms over a tensor whose `axis` indexes latent dimensions.
// fsq_bound is the smooth squashing (L/2) tanh(z); fsq_quantize_tensor adds
// the rounding with a straight-through gradient.
Tensor fsq_bound(const Tensor& z, const LevelSpec& spec, std::size_t axis);
Tensor fsq_quantize_tensor(const Tensor& z, const LevelSpec& spec, std::size_t axis);
// Digits of a quantized tensor, laid out like the tensor with `axis` moved last.
std::vector<int> fsq_digits_tensor(const Tensor& quantized, const LevelSpec& spec, std::size_t axis);
// Per-dimension factor 2/L that maps level values into [-1, 1].
std::vector<Real> fsq_decoder_scale(const LevelSpec& spec);

// index = sum_i digit_i * prod_{j<i} L_j
std::size_t digits_to_index(std::span<const int> digits, const LevelSpec& spec);
std::vector<int> index_to_digits(std::size_t index, const LevelSpec& spec);

// Learned codebook for the VQ baseline.
struct Codebook {
    Tensor entries;                          // [K x d], trainable
    std::vector<std::size_t> usage_counts;   // length K

    std::size_t size() const { return entries.defined() ? entries.dim(0) : 0; }
    std::size_t dims() const { return entries.dim(1); }
    void validate() const;

    // Uniform(-1/K, 1/K) initialization, the usual VQ-VAE default.
    static Codebook uniform_init(std::size_t K, std::size_t d, unsigned long long seed);
    static Codebook from_entries(std::size_t K, std::size_t d, std::vector<Real> values);
};

struct VqMatch {
    std::vector<Real> entry;
    std::size_t index = 0;
    Real distance = 0.0;
};

// Nearest entry in L2; ties resolve to the lowest index. Increments usage.
VqMatch vq_quantize(std::span<const Real> z, Codebook& codebook);
// Index of the nearest entry without touching usage counts.
std::size_t vq_nearest(std::span<const Real> z, const Tensor& entries);

// Differentiable VQ over row vectors z [n x d]. `quantized` carries entry
// values forward and a straight-through gradient to z; `entries` is the
// gathered codebook rows (gradient flows to the codebook).
struct VqTensorResult {
    Tensor quantized;
    Tensor entries;
    std::vector<std::size_t> indices;
};
VqTensorResult vq_quantize_tensor(const Tensor& z_rows, Codebook& codebook);

// codebook_loss = ||sg(z) - e||^2, commitment_loss = ||z - sg(e)||^2 (sums).
struct VqLosses {
    Tensor codebook_loss;
    Tensor commitment_loss;
};
VqLosses vq_losses(const Tensor& z, const Tensor& entry);

inline constexpr Real kCommitmentWeight = 0.25;

struct TokenStream {
    Modality modality = Modality::body;
    std::string language;
    std::vector<std::size_t> indices;
    bool includes_eos = false;
};

struct UtilizationReport {
    Real used_fraction = 0.0;
    std::vector<std::size_t> frequency_histogram;
    Real frequency_sd = 0.0;  // population SD of the histogram counts
    std::size_t total_tokens = 0;
};

// Throws DataError if any index is >= codebook_size.
UtilizationReport utilization(std::span<const TokenStream> streams, std::size_t codebook_size);

}  // namespace m3t::quant
