#pragma once

// Modality-specific convolutional VAEs with an FSQ (or VQ baseline) bottleneck.
//
// Layout inside the network is [batch x channels x time]. Inputs are
// standardized per dimension by the model's Normalizer before encoding and
// de-standardized after decoding. A hand VAE is expressed in the right-hand
// frame: left-hand input is mirrored before encoding and mirrored back after
// decoding, so one model serves both hands.

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "m3t/modality.hpp"
#include "m3t/motion_io.hpp"
#include "m3t/optim.hpp"
#include "m3t/quantizers.hpp"
#include "m3t/tensor.hpp"

namespace m3t::vae {

enum class QuantizerKind { fsq, vq };

std::string_view quantizer_name(QuantizerKind k);

struct VaeConfig {
    Modality modality = Modality::body;
    std::size_t input_dim = 60;
    std::size_t width = 64;
    std::size_t n_res_blocks = 2;
    std::size_t dilation_growth = 3;
    std::size_t downsample_stages = 2;
    std::size_t latent_dim = 3;
    QuantizerKind quantizer = QuantizerKind::fsq;
    quant::LevelSpec levels;       // FSQ only
    std::size_t codebook_size = 0;  // VQ only

    // Temporal downsampling factor w = 2^downsample_stages.
    std::size_t window() const { return std::size_t{1} << downsample_stages; }
    std::size_t codebook_entries() const;  // C

    // Width 64, 2 residual blocks.
    static VaeConfig desk(Modality m, QuantizerKind kind = QuantizerKind::fsq);
    // Width 1024, 6 residual blocks.
    static VaeConfig full(Modality m, QuantizerKind kind = QuantizerKind::fsq);
    // ModelError naming the violated invariant.
    void validate() const;
};

// Per-dimension standardization. A zero spread maps to 1 so constant
// dimensions pass through centred.
struct Normalizer {
    std::vector<Real> mean;
    std::vector<Real> stddev;

    static Normalizer identity(std::size_t dim);
    static Normalizer fit(std::span<const MotionSequence> data);
};

struct ForwardResult {
    Tensor z;              // encoder output [B x d x T/w]
    Tensor decoder_input;  // quantized latent scaled into [-1, 1]
    Tensor recon;          // [B x D x T]
    Tensor recon_loss;     // mean squared error in normalized units
    Tensor loss;           // recon_loss (+ VQ codebook/commitment terms)
    std::vector<std::size_t> indices;  // per batch item then time step
    // Quantized minus bounded latent, [B x d x T/w] (FSQ only).
    std::vector<Real> quantization_offset;
};

struct TrainOptions {
    std::size_t epochs = 50;
    std::size_t batch_size = 16;
    CosineSchedule schedule{1e-3, 1e-5, 5, 50};
    std::uint64_t seed = 0;
    // Held-out share used to pick the best epoch; 0 keeps the last epoch.
    Real val_fraction = 0.1;
    // Training crops are this long (rounded down to a multiple of w), capped
    // by the shortest sequence.
    std::size_t crop_frames = 64;
    bool fit_normalizer = true;
};

struct TrainReport {
    std::vector<Real> train_loss;  // per-epoch mean reconstruction loss
    std::vector<Real> val_loss;    // empty without a validation split
    std::size_t best_epoch = 0;
};

class MotionVae {
public:
    MotionVae(VaeConfig config, std::uint64_t seed);

    const VaeConfig& config() const { return config_; }
    const Normalizer& normalizer() const { return normalizer_; }
    void set_normalizer(Normalizer n);
    const quant::Codebook* codebook() const { return codebook_ ? &*codebook_ : nullptr; }

    // Parameters in a stable order with stable names.
    const std::vector<std::string>& parameter_names() const { return names_; }
    std::vector<Tensor> parameters() const;
    std::size_t parameter_count() const;
    // Sets every weight and bias to zero.
    void zero_initialize();

    // x: normalized batch [B x D x T], T a positive multiple of w. When
    // `frozen_offset` is given (FSQ only) the rounding is replaced by the
    // smooth bound shifted by that constant, a differentiable stand-in whose
    // gradient equals the straight-through gradient.
    ForwardResult forward(const Tensor& x, const std::vector<Real>* frozen_offset = nullptr) const;

    // Latent sequence [T/w x d] (row-major) before quantization. Frames past
    // the last full window are ignored. UsageError when T < w.
    std::vector<Real> encode(const MotionSequence& x) const;
    quant::TokenStream tokenize(const MotionSequence& x) const;
    // w frames per token. DataError on an out-of-range index.
    MotionSequence detokenize(const quant::TokenStream& stream, Real fps = 30.0) const;
    // Full-length reconstruction: right-pads by repeating the last frame up to
    // a multiple of w, then truncates the decoded output back to T frames.
    MotionSequence reconstruct(const MotionSequence& x) const;
    // Mean squared error in normalized units over the given sequences.
    Real reconstruction_error(std::span<const MotionSequence> data) const;

    // Adam with a per-epoch cosine schedule. Deterministic for a fixed seed.
    // Restores the parameters of the best validation epoch. NumericError
    // naming the epoch if a loss turns non-finite.
    TrainReport train(std::span<const MotionSequence> data, const TrainOptions& options);

    std::string to_json() const;
    static MotionVae from_json(const std::string& text);
    void save(const std::string& path) const;
    static MotionVae load(const std::string& path);

private:
    struct Conv {
        Tensor weight;  // [out x in x k]
        Tensor bias;    // [out]
    };
    Conv& add_conv(const std::string& name, std::size_t in, std::size_t out, std::size_t k, std::mt19937_64& rng);
    Tensor apply(const Conv& c, const Tensor& x, std::size_t stride = 1, std::size_t dilation = 1) const;
    Tensor res_stack(const Tensor& x, std::size_t first_conv, bool reversed) const;
    Tensor encoder(const Tensor& x) const;
    Tensor decoder(const Tensor& q) const;

    // Normalized, mirrored-as-needed frames of x laid out as [1 x D x T'].
    Tensor prepare(const MotionSequence& x, std::size_t frames) const;
    bool mirrors(Modality m) const;

    VaeConfig config_;
    Normalizer normalizer_;
    std::vector<Conv> convs_;
    std::vector<std::string> names_;
    std::optional<quant::Codebook> codebook_;
    // Index layout of convs_.
    std::size_t enc_in_ = 0, enc_out_ = 0, dec_in_ = 0, dec_out_ = 0;
    std::vector<std::size_t> enc_down_, dec_up_, enc_res_, dec_res_;
    std::size_t dec_mid_ = 0;
};

// Reversible pre-processing shared by tokenize and the CLI: mirrors a left-hand
// sequence into the right-hand frame.
MotionSequence to_canonical_hand(const MotionSequence& x);

}  // namespace m3t::vae
