#include "m3t/motionvae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "m3t/bodymodel.hpp"
#include "m3t/errors.hpp"
#include "m3t/ops.hpp"

namespace m3t::vae {

using nlohmann::json;

std::string_view quantizer_name(QuantizerKind k) { return k == QuantizerKind::fsq ? "fsq" : "vq"; }

namespace {

QuantizerKind parse_quantizer(const std::string& s) {
    if (s == "fsq") return QuantizerKind::fsq;
    if (s == "vq") return QuantizerKind::vq;
    throw ParseError("unknown quantizer '" + s + "'");
}

VaeConfig base_config(Modality m, QuantizerKind kind) {
    VaeConfig c;
    c.modality = m;
    c.input_dim = modality_dim(m);
    c.quantizer = kind;
    c.levels = quant::LevelSpec::for_modality(m);
    c.latent_dim = c.levels.dims();
    if (kind == QuantizerKind::vq) c.codebook_size = c.levels.codebook_size();
    return c;
}

// [D x T] channel-major copy of frames [start, start+len) of a T x D sequence.
void append_channel_major(std::vector<Real>& out, std::span<const Real> frames, std::size_t dim, std::size_t start,
                          std::size_t len) {
    for (std::size_t c = 0; c < dim; ++c)
        for (std::size_t t = 0; t < len; ++t) out.push_back(frames[(start + t) * dim + c]);
}

}  // namespace

std::size_t VaeConfig::codebook_entries() const {
    return quantizer == QuantizerKind::fsq ? levels.codebook_size() : codebook_size;
}

VaeConfig VaeConfig::desk(Modality m, QuantizerKind kind) { return base_config(m, kind); }

VaeConfig VaeConfig::full(Modality m, QuantizerKind kind) {
    auto c = base_config(m, kind);
    c.width = 1024;
    c.n_res_blocks = 6;
    return c;
}

void VaeConfig::validate() const {
    if (input_dim != modality_dim(modality))
        throw ModelError("input dimension " + std::to_string(input_dim) + " does not match modality " +
                         std::string(modality_name(modality)));
    if (width == 0) throw ModelError("width must be positive");
    if (dilation_growth == 0) throw ModelError("dilation growth must be positive");
    if (downsample_stages > 16) throw ModelError("too many downsampling stages");
    if (latent_dim == 0) throw ModelError("latent dimension must be positive");
    if (quantizer == QuantizerKind::fsq) {
        try {
            levels.validate();
        } catch (const Error& e) {
            throw ModelError(std::string("fsq levels: ") + e.what());
        }
        if (levels.dims() != latent_dim)
            throw ModelError("latent dimension " + std::to_string(latent_dim) + " must equal the number of FSQ levels " +
                             std::to_string(levels.dims()));
    } else if (codebook_size == 0) {
        throw ModelError("vq codebook size must be positive");
    }
}

Normalizer Normalizer::identity(std::size_t dim) { return {std::vector<Real>(dim, 0.0), std::vector<Real>(dim, 1.0)}; }

Normalizer Normalizer::fit(std::span<const MotionSequence> data) {
    if (data.empty()) throw UsageError("cannot fit a normalizer on an empty dataset");
    const std::size_t dim = data[0].dim;
    std::vector<Real> sum(dim, 0.0), sq(dim, 0.0);
    std::size_t count = 0;
    for (const auto& s : data) {
        if (s.dim != dim) throw DimensionError("normalizer data mixes dimensions");
        for (std::size_t t = 0; t < s.frames; ++t)
            for (std::size_t c = 0; c < dim; ++c) sum[c] += s.data[t * dim + c];
        count += s.frames;
    }
    if (count == 0) throw UsageError("cannot fit a normalizer on zero frames");
    Normalizer n;
    n.mean.resize(dim);
    n.stddev.resize(dim);
    for (std::size_t c = 0; c < dim; ++c) n.mean[c] = sum[c] / static_cast<Real>(count);
    for (const auto& s : data)
        for (std::size_t t = 0; t < s.frames; ++t)
            for (std::size_t c = 0; c < dim; ++c) {
                const Real d = s.data[t * dim + c] - n.mean[c];
                sq[c] += d * d;
            }
    for (std::size_t c = 0; c < dim; ++c) {
        const Real sd = std::sqrt(sq[c] / static_cast<Real>(count));
        n.stddev[c] = sd > 1e-12 ? sd : 1.0;
    }
    return n;
}

MotionSequence to_canonical_hand(const MotionSequence& x) {
    if (x.modality != Modality::left_hand) return x;
    MotionSequence out = x;
    out.modality = Modality::right_hand;
    out.data = body::mirror_hand_sequence(x.data, x.frames);
    return out;
}

MotionVae::MotionVae(VaeConfig config, std::uint64_t seed) : config_(std::move(config)) {
    config_.validate();
    normalizer_ = Normalizer::identity(config_.input_dim);
    std::mt19937_64 rng(seed);
    const std::size_t W = config_.width, D = config_.input_dim, d = config_.latent_dim;

    auto res_block = [&](const std::string& prefix, std::vector<std::size_t>& index) {
        for (std::size_t r = 0; r < config_.n_res_blocks; ++r) {
            index.push_back(convs_.size());
            add_conv(prefix + ".res" + std::to_string(r) + ".conv", W, W, 3, rng);
            add_conv(prefix + ".res" + std::to_string(r) + ".proj", W, W, 1, rng);
        }
    };

    enc_in_ = convs_.size();
    add_conv("encoder.in", D, W, 3, rng);
    for (std::size_t s = 0; s < config_.downsample_stages; ++s) {
        const std::string p = "encoder.stage" + std::to_string(s);
        enc_down_.push_back(convs_.size());
        add_conv(p + ".down", W, W, 3, rng);
        res_block(p, enc_res_);
    }
    enc_out_ = convs_.size();
    add_conv("encoder.out", W, d, 3, rng);

    dec_in_ = convs_.size();
    add_conv("decoder.in", d, W, 3, rng);
    for (std::size_t s = 0; s < config_.downsample_stages; ++s) {
        const std::string p = "decoder.stage" + std::to_string(s);
        res_block(p, dec_res_);
        dec_up_.push_back(convs_.size());
        add_conv(p + ".up", W, W, 3, rng);
    }
    dec_mid_ = convs_.size();
    add_conv("decoder.mid", W, W, 3, rng);
    dec_out_ = convs_.size();
    add_conv("decoder.out", W, D, 3, rng);

    if (config_.quantizer == QuantizerKind::vq) {
        codebook_ = quant::Codebook::uniform_init(config_.codebook_size, d, rng());
        names_.push_back("codebook");
    }
}

MotionVae::Conv& MotionVae::add_conv(const std::string& name, std::size_t in, std::size_t out, std::size_t k,
                                     std::mt19937_64& rng) {
    // Uniform(+-1/sqrt(fan_in)) for weights and biases.
    const Real bound = 1.0 / std::sqrt(static_cast<Real>(in * k));
    std::uniform_real_distribution<Real> dist(-bound, bound);
    std::vector<Real> w(out * in * k), b(out);
    for (auto& v : w) v = dist(rng);
    for (auto& v : b) v = dist(rng);
    convs_.push_back({Tensor::from({out, in, k}, std::move(w), true), Tensor::from({out}, std::move(b), true)});
    names_.push_back(name + ".weight");
    names_.push_back(name + ".bias");
    return convs_.back();
}

std::vector<Tensor> MotionVae::parameters() const {
    std::vector<Tensor> p;
    for (const auto& c : convs_) {
        p.push_back(c.weight);
        p.push_back(c.bias);
    }
    if (codebook_) p.push_back(codebook_->entries);
    return p;
}

std::size_t MotionVae::parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : parameters()) n += t.numel();
    return n;
}

void MotionVae::zero_initialize() {
    for (auto& t : parameters())
        for (auto& v : t.mutable_data()) v = 0.0;
}

void MotionVae::set_normalizer(Normalizer n) {
    if (n.mean.size() != config_.input_dim || n.stddev.size() != config_.input_dim)
        throw DimensionError("normalizer dimension does not match the model input");
    for (Real s : n.stddev)
        if (!(s > 0) || !std::isfinite(s)) throw DataError("normalizer spread must be positive and finite");
    normalizer_ = std::move(n);
}

Tensor MotionVae::apply(const Conv& c, const Tensor& x, std::size_t stride, std::size_t dilation) const {
    return conv1d(x, c.weight, &c.bias, stride, dilation);
}

// Residual unit: x + proj(relu(conv_dil(relu(x)))), dilations growing by the
// configured factor (reversed in the decoder).
Tensor MotionVae::res_stack(const Tensor& x, std::size_t first_conv, bool reversed) const {
    Tensor h = x;
    const std::size_t n = config_.n_res_blocks;
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t level = reversed ? n - 1 - r : r;
        std::size_t dilation = 1;
        for (std::size_t i = 0; i < level; ++i) dilation *= config_.dilation_growth;
        const Conv& conv = convs_[first_conv + 2 * r];
        const Conv& proj = convs_[first_conv + 2 * r + 1];
        h = add(h, apply(proj, relu(apply(conv, relu(h), 1, dilation))));
    }
    return h;
}

Tensor MotionVae::encoder(const Tensor& x) const {
    Tensor h = relu(apply(convs_[enc_in_], x));
    for (std::size_t s = 0; s < config_.downsample_stages; ++s) {
        h = apply(convs_[enc_down_[s]], h, 2);
        if (config_.n_res_blocks) h = res_stack(h, enc_res_[s * config_.n_res_blocks], false);
    }
    return apply(convs_[enc_out_], h);
}

Tensor MotionVae::decoder(const Tensor& q) const {
    Tensor h = relu(apply(convs_[dec_in_], q));
    for (std::size_t s = 0; s < config_.downsample_stages; ++s) {
        if (config_.n_res_blocks) h = res_stack(h, dec_res_[s * config_.n_res_blocks], true);
        h = apply(convs_[dec_up_[s]], upsample_nearest(h, 2));
    }
    h = relu(apply(convs_[dec_mid_], h));
    return apply(convs_[dec_out_], h);
}

ForwardResult MotionVae::forward(const Tensor& x, const std::vector<Real>* frozen_offset) const {
    const std::size_t w = config_.window();
    if (x.rank() != 3 || x.dim(1) != config_.input_dim)
        throw DimensionError("vae input must be [B x " + std::to_string(config_.input_dim) + " x T], got " +
                             shape_str(x.shape()));
    if (x.dim(2) % w != 0)
        throw UsageError("sequence length " + std::to_string(x.dim(2)) + " is not a multiple of " + std::to_string(w));

    ForwardResult r;
    r.z = encoder(x);
    const std::size_t B = x.dim(0), d = config_.latent_dim, n = r.z.dim(2);
    Real aux_weight = 0.0;
    Tensor aux;
    if (config_.quantizer == QuantizerKind::fsq) {
        const auto& spec = config_.levels;
        Tensor bounded = fsq_bound(r.z, spec, 1);
        Tensor q;
        if (frozen_offset) {
            if (frozen_offset->size() != bounded.numel()) throw DimensionError("frozen offset size mismatch");
            q = add(bounded, Tensor::from(bounded.shape(), *frozen_offset));
        } else {
            q = fsq_quantize_tensor(r.z, spec, 1);
        }
        auto qv = q.data(), bv = bounded.data();
        r.quantization_offset.resize(qv.size());
        for (std::size_t i = 0; i < qv.size(); ++i) r.quantization_offset[i] = qv[i] - bv[i];
        if (!frozen_offset) {
            auto digits = quant::fsq_digits_tensor(q, spec, 1);
            r.indices.resize(B * n);
            for (std::size_t i = 0; i < B * n; ++i)
                r.indices[i] = quant::digits_to_index(std::span<const int>(digits).subspan(i * d, d), spec);
        }
        r.decoder_input = mul(q, Tensor::from({1, d, 1}, quant::fsq_decoder_scale(spec)));
    } else {
        if (frozen_offset) throw UsageError("frozen offsets apply to the FSQ bottleneck only");
        quant::Codebook cb = *codebook_;  // shares the entries tensor; usage counts stay local
        Tensor rows = reshape(transpose(r.z), {B * n, d});
        auto vq = quant::vq_quantize_tensor(rows, cb);
        r.indices = vq.indices;
        auto losses = quant::vq_losses(rows, vq.entries);
        aux = add(losses.codebook_loss, scale(losses.commitment_loss, quant::kCommitmentWeight));
        aux_weight = 1.0 / static_cast<Real>(rows.numel());
        r.decoder_input = transpose(reshape(vq.quantized, {B, n, d}));
    }
    r.recon = decoder(r.decoder_input);
    r.recon_loss = mse(r.recon, x);
    r.loss = aux.defined() ? add(r.recon_loss, scale(aux, aux_weight)) : r.recon_loss;
    return r;
}

bool MotionVae::mirrors(Modality m) const {
    if (m == config_.modality) return false;
    if (is_hand(m) && is_hand(config_.modality)) return true;
    throw UsageError(std::string("a ") + std::string(modality_name(config_.modality)) + " model cannot take " +
                     std::string(modality_name(m)) + " motion");
}

Tensor MotionVae::prepare(const MotionSequence& x, std::size_t frames) const {
    x.validate();
    const bool flip = mirrors(x.modality);
    const std::size_t D = config_.input_dim;
    std::vector<Real> src = flip ? body::mirror_hand_sequence(x.data, x.frames) : x.data;
    std::vector<Real> buf;
    buf.reserve(D * frames);
    for (std::size_t c = 0; c < D; ++c)
        for (std::size_t t = 0; t < frames; ++t) {
            const std::size_t tt = std::min(t, x.frames - 1);  // edge replication past the end
            buf.push_back((src[tt * D + c] - normalizer_.mean[c]) / normalizer_.stddev[c]);
        }
    return Tensor::from({1, D, frames}, std::move(buf));
}

std::vector<Real> MotionVae::encode(const MotionSequence& x) const {
    const std::size_t w = config_.window();
    if (x.frames < w)
        throw UsageError("sequence of " + std::to_string(x.frames) + " frames is shorter than one window of " +
                         std::to_string(w));
    const std::size_t frames = x.frames / w * w;
    Tensor z = encoder(prepare(x, frames));
    return transpose(reshape(z, {z.dim(1), z.dim(2)})).to_vector();
}

quant::TokenStream MotionVae::tokenize(const MotionSequence& x) const {
    auto z = encode(x);
    const std::size_t d = config_.latent_dim, n = z.size() / d;
    quant::TokenStream s;
    s.modality = x.modality;
    s.indices.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::span<const Real> frame(z.data() + i * d, d);
        if (config_.quantizer == QuantizerKind::fsq) {
            auto f = quant::fsq_quantize(frame, config_.levels);
            s.indices[i] = quant::digits_to_index(f.digits, config_.levels);
        } else {
            s.indices[i] = quant::vq_nearest(frame, codebook_->entries);
        }
    }
    return s;
}

MotionSequence MotionVae::detokenize(const quant::TokenStream& stream, Real fps) const {
    const bool flip = mirrors(stream.modality);
    const std::size_t d = config_.latent_dim, n = stream.indices.size(), C = config_.codebook_entries();
    if (n == 0) throw UsageError("cannot decode an empty token stream");
    std::vector<Real> latent(d * n);  // [d x n]
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t idx = stream.indices[i];
        if (idx >= C)
            throw DataError("token index " + std::to_string(idx) + " at position " + std::to_string(i) +
                            " is outside the codebook of " + std::to_string(C));
        if (config_.quantizer == QuantizerKind::fsq) {
            auto digits = quant::index_to_digits(idx, config_.levels);
            auto levels = quant::fsq_levels_of(digits, config_.levels);
            auto scale_v = quant::fsq_decoder_scale(config_.levels);
            for (std::size_t k = 0; k < d; ++k) latent[k * n + i] = levels[k] * scale_v[k];
        } else {
            auto e = codebook_->entries.data();
            for (std::size_t k = 0; k < d; ++k) latent[k * n + i] = e[idx * d + k];
        }
    }
    Tensor recon = decoder(Tensor::from({1, d, n}, std::move(latent)));
    const std::size_t D = config_.input_dim, T = recon.dim(2);
    auto rv = recon.data();
    MotionSequence out;
    out.modality = stream.modality;
    out.fps = fps;
    out.frames = T;
    out.dim = D;
    out.data.resize(T * D);
    for (std::size_t c = 0; c < D; ++c)
        for (std::size_t t = 0; t < T; ++t)
            out.data[t * D + c] = rv[c * T + t] * normalizer_.stddev[c] + normalizer_.mean[c];
    if (flip) out.data = body::mirror_hand_sequence(out.data, T);
    return out;
}

MotionSequence MotionVae::reconstruct(const MotionSequence& x) const {
    const std::size_t w = config_.window();
    if (x.frames == 0) throw UsageError("cannot reconstruct an empty sequence");
    const std::size_t padded = (x.frames + w - 1) / w * w;
    auto r = forward(prepare(x, padded));
    const std::size_t D = config_.input_dim;
    auto rv = r.recon.data();
    MotionSequence out;
    out.modality = x.modality;
    out.fps = x.fps;
    out.frames = x.frames;
    out.dim = D;
    out.data.resize(x.frames * D);
    for (std::size_t c = 0; c < D; ++c)
        for (std::size_t t = 0; t < x.frames; ++t)
            out.data[t * D + c] = rv[c * padded + t] * normalizer_.stddev[c] + normalizer_.mean[c];
    if (mirrors(x.modality)) out.data = body::mirror_hand_sequence(out.data, x.frames);
    return out;
}

Real MotionVae::reconstruction_error(std::span<const MotionSequence> data) const {
    if (data.empty()) throw UsageError("reconstruction error needs at least one sequence");
    const std::size_t w = config_.window();
    Real total = 0.0;
    std::size_t count = 0;
    for (const auto& x : data) {
        if (x.frames < w) throw UsageError("sequence shorter than one window");
        const std::size_t frames = x.frames / w * w;
        auto r = forward(prepare(x, frames));
        total += r.recon_loss.item() * static_cast<Real>(frames);
        count += frames;
    }
    return total / static_cast<Real>(count);
}

TrainReport MotionVae::train(std::span<const MotionSequence> data, const TrainOptions& options) {
    TrainReport report;
    if (options.epochs == 0) return report;
    if (data.empty()) throw UsageError("training needs a non-empty dataset");
    if (options.batch_size == 0) throw UsageError("batch size must be positive");
    const std::size_t w = config_.window(), D = config_.input_dim;

    std::vector<MotionSequence> canon;
    canon.reserve(data.size());
    std::size_t min_frames = data[0].frames;
    for (std::size_t i = 0; i < data.size(); ++i) {
        data[i].validate();
        if (data[i].frames < w)
            throw UsageError("sequence " + std::to_string(i) + " is shorter than one window of " + std::to_string(w));
        canon.push_back(mirrors(data[i].modality) ? to_canonical_hand(data[i]) : data[i]);
        canon.back().modality = config_.modality;
        min_frames = std::min(min_frames, data[i].frames);
    }
    const std::size_t crop = std::max(w, std::min(options.crop_frames, min_frames) / w * w);

    std::mt19937_64 rng(options.seed);
    std::vector<std::size_t> order(canon.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t n_val = static_cast<std::size_t>(std::floor(options.val_fraction * static_cast<Real>(canon.size())));
    if (n_val >= canon.size()) n_val = canon.size() - 1;
    std::vector<std::size_t> val_ids(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> train_ids(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());

    if (options.fit_normalizer) {
        std::vector<MotionSequence> fit_set;
        for (auto i : train_ids) fit_set.push_back(canon[i]);
        normalizer_ = Normalizer::fit(fit_set);
    }
    // Normalized frames, T x D each.
    std::vector<std::vector<Real>> norm(canon.size());
    for (std::size_t i = 0; i < canon.size(); ++i) {
        norm[i] = canon[i].data;
        for (std::size_t t = 0; t < canon[i].frames; ++t)
            for (std::size_t c = 0; c < D; ++c)
                norm[i][t * D + c] = (norm[i][t * D + c] - normalizer_.mean[c]) / normalizer_.stddev[c];
    }

    CosineSchedule sched = options.schedule;
    sched.total_epochs = options.epochs;
    sched.warmup_epochs = std::clamp<std::size_t>(sched.warmup_epochs, 1, std::max<std::size_t>(1, options.epochs - 1));
    auto params = parameters();
    Adam adam(params, sched.base_lr);

    auto batch_tensor = [&](const std::vector<std::size_t>& ids, const std::vector<std::size_t>& starts) {
        std::vector<Real> buf;
        buf.reserve(ids.size() * D * crop);
        for (std::size_t b = 0; b < ids.size(); ++b) append_channel_major(buf, norm[ids[b]], D, starts[b], crop);
        return Tensor::from({ids.size(), D, crop}, std::move(buf));
    };

    std::vector<std::vector<Real>> best;
    Real best_val = std::numeric_limits<Real>::infinity();
    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        adam.set_lr(cosine_lr(sched, epoch));
        std::shuffle(train_ids.begin(), train_ids.end(), rng);
        Real total = 0.0;
        for (std::size_t b0 = 0; b0 < train_ids.size(); b0 += options.batch_size) {
            const std::size_t bn = std::min(options.batch_size, train_ids.size() - b0);
            std::vector<std::size_t> ids(train_ids.begin() + static_cast<std::ptrdiff_t>(b0),
                                         train_ids.begin() + static_cast<std::ptrdiff_t>(b0 + bn));
            std::vector<std::size_t> starts(bn);
            for (std::size_t b = 0; b < bn; ++b) {
                std::uniform_int_distribution<std::size_t> pick(0, canon[ids[b]].frames - crop);
                starts[b] = pick(rng);
            }
            auto r = forward(batch_tensor(ids, starts));
            const Real lv = r.loss.item();
            if (!std::isfinite(lv)) throw NumericError("training loss became non-finite at epoch " + std::to_string(epoch + 1));
            adam.zero_grad();
            r.loss.backward();
            adam.step();
            total += r.recon_loss.item() * static_cast<Real>(bn);
        }
        const Real train_loss = total / static_cast<Real>(train_ids.size());
        if (!std::isfinite(train_loss))
            throw NumericError("training loss became non-finite at epoch " + std::to_string(epoch + 1));
        report.train_loss.push_back(train_loss);

        if (!val_ids.empty()) {
            Real vtotal = 0.0;
            for (std::size_t b0 = 0; b0 < val_ids.size(); b0 += options.batch_size) {
                const std::size_t bn = std::min(options.batch_size, val_ids.size() - b0);
                std::vector<std::size_t> ids(val_ids.begin() + static_cast<std::ptrdiff_t>(b0),
                                             val_ids.begin() + static_cast<std::ptrdiff_t>(b0 + bn));
                auto r = forward(batch_tensor(ids, std::vector<std::size_t>(bn, 0)));
                vtotal += r.recon_loss.item() * static_cast<Real>(bn);
            }
            const Real vl = vtotal / static_cast<Real>(val_ids.size());
            if (!std::isfinite(vl))
                throw NumericError("validation loss became non-finite at epoch " + std::to_string(epoch + 1));
            report.val_loss.push_back(vl);
            if (vl < best_val) {
                best_val = vl;
                report.best_epoch = epoch;
                best.clear();
                for (const auto& p : params) best.push_back(p.to_vector());
            }
        } else {
            report.best_epoch = epoch;
        }
    }
    if (!best.empty())
        for (std::size_t i = 0; i < params.size(); ++i) std::copy(best[i].begin(), best[i].end(), params[i].mutable_data().begin());
    for (auto& p : params) p.zero_grad();
    return report;
}

// Checkpoint: {"format": "m3t-vae", "version": 1, "config", "normalizer",
// "parameters": {name: {"shape", "data"}}}.
std::string MotionVae::to_json() const {
    json cfg = {{"modality", modality_name(config_.modality)},
                {"input_dim", config_.input_dim},
                {"width", config_.width},
                {"n_res_blocks", config_.n_res_blocks},
                {"dilation_growth", config_.dilation_growth},
                {"downsample_stages", config_.downsample_stages},
                {"latent_dim", config_.latent_dim},
                {"quantizer", quantizer_name(config_.quantizer)},
                {"levels", config_.levels.levels},
                {"codebook_size", config_.codebook_size}};
    json params = json::object();
    auto ps = parameters();
    for (std::size_t i = 0; i < ps.size(); ++i)
        params[names_[i]] = {{"shape", ps[i].shape()}, {"data", ps[i].to_vector()}};
    json j = {{"format", "m3t-vae"},
              {"version", 1},
              {"config", cfg},
              {"normalizer", {{"mean", normalizer_.mean}, {"stddev", normalizer_.stddev}}},
              {"parameters", params}};
    return j.dump();
}

MotionVae MotionVae::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("vae checkpoint is not valid JSON: ") + e.what());
    }
    try {
        if (j.value("format", "") != "m3t-vae") throw LoadError("not an m3t-vae checkpoint");
        if (j.at("version").get<int>() != 1) throw LoadError("unsupported vae checkpoint version");
        const auto& c = j.at("config");
        VaeConfig cfg;
        cfg.modality = parse_modality(c.at("modality").get<std::string>());
        cfg.input_dim = c.at("input_dim").get<std::size_t>();
        cfg.width = c.at("width").get<std::size_t>();
        cfg.n_res_blocks = c.at("n_res_blocks").get<std::size_t>();
        cfg.dilation_growth = c.at("dilation_growth").get<std::size_t>();
        cfg.downsample_stages = c.at("downsample_stages").get<std::size_t>();
        cfg.latent_dim = c.at("latent_dim").get<std::size_t>();
        cfg.quantizer = parse_quantizer(c.at("quantizer").get<std::string>());
        cfg.levels.levels = c.at("levels").get<std::vector<int>>();
        cfg.codebook_size = c.at("codebook_size").get<std::size_t>();
        try {
            cfg.validate();
        } catch (const ModelError& e) {
            throw LoadError(std::string("invalid vae config: ") + e.what());
        }
        MotionVae vae(cfg, 0);
        Normalizer n{j.at("normalizer").at("mean").get<std::vector<Real>>(),
                     j.at("normalizer").at("stddev").get<std::vector<Real>>()};
        try {
            vae.set_normalizer(std::move(n));
        } catch (const Error& e) {
            throw LoadError(std::string("invalid normalizer: ") + e.what());
        }
        const auto& params = j.at("parameters");
        auto ps = vae.parameters();
        if (params.size() != ps.size())
            throw LoadError("checkpoint holds " + std::to_string(params.size()) + " parameter arrays, expected " +
                            std::to_string(ps.size()));
        for (std::size_t i = 0; i < ps.size(); ++i) {
            const auto& name = vae.names_[i];
            if (!params.contains(name)) throw LoadError("checkpoint lacks parameter '" + name + "'");
            const auto& p = params.at(name);
            if (p.at("shape").get<Shape>() != ps[i].shape())
                throw LoadError("parameter '" + name + "' has shape " + shape_str(p.at("shape").get<Shape>()) +
                                ", expected " + shape_str(ps[i].shape()));
            auto data = p.at("data").get<std::vector<Real>>();
            if (data.size() != ps[i].numel()) throw LoadError("parameter '" + name + "' has the wrong element count");
            for (Real v : data)
                if (!std::isfinite(v)) throw LoadError("parameter '" + name + "' holds non-finite values");
            std::copy(data.begin(), data.end(), ps[i].mutable_data().begin());
        }
        return vae;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed vae checkpoint: ") + e.what());
    }
}

void MotionVae::save(const std::string& path) const { write_file(path, to_json()); }

MotionVae MotionVae::load(const std::string& path) { return from_json(read_file(path)); }

}  // namespace m3t::vae
