#pragma once

// Multi-modal vocabulary, token documents, embedding fusion, the greedy
// decoding harness and recognition-side preprocessing.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "m3t/modality.hpp"
#include "m3t/quantizers.hpp"
#include "m3t/tensor.hpp"

namespace m3t::tokens {

// Ids are contiguous from 0: text words, language/modality tags (language
// major, modalities in body, left, right, face order), motion tokens per
// modality in the same order, then <EOS>, <PAD>, <BOS>.
class Vocabulary {
public:
    std::size_t size() const { return words_.size(); }
    const std::string& word(std::size_t id) const;
    std::size_t id(const std::string& word) const;  // UsageError if absent
    std::optional<std::size_t> find(const std::string& word) const;

    std::size_t text_count() const { return text_count_; }
    const std::vector<std::string>& languages() const { return languages_; }
    std::size_t tag_id(const std::string& language, Modality m) const;
    std::size_t codebook_size(Modality m) const { return motion_size_[static_cast<std::size_t>(m)]; }
    // Token index in [0, C_m) -> vocabulary id.
    std::size_t motion_id(Modality m, std::size_t index) const;
    // Vocabulary id -> token index, if the id is one of m's motion tokens.
    std::optional<std::size_t> motion_index(Modality m, std::size_t id) const;

    std::size_t eos() const { return specials_; }
    std::size_t pad() const { return specials_ + 1; }
    std::size_t bos() const { return specials_ + 2; }

    friend Vocabulary build_vocabulary(const std::vector<std::string>&, const std::vector<std::string>&,
                                       const std::array<std::size_t, 4>&);

private:
    std::vector<std::string> words_;
    std::unordered_map<std::string, std::size_t> ids_;
    std::vector<std::string> languages_;
    std::size_t text_count_ = 0;
    std::size_t tags_start_ = 0;
    std::array<std::size_t, 4> motion_start_{};
    std::array<std::size_t, 4> motion_size_{};
    std::size_t specials_ = 0;
};

std::string motion_word(Modality m, std::size_t index);     // "<f_216>" for index 215
std::string tag_word(const std::string& language, Modality m);  // "<ASL_LH>"

// Throws DataError on duplicate or reserved-looking text words, UsageError on
// empty codebooks.
Vocabulary build_vocabulary(const std::vector<std::string>& text_words, const std::vector<std::string>& languages,
                            const std::array<std::size_t, 4>& codebook_sizes);
Vocabulary build_vocabulary(const std::vector<std::string>& text_words, const std::vector<std::string>& languages,
                            const std::array<quant::LevelSpec, 4>& level_specs);
// Preset codebook sizes: 100 / 180 / 180 / 216.
Vocabulary default_vocabulary(const std::vector<std::string>& languages = {"ASL", "DGS", "LSF"});

// One token id per modality for a single time step.
using MultiModalStep = std::array<std::size_t, 4>;

struct TokenDocument {
    std::vector<MultiModalStep> steps;
    std::optional<Modality> eos;  // modality whose EOS ended decoding
};

// Header "m3t-tokens v1 steps=N", one line of four words per step, then an
// optional "<EOS:modality>" trailer. Slots may hold a modality's own tokens,
// <EOS> or <PAD>.
std::string serialize_streams(const TokenDocument& doc, const Vocabulary& vocab);
TokenDocument parse_streams(const std::string& text, const Vocabulary& vocab);

// Per-modality streams <-> aligned steps. Missing modalities become <PAD>;
// present streams must share a length.
TokenDocument steps_from_streams(const std::array<std::optional<quant::TokenStream>, 4>& streams,
                                 const Vocabulary& vocab);
// Motion-token indices of one modality, stopping at the first <EOS> and
// skipping <PAD>.
quant::TokenStream stream_from_steps(const TokenDocument& doc, Modality m, const Vocabulary& vocab,
                                     const std::string& language = "");

// Equal-weight average of the four modality embeddings. Sorted pairwise
// summation makes the result exactly permutation invariant and exact on
// identical inputs.
std::vector<Real> fuse_embeddings(std::span<const std::vector<Real>> step_embeddings);

// Seeded, untrained table: entry i ~ N(0, 1/d)^d.
class EmbeddingTable {
public:
    EmbeddingTable(std::size_t vocab_size, std::size_t dim, std::uint64_t seed);
    std::span<const Real> operator[](std::size_t id) const;
    std::size_t dim() const { return dim_; }
    std::size_t size() const { return rows_; }

private:
    std::size_t rows_, dim_;
    std::vector<Real> data_;
};

// The seam where a sequence model plugs in: given the fused history (prompt
// tag embeddings first) return per-modality logits of length C_m + 1, the
// last entry scoring <EOS>.
class Predictor {
public:
    virtual ~Predictor() = default;
    virtual std::array<std::vector<Real>, 4> next_logits(const std::vector<std::vector<Real>>& history,
                                                         std::span<const std::size_t> prompt_tags) = 0;
};

// Greedy argmax per head (ties -> lowest index). Stops after the first step
// in which any head picks <EOS>, or after max_steps. The EOS-bearing step is
// kept. Throws ContractError on malformed logits.
TokenDocument greedy_decode(Predictor& predictor, const Vocabulary& vocab, std::span<const std::size_t> prompt_tags,
                            std::size_t max_steps, const EmbeddingTable& embeddings);
// Tags for one language in modality order.
std::vector<std::size_t> prompt_tags_for(const Vocabulary& vocab, const std::string& language);

struct TrimThresholds {
    Real height;
    Real displacement;
    static TrimThresholds from_torso(Real torso_height) { return {0.05 * torso_height, 0.10 * torso_height}; }
};

struct SigningWindow {
    std::size_t start = 0;
    std::size_t end = 0;  // exclusive
    bool empty = true;
};

// wrists: T x 2 x 3 (left, right), rest: 2 x 3. A frame is active when some
// wrist rises more than `height` above its rest height (y axis) or moves
// more than `displacement` from its rest position. The window spans the first
// to the last active frame.
SigningWindow trim_signing_window(std::span<const Real> wrists, std::size_t frames, std::span<const Real> rest,
                                  const TrimThresholds& thresholds);

using FeatureSequence = std::vector<std::vector<Real>>;
// Time-major interleave: b_0, lh_0, rh_0, f_0, b_1, ...
FeatureSequence interleave_features(const std::array<FeatureSequence, 4>& per_modality);
std::array<FeatureSequence, 4> deinterleave_features(const FeatureSequence& interleaved);

}  // namespace m3t::tokens
