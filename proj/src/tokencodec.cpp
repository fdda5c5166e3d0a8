#include "m3t/tokencodec.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "m3t/errors.hpp"

namespace m3t::tokens {

namespace {

std::size_t slot(Modality m) { return static_cast<std::size_t>(m); }

}  // namespace

std::string motion_word(Modality m, std::size_t index) {
    return "<" + std::string(modality_prefix(m)) + "_" + std::to_string(index + 1) + ">";
}

std::string tag_word(const std::string& language, Modality m) {
    return "<" + language + "_" + std::string(modality_tag_suffix(m)) + ">";
}

const std::string& Vocabulary::word(std::size_t id) const {
    if (id >= words_.size()) throw UsageError("token id " + std::to_string(id) + " outside the vocabulary");
    return words_[id];
}

std::optional<std::size_t> Vocabulary::find(const std::string& word) const {
    auto it = ids_.find(word);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
}

std::size_t Vocabulary::id(const std::string& word) const {
    auto found = find(word);
    if (!found) throw UsageError("unknown token '" + word + "'");
    return *found;
}

std::size_t Vocabulary::tag_id(const std::string& language, Modality m) const {
    auto it = std::find(languages_.begin(), languages_.end(), language);
    if (it == languages_.end()) throw UsageError("unknown language '" + language + "'");
    return tags_start_ + static_cast<std::size_t>(it - languages_.begin()) * 4 + slot(m);
}

std::size_t Vocabulary::motion_id(Modality m, std::size_t index) const {
    if (index >= motion_size_[slot(m)])
        throw DataError("token index " + std::to_string(index) + " outside the " + std::string(modality_name(m)) +
                        " codebook of size " + std::to_string(motion_size_[slot(m)]));
    return motion_start_[slot(m)] + index;
}

std::optional<std::size_t> Vocabulary::motion_index(Modality m, std::size_t id) const {
    std::size_t s = motion_start_[slot(m)];
    if (id < s || id >= s + motion_size_[slot(m)]) return std::nullopt;
    return id - s;
}

Vocabulary build_vocabulary(const std::vector<std::string>& text_words, const std::vector<std::string>& languages,
                            const std::array<std::size_t, 4>& codebook_sizes) {
    Vocabulary v;
    auto add = [&](const std::string& w) {
        if (!v.ids_.emplace(w, v.words_.size()).second) throw DataError("duplicate vocabulary word '" + w + "'");
        v.words_.push_back(w);
    };
    for (const auto& w : text_words) {
        if (w.empty()) throw DataError("empty text word");
        add(w);
    }
    v.text_count_ = text_words.size();
    v.tags_start_ = v.words_.size();
    for (const auto& lang : languages) {
        if (lang.empty() || lang.find_first_of("<>_ \t\n") != std::string::npos)
            throw DataError("bad language name '" + lang + "'");
        if (std::find(v.languages_.begin(), v.languages_.end(), lang) != v.languages_.end())
            throw DataError("duplicate language '" + lang + "'");
        v.languages_.push_back(lang);
        for (auto m : kModalities) add(tag_word(lang, m));
    }
    for (auto m : kModalities) {
        std::size_t C = codebook_sizes[slot(m)];
        if (C == 0) throw UsageError("empty codebook for " + std::string(modality_name(m)));
        v.motion_start_[slot(m)] = v.words_.size();
        v.motion_size_[slot(m)] = C;
        for (std::size_t i = 0; i < C; ++i) add(motion_word(m, i));
    }
    v.specials_ = v.words_.size();
    add("<EOS>");
    add("<PAD>");
    add("<BOS>");
    return v;
}

Vocabulary build_vocabulary(const std::vector<std::string>& text_words, const std::vector<std::string>& languages,
                            const std::array<quant::LevelSpec, 4>& level_specs) {
    std::array<std::size_t, 4> sizes{};
    for (std::size_t i = 0; i < 4; ++i) sizes[i] = level_specs[i].codebook_size();
    return build_vocabulary(text_words, languages, sizes);
}

Vocabulary default_vocabulary(const std::vector<std::string>& languages) {
    std::array<quant::LevelSpec, 4> specs;
    for (auto m : kModalities) specs[slot(m)] = quant::LevelSpec::for_modality(m);
    return build_vocabulary({}, languages, specs);
}

// --- documents ---------------------------------------------------------------

namespace {

bool slot_accepts(const Vocabulary& vocab, Modality m, std::size_t id) {
    return id == vocab.eos() || id == vocab.pad() || vocab.motion_index(m, id).has_value();
}

}  // namespace

std::string serialize_streams(const TokenDocument& doc, const Vocabulary& vocab) {
    std::ostringstream out;
    out << "m3t-tokens v1 steps=" << doc.steps.size() << '\n';
    for (const auto& step : doc.steps) {
        for (auto m : kModalities) {
            std::size_t id = step[slot(m)];
            if (!slot_accepts(vocab, m, id))
                throw DataError("id " + std::to_string(id) + " is not a " + std::string(modality_name(m)) +
                                " token");
            out << (m == Modality::body ? "" : " ") << vocab.word(id);
        }
        out << '\n';
    }
    if (doc.eos) out << "<EOS:" << modality_name(*doc.eos) << ">\n";
    return out.str();
}

TokenDocument parse_streams(const std::string& text, const Vocabulary& vocab) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.find_first_not_of(" \t") != std::string::npos) return true;
        }
        return false;
    };
    if (!next_line()) throw ParseError("empty token document", 1);
    std::size_t n = 0;
    {
        std::istringstream h(line);
        std::string magic, version, steps, extra;
        h >> magic >> version >> steps;
        if (magic != "m3t-tokens" || version != "v1" || steps.rfind("steps=", 0) != 0 || (h >> extra))
            throw ParseError("expected header 'm3t-tokens v1 steps=N'", line_no);
        try {
            std::size_t used = 0;
            n = std::stoul(steps.substr(6), &used);
            if (used != steps.size() - 6) throw std::invalid_argument(steps);
        } catch (const std::exception&) {
            throw ParseError("bad step count '" + steps + "'", line_no);
        }
    }
    TokenDocument doc;
    doc.steps.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
        if (!next_line()) throw ParseError("document ends after " + std::to_string(s) + " of " +
                                               std::to_string(n) + " steps", line_no + 1);
        std::istringstream row(line);
        std::vector<std::string> words;
        for (std::string w; row >> w;) words.push_back(w);
        if (words.size() != 4) throw ParseError("expected 4 tokens per step, got " + std::to_string(words.size()), line_no);
        MultiModalStep step{};
        for (auto m : kModalities) {
            const auto& w = words[slot(m)];
            auto id = vocab.find(w);
            if (!id) throw ParseError("unknown token '" + w + "'", line_no);
            if (!slot_accepts(vocab, m, *id))
                throw ParseError("token '" + w + "' does not belong to the " + std::string(modality_name(m)) +
                                     " stream",
                                 line_no);
            step[slot(m)] = *id;
        }
        doc.steps.push_back(step);
    }
    if (next_line()) {
        std::string t = line.substr(line.find_first_not_of(" \t"));
        while (!t.empty() && (t.back() == ' ' || t.back() == '\t')) t.pop_back();
        if (t.rfind("<EOS:", 0) != 0 || t.back() != '>') throw ParseError("unexpected content after the last step", line_no);
        try {
            doc.eos = parse_modality(t.substr(5, t.size() - 6));
        } catch (const UsageError&) {
            throw ParseError("bad EOS trailer '" + t + "'", line_no);
        }
        if (next_line()) throw ParseError("unexpected content after the EOS trailer", line_no);
    }
    return doc;
}

TokenDocument steps_from_streams(const std::array<std::optional<quant::TokenStream>, 4>& streams,
                                 const Vocabulary& vocab) {
    std::optional<std::size_t> length;
    for (const auto& s : streams)
        if (s) {
            if (length && *length != s->indices.size()) throw UsageError("token streams differ in length");
            length = s->indices.size();
        }
    TokenDocument doc;
    if (!length) return doc;
    doc.steps.assign(*length, MultiModalStep{vocab.pad(), vocab.pad(), vocab.pad(), vocab.pad()});
    for (auto m : kModalities) {
        const auto& s = streams[slot(m)];
        if (!s) continue;
        if (s->modality != m) throw UsageError("stream in the " + std::string(modality_name(m)) + " slot is " +
                                               std::string(modality_name(s->modality)));
        for (std::size_t t = 0; t < *length; ++t) doc.steps[t][slot(m)] = vocab.motion_id(m, s->indices[t]);
    }
    return doc;
}

quant::TokenStream stream_from_steps(const TokenDocument& doc, Modality m, const Vocabulary& vocab,
                                     const std::string& language) {
    quant::TokenStream s{m, language, {}, false};
    for (const auto& step : doc.steps) {
        std::size_t id = step[slot(m)];
        if (id == vocab.eos()) {
            s.includes_eos = true;
            break;
        }
        if (id == vocab.pad()) continue;
        auto idx = vocab.motion_index(m, id);
        if (!idx) throw DataError("id " + std::to_string(id) + " is not a " + std::string(modality_name(m)) + " token");
        s.indices.push_back(*idx);
    }
    return s;
}

// --- fusion and decoding -----------------------------------------------------

std::vector<Real> fuse_embeddings(std::span<const std::vector<Real>> e) {
    if (e.size() != 4) throw UsageError("fusion expects one embedding per modality (4), got " + std::to_string(e.size()));
    const std::size_t d = e[0].size();
    for (const auto& v : e)
        if (v.size() != d) throw UsageError("modality embeddings differ in dimension");
    std::vector<Real> out(d);
    for (std::size_t i = 0; i < d; ++i) {
        std::array<Real, 4> x{e[0][i], e[1][i], e[2][i], e[3][i]};
        std::sort(x.begin(), x.end());
        out[i] = ((x[0] + x[1]) + (x[2] + x[3])) * 0.25;
    }
    return out;
}

EmbeddingTable::EmbeddingTable(std::size_t vocab_size, std::size_t dim, std::uint64_t seed)
    : rows_(vocab_size), dim_(dim), data_(vocab_size * dim) {
    if (dim == 0) throw UsageError("embedding dimension must be positive");
    std::mt19937_64 rng(seed);
    std::normal_distribution<Real> n(0.0, 1.0 / std::sqrt(static_cast<Real>(dim)));
    for (auto& x : data_) x = n(rng);
}

std::span<const Real> EmbeddingTable::operator[](std::size_t id) const {
    if (id >= rows_) throw UsageError("embedding id out of range");
    return std::span<const Real>(data_).subspan(id * dim_, dim_);
}

std::vector<std::size_t> prompt_tags_for(const Vocabulary& vocab, const std::string& language) {
    std::vector<std::size_t> tags;
    for (auto m : kModalities) tags.push_back(vocab.tag_id(language, m));
    return tags;
}

TokenDocument greedy_decode(Predictor& predictor, const Vocabulary& vocab, std::span<const std::size_t> prompt_tags,
                            std::size_t max_steps, const EmbeddingTable& embeddings) {
    if (max_steps < 1) throw UsageError("max_steps must be at least 1");
    if (embeddings.size() != vocab.size()) throw UsageError("embedding table does not match the vocabulary");
    std::vector<std::vector<Real>> history;
    for (auto tag : prompt_tags) {
        auto row = embeddings[tag];
        history.emplace_back(row.begin(), row.end());
    }

    TokenDocument doc;
    for (std::size_t u = 0; u < max_steps; ++u) {
        auto logits = predictor.next_logits(history, prompt_tags);
        MultiModalStep step{};
        std::vector<std::vector<Real>> chosen;
        for (auto m : kModalities) {
            const auto& l = logits[slot(m)];
            std::size_t C = vocab.codebook_size(m);
            if (l.size() != C + 1)
                throw ContractError(std::string(modality_name(m)) + " head returned " + std::to_string(l.size()) +
                                    " logits, expected " + std::to_string(C + 1));
            std::size_t best = 0;
            for (std::size_t k = 0; k < l.size(); ++k) {
                if (std::isnan(l[k])) throw ContractError("NaN logit from the " + std::string(modality_name(m)) + " head");
                if (l[k] > l[best]) best = k;
            }
            step[slot(m)] = best == C ? vocab.eos() : vocab.motion_id(m, best);
            if (best == C && !doc.eos) doc.eos = m;
            auto row = embeddings[step[slot(m)]];
            chosen.emplace_back(row.begin(), row.end());
        }
        doc.steps.push_back(step);
        if (doc.eos) break;
        history.push_back(fuse_embeddings(chosen));
    }
    return doc;
}

// --- preprocessing -----------------------------------------------------------

SigningWindow trim_signing_window(std::span<const Real> wrists, std::size_t frames, std::span<const Real> rest,
                                  const TrimThresholds& th) {
    if (wrists.size() != frames * 6) throw DimensionError("wrist trajectory must be T x 2 x 3");
    if (rest.size() != 6) throw DimensionError("rest wrists must be 2 x 3");
    if (!(th.height > 0) || !(th.displacement > 0)) throw UsageError("trim thresholds must be positive");
    auto active = [&](std::size_t t) {
        for (std::size_t w = 0; w < 2; ++w) {
            const Real* p = wrists.data() + t * 6 + w * 3;
            const Real* r = rest.data() + w * 3;
            Real dx = p[0] - r[0], dy = p[1] - r[1], dz = p[2] - r[2];
            if (dy > th.height || std::sqrt(dx * dx + dy * dy + dz * dz) > th.displacement) return true;
        }
        return false;
    };
    SigningWindow win;
    for (std::size_t t = 0; t < frames; ++t)
        if (active(t)) {
            if (win.empty) win.start = t;
            win.end = t + 1;
            win.empty = false;
        }
    return win;
}

FeatureSequence interleave_features(const std::array<FeatureSequence, 4>& per_modality) {
    const std::size_t T = per_modality[0].size();
    for (const auto& s : per_modality)
        if (s.size() != T) throw UsageError("modality feature sequences differ in length");
    FeatureSequence out;
    out.reserve(4 * T);
    for (std::size_t t = 0; t < T; ++t)
        for (const auto& s : per_modality) out.push_back(s[t]);
    return out;
}

std::array<FeatureSequence, 4> deinterleave_features(const FeatureSequence& interleaved) {
    if (interleaved.size() % 4 != 0) throw UsageError("interleaved length is not a multiple of 4");
    std::array<FeatureSequence, 4> out;
    for (std::size_t i = 0; i < interleaved.size(); ++i) out[i % 4].push_back(interleaved[i]);
    return out;
}

}  // namespace m3t::tokens
