#pragma once

#include <array>
#include <string>
#include <string_view>

namespace m3t {

// Stream order everywhere (vocabulary, token documents, interleaving).
enum class Modality { body = 0, left_hand = 1, right_hand = 2, face = 3 };

inline constexpr std::array<Modality, 4> kModalities{Modality::body, Modality::left_hand, Modality::right_hand,
                                                     Modality::face};

std::string_view modality_name(Modality m);
// Word prefix used by the vocabulary: b, lh, rh, f.
std::string_view modality_prefix(Modality m);
// Tag suffix for language prompts: B, LH, RH, F.
std::string_view modality_tag_suffix(Modality m);
// Accepts canonical names (body, left_hand, ...) and the short prefixes.
Modality parse_modality(std::string_view text);

// Parameter dimension of one frame (flattened 6D poses / face vector).
std::size_t modality_dim(Modality m);

// The hand tokenizer is shared; left hands are mirrored into its frame.
inline bool is_hand(Modality m) { return m == Modality::left_hand || m == Modality::right_hand; }

}  // namespace m3t
