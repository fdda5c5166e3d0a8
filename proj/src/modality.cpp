#include "m3t/modality.hpp"

#include "m3t/errors.hpp"

namespace m3t {

std::string_view modality_name(Modality m) {
    switch (m) {
        case Modality::body: return "body";
        case Modality::left_hand: return "left_hand";
        case Modality::right_hand: return "right_hand";
        case Modality::face: return "face";
    }
    return "?";
}

std::string_view modality_prefix(Modality m) {
    switch (m) {
        case Modality::body: return "b";
        case Modality::left_hand: return "lh";
        case Modality::right_hand: return "rh";
        case Modality::face: return "f";
    }
    return "?";
}

std::string_view modality_tag_suffix(Modality m) {
    switch (m) {
        case Modality::body: return "B";
        case Modality::left_hand: return "LH";
        case Modality::right_hand: return "RH";
        case Modality::face: return "F";
    }
    return "?";
}

Modality parse_modality(std::string_view text) {
    for (auto m : kModalities)
        if (text == modality_name(m) || text == modality_prefix(m)) return m;
    throw UsageError("unknown modality '" + std::string(text) + "'");
}

std::size_t modality_dim(Modality m) {
    switch (m) {
        case Modality::body: return 10 * 6;
        case Modality::left_hand:
        case Modality::right_hand: return 15 * 6;
        case Modality::face: return 108;
    }
    return 0;
}

}  // namespace m3t
