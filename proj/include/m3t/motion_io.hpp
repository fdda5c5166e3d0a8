#pragma once

// Motion sequences and their on-disk forms.
//
// Binary motion file (little-endian):
//   "M3TK" | u32 version=1 | u32 modality | f64 fps | u64 T | u64 D | T*D f64
// Binary dataset: "M3TD" | u32 version=1 | u64 count | count motion records
// (each a full motion file image).
// Text motion file: "m3t-motion v1 modality=<name> fps=<fps> frames=<T> dim=<D>"
// followed by T lines of D numbers.

#include <span>
#include <string>
#include <vector>

#include "m3t/modality.hpp"
#include "m3t/tensor.hpp"

namespace m3t {

struct MotionSequence {
    Modality modality = Modality::body;
    Real fps = 30.0;
    std::size_t frames = 0;
    std::size_t dim = 0;
    std::vector<Real> data;  // frames x dim

    std::span<const Real> frame(std::size_t t) const { return std::span<const Real>(data).subspan(t * dim, dim); }
    // dim must equal modality_dim(modality); values finite.
    void validate() const;
};

std::string motion_to_bytes(const MotionSequence& m);
MotionSequence motion_from_bytes(const std::string& bytes);
std::string motion_to_text(const MotionSequence& m);
MotionSequence motion_from_text(const std::string& text);

// Reads either form, detected from the leading magic.
MotionSequence read_motion(const std::string& path);
void write_motion(const MotionSequence& m, const std::string& path, bool text = false);

std::string dataset_to_bytes(const std::vector<MotionSequence>& items);
std::vector<MotionSequence> dataset_from_bytes(const std::string& bytes);
std::vector<MotionSequence> read_dataset(const std::string& path);
void write_dataset(const std::vector<MotionSequence>& items, const std::string& path);

std::string read_file(const std::string& path);  // UsageError if unreadable
void write_file(const std::string& path, const std::string& contents);

}  // namespace m3t
