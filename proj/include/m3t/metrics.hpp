#pragma once

// Geometric and linguistic evaluation metrics.

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "m3t/tensor.hpp"

namespace m3t::metrics {

// T frames of N points in 3D, row-major.
struct JointSequence {
    std::size_t frames = 0;
    std::size_t points = 0;
    std::vector<Real> data;

    std::span<const Real> frame(std::size_t t) const {
        return std::span<const Real>(data).subspan(t * points * 3, points * 3);
    }
    void validate() const;
};

using AlignmentPath = std::vector<std::pair<std::size_t, std::size_t>>;

struct DtwResult {
    Real cost = 0.0;
    AlignmentPath path;  // (0,0) .. (n-1,m-1), steps (1,0), (0,1), (1,1)
};

// Exact O(nm) dynamic program. Among equal-cost predecessors the diagonal
// wins, then (i-1, j), then (i, j-1).
DtwResult dtw(std::size_t n, std::size_t m, const std::function<Real(std::size_t, std::size_t)>& frame_dist);
DtwResult dtw(std::span<const Real> a, std::span<const Real> b);  // scalar sequences, L1
// Frame distance: mean per-point Euclidean distance.
DtwResult dtw(const JointSequence& a, const JointSequence& b);

bool is_valid_path(const AlignmentPath& path, std::size_t n, std::size_t m);
Real mean_point_distance(std::span<const Real> a, std::span<const Real> b);

struct Procrustes {
    std::array<Real, 9> rotation{};  // row-major, det +1
    std::array<Real, 3> translation{};
    std::vector<Real> aligned;  // R x + t, N x 3
    Real residual = 0.0;        // root mean squared distance to y
};

// Least-squares rigid transform (no scale) taking x onto y. Throws
// NumericError when either point set is collinear or has fewer than 3 points.
Procrustes procrustes_align(std::span<const Real> x, std::span<const Real> y);

enum class Alignment { none, procrustes };

// DTW over raw positions, then the mean per-point L2 error over path pairs,
// after per-frame rigid alignment when requested.
Real dtw_jpe(const JointSequence& pred, const JointSequence& gt, Alignment align);
// The same measure on vertices, optionally restricted to a region.
Real dtw_vpe(const JointSequence& pred, const JointSequence& gt, Alignment align,
             const std::vector<std::size_t>& region = {});

using Sentence = std::vector<std::string>;
Sentence tokenize_words(const std::string& text);

struct BleuOptions {
    int max_order = 4;
    bool add_one_smoothing = true;  // applied only to orders without matches
};
Real bleu4(const std::vector<Sentence>& hypotheses, const std::vector<Sentence>& references,
           const BleuOptions& options = {});

struct RougeOptions {
    Real beta_squared = 8.0;
};
std::size_t lcs_length(const Sentence& a, const Sentence& b);
Real rouge_l(const std::vector<Sentence>& hypotheses, const std::vector<Sentence>& references,
             const RougeOptions& options = {});

// Keys are dtw_jpe, dtw_pa_jpe, dtw_vpe, bleu4, rouge_l; absent metrics are omitted.
struct MetricReport {
    std::vector<std::map<std::string, Real>> sequences;
    std::map<std::string, Real> corpus;
};
std::string metric_report_json(const MetricReport& report);

}  // namespace m3t::metrics
