#pragma once

// Deterministic synthetic data standing in for real corpora and assets.

#include <cstdint>
#include <string>
#include <vector>

#include "m3t/bodymodel.hpp"
#include "m3t/fitting.hpp"
#include "m3t/motion_io.hpp"

namespace m3t::fixtures {

// 12 vertices, 4 joints: root, neck (body:0), jaw, right wrist (right:0).
// Two neck-ring vertices, one tooth on the jaw, beta of dimension 110
// (100 face components + 10 body components), 100 expression directions.
body::BodyModel toy_body_model();

// Rotation about a coordinate axis (0 = x, 1 = y, 2 = z) as 6D.
std::vector<Real> axis_rotation_6d(int axis, Real radians);

struct FitFixture {
    fit::FitProblem problem;
    std::vector<body::PoseParams> truth;
};

// Toy-model sequence whose keypoints are the exact projections of every
// joint under `truth`; the initialization adds N(0, perturbation^2) noise to
// the refined fields. A static sequence holds frame 0 throughout.
FitFixture toy_fit_fixture(std::uint64_t seed, Real perturbation, std::size_t frames = 8, bool moving = true);

// Sums of three sinusoids per dimension: the mixing matrix is shared by the
// modality's family, frequencies and phases vary per sequence (seeded).
std::vector<MotionSequence> sinusoid_motions(Modality m, std::size_t count, std::size_t frames, std::uint64_t seed);

// Expressive-face stand-in: frames are mean + U c(t) with a fixed random
// orthonormal basis U (108 x rank) fixed per rank. Each sequence draws a mixture component
// for its starting coefficients and drifts smoothly from there.
std::vector<MotionSequence> face_pca_motions(std::size_t count, std::size_t frames, std::uint64_t seed,
                                             std::size_t rank = 8);

struct TextCorpus {
    std::vector<std::string> references;
    std::vector<std::string> hypotheses;  // references with about 20% of words substituted
};
// Gloss-like sentences of 4 to 10 words over a small lexicon.
TextCorpus text_corpus(std::size_t count, std::uint64_t seed);

}  // namespace m3t::fixtures
