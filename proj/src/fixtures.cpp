#include "m3t/fixtures.hpp"

#include <cmath>
#include <memory>
#include <random>

#include "m3t/errors.hpp"

namespace m3t::fixtures {

body::BodyModel toy_body_model() {
    using body::JointSource;
    body::BodyModel m;
    m.n_vertices = 12;
    m.n_joints = 4;
    m.n_shape = 110;
    m.n_face_shape = 100;
    m.n_expression = 100;
    const std::size_t V = m.n_vertices, J = m.n_joints;

    m.template_vertices = {
        -0.5,  0.0,   0.0,    0.5,  0.0,  0.0,    // pelvis
        -0.5,  1.5,   0.0,    0.5,  1.5,  0.0,    // chest
        -0.25, 2.0,   0.0,    0.25, 2.0,  0.0,    // neck ring
        -0.25, 2.75,  0.0,    0.25, 2.75, 0.0,    // eyes
        0.0,   2.25,  0.5,                        // chin
        0.0,   2.375, 0.375,                      // tooth
        -1.5,  1.0,   0.0,    -2.0, 1.0,  0.0,    // forearm, hand
    };
    m.parents = {-1, 0, 1, 0};
    m.joint_sources = {{JointSource::Kind::root, 0},
                       {JointSource::Kind::body, 0},
                       {JointSource::Kind::jaw, 0},
                       {JointSource::Kind::right_hand, 0}};
    m.face_vertices = {4, 5, 6, 7, 8, 9};

    m.blend_weights = {
        1, 0, 0, 0,   1, 0, 0, 0,                     //
        0.5, 0.5, 0, 0,   0.5, 0.5, 0, 0,             //
        0, 1, 0, 0,   0, 1, 0, 0,                     //
        0, 1, 0, 0,   0, 0.75, 0.25, 0,               //
        0, 0, 1, 0,   0, 0, 1, 0,                     //
        0.5, 0, 0, 0.5,   0, 0, 0, 1,                 //
    };
    m.face_blend_weights = m.blend_weights;
    const Real face_ring[2][4] = {{0, 0.5, 0.5, 0}, {0, 0.25, 0.75, 0}};
    for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t j = 0; j < J; ++j) m.face_blend_weights[(4 + r) * J + j] = face_ring[r][j];
    m.neck_ring = {{4, 0.9}, {5, 0.1}};
    m.teeth = {{9, 2}};

    m.joint_regressor.assign(J * V, 0.0);
    auto reg = [&](std::size_t j, std::size_t v, Real w) { m.joint_regressor[j * V + v] = w; };
    reg(0, 0, 0.5), reg(0, 1, 0.5);
    reg(1, 4, 0.5), reg(1, 5, 0.5);
    reg(2, 8, 0.5), reg(2, 9, 0.5);
    reg(3, 10, 1.0);

    std::mt19937_64 rng(20240611);
    std::normal_distribution<Real> n(0.0, 1.0);
    m.shape_dirs.resize(V * 3 * m.n_shape);
    for (auto& x : m.shape_dirs) x = 0.01 * n(rng);
    m.confine_face_shape();

    m.expr_dirs.assign(V * 3 * m.n_expression, 0.0);
    for (auto v : m.face_vertices)
        for (std::size_t i = 0; i < 3 * m.n_expression; ++i) m.expr_dirs[v * 3 * m.n_expression + i] = 0.01 * n(rng);

    m.eyelid_dirs.assign(V * 3 * body::kEyelidDims, 0.0);
    // Eyelid k closes eye vertex 6+k downward.
    m.eyelid_dirs[(6 * 3 + 1) * 2 + 0] = -0.05;
    m.eyelid_dirs[(7 * 3 + 1) * 2 + 1] = -0.05;

    m.pose_dirs.resize(V * 3 * m.n_pose_basis());
    for (auto& x : m.pose_dirs) x = 0.001 * n(rng);

    m.validate();
    return m;
}

}  // namespace m3t::fixtures

namespace m3t::fixtures {

std::vector<Real> axis_rotation_6d(int axis, Real radians) {
    Real c = std::cos(radians), s = std::sin(radians);
    body::Mat3 R;
    switch (axis) {
        case 0: R = {1, 0, 0, 0, c, -s, 0, s, c}; break;
        case 1: R = {c, 0, s, 0, 1, 0, -s, 0, c}; break;
        default: R = {c, -s, 0, s, c, 0, 0, 0, 1}; break;
    }
    auto r = body::matrix_to_rot6d(R);
    return {r.begin(), r.end()};
}

FitFixture toy_fit_fixture(std::uint64_t seed, Real perturbation, std::size_t frames, bool moving) {
    auto model = std::make_shared<const body::BodyModel>(toy_body_model());
    std::mt19937_64 rng(seed);
    std::normal_distribution<Real> n(0.0, 1.0);
    std::uniform_real_distribution<Real> conf(0.6, 1.0);

    FitFixture fx;
    fx.problem.model = model;
    fx.problem.camera = {1.0, 0.0, 0.0};
    fx.problem.keypoints.frames = frames;
    fx.problem.keypoints.points = model->n_joints;
    for (std::size_t f = 0; f < frames; ++f) {
        Real t = moving ? static_cast<Real>(f) : 0.0;
        auto p = body::PoseParams::identity(model->n_shape);
        for (std::size_t s = 0; s < model->n_shape; ++s) p.beta[s] = 0.5 * std::sin(0.3 * s + 1.0);
        p.global_rotation = axis_rotation_6d(1, 0.3 + 0.05 * t);
        p.global_translation = {0.1 + 0.02 * t, -0.05, 0.0};
        auto neck = axis_rotation_6d(0, 0.2 + 0.03 * t);
        std::copy(neck.begin(), neck.end(), p.theta_body.begin());
        auto wrist = axis_rotation_6d(2, 0.4 - 0.04 * t);
        std::copy(wrist.begin(), wrist.end(), p.theta_right.begin());
        fx.truth.push_back(p);

        auto posed = body::lbs_forward(*model, p);
        auto uv = fit::project_orthographic(posed.joints, fx.problem.camera);
        for (std::size_t k = 0; k < model->n_joints; ++k)
            fx.problem.keypoints.data.insert(fx.problem.keypoints.data.end(), {uv[2 * k], uv[2 * k + 1], conf(rng)});

        auto init = p;
        for (auto* field : {&init.theta_body, &init.theta_left, &init.theta_right, &init.global_rotation,
                            &init.global_translation})
            for (auto& x : *field) x += perturbation * n(rng);
        fx.problem.init_params.push_back(init);
    }
    fx.problem.validate();
    return fx;
}

std::vector<MotionSequence> sinusoid_motions(Modality m, std::size_t count, std::size_t frames, std::uint64_t seed) {
    const std::size_t D = modality_dim(m);
    std::normal_distribution<Real> n(0.0, 1.0);
    std::uniform_real_distribution<Real> u(0.0, 1.0);
    // The family (mixing matrix) is fixed; `seed` only draws sequences.
    std::mt19937_64 family(0x5151u + static_cast<std::uint64_t>(m));
    std::vector<Real> mix(D * 3);
    for (auto& a : mix) a = 0.5 * n(family);
    std::mt19937_64 rng(seed);
    std::vector<MotionSequence> out;
    out.reserve(count);
    for (std::size_t s = 0; s < count; ++s) {
        Real omega[3], phase[3];
        for (int k = 0; k < 3; ++k) {
            omega[k] = 2.0 * M_PI * (0.5 + 1.5 * u(rng)) / 30.0;
            phase[k] = 2.0 * M_PI * u(rng);
        }
        MotionSequence seq{m, 30.0, frames, D, std::vector<Real>(frames * D)};
        for (std::size_t t = 0; t < frames; ++t)
            for (std::size_t c = 0; c < D; ++c) {
                Real v = 0.0;
                for (int k = 0; k < 3; ++k) v += mix[c * 3 + k] * std::sin(omega[k] * static_cast<Real>(t) + phase[k]);
                seq.data[t * D + c] = v;
            }
        out.push_back(std::move(seq));
    }
    return out;
}

std::vector<MotionSequence> face_pca_motions(std::size_t count, std::size_t frames, std::uint64_t seed,
                                             std::size_t rank) {
    const std::size_t D = modality_dim(Modality::face);
    if (rank == 0 || rank > D) throw UsageError("face generator rank must lie in [1, 108]");
    constexpr std::size_t kComponents = 12;
    std::normal_distribution<Real> n(0.0, 1.0);
    // Basis, mean and mixture centres depend only on the rank; `seed` draws
    // the sequences.
    std::mt19937_64 family(0xFACEu + rank);

    // Orthonormal basis by Gram-Schmidt on Gaussian columns (column-major).
    std::vector<Real> basis(D * rank);
    for (std::size_t r = 0; r < rank; ++r) {
        Real* col = &basis[r * D];
        for (std::size_t i = 0; i < D; ++i) col[i] = n(family);
        for (std::size_t q = 0; q < r; ++q) {
            const Real* prev = &basis[q * D];
            Real dot = 0.0;
            for (std::size_t i = 0; i < D; ++i) dot += col[i] * prev[i];
            for (std::size_t i = 0; i < D; ++i) col[i] -= dot * prev[i];
        }
        Real norm = 0.0;
        for (std::size_t i = 0; i < D; ++i) norm += col[i] * col[i];
        norm = std::sqrt(norm);
        for (std::size_t i = 0; i < D; ++i) col[i] /= norm;
    }
    std::vector<Real> mean(D);
    for (auto& v : mean) v = 0.1 * n(family);
    std::vector<Real> centres(kComponents * rank);
    for (auto& v : centres) v = 1.5 * n(family);

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, kComponents - 1);
    std::vector<MotionSequence> out;
    out.reserve(count);
    std::vector<Real> c(rank), vel(rank);
    for (std::size_t s = 0; s < count; ++s) {
        const std::size_t k = pick(rng);
        for (std::size_t r = 0; r < rank; ++r) {
            c[r] = centres[k * rank + r] + 0.3 * n(rng);
            vel[r] = 0.15 * n(rng);
        }
        MotionSequence seq{Modality::face, 30.0, frames, D, std::vector<Real>(frames * D)};
        for (std::size_t t = 0; t < frames; ++t) {
            for (std::size_t i = 0; i < D; ++i) {
                Real v = mean[i];
                for (std::size_t r = 0; r < rank; ++r) v += basis[r * D + i] * c[r];
                seq.data[t * D + i] = v;
            }
            for (std::size_t r = 0; r < rank; ++r) c[r] += vel[r] + 0.05 * n(rng);
        }
        out.push_back(std::move(seq));
    }
    return out;
}

TextCorpus text_corpus(std::size_t count, std::uint64_t seed) {
    static const char* const kLexicon[] = {
        "today", "weather", "rain", "sun", "north", "south", "wind", "cloud", "tomorrow", "morning",
        "evening", "cold", "warm", "strong", "weak", "snow", "region", "coast", "mountain", "temperature",
        "degree", "high", "low", "night", "week", "friday", "monday", "also", "there", "maybe"};
    constexpr std::size_t kWords = sizeof(kLexicon) / sizeof(kLexicon[0]);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> word(0, kWords - 1), length(4, 10);
    std::bernoulli_distribution swap(0.2);
    TextCorpus c;
    for (std::size_t s = 0; s < count; ++s) {
        std::string ref, hyp;
        const std::size_t n = length(rng);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t w = word(rng);
            const std::size_t h = swap(rng) ? word(rng) : w;
            ref += (i ? " " : "") + std::string(kLexicon[w]);
            hyp += (i ? " " : "") + std::string(kLexicon[h]);
        }
        c.references.push_back(std::move(ref));
        c.hypotheses.push_back(std::move(hyp));
    }
    return c;
}

}  // namespace m3t::fixtures
