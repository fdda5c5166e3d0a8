#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "m3t/errors.hpp"
#include "m3t/fitting.hpp"
#include "m3t/fixtures.hpp"
#include "m3t/gradcheck.hpp"
#include "m3t/ops.hpp"

using namespace m3t;
using namespace m3t::fit;
using body::PoseParams;
using body::PoseTensors;

namespace {

std::vector<PoseTensors> as_tensors(const std::vector<PoseParams>& ps, bool grad = false) {
    std::vector<PoseTensors> out;
    for (const auto& p : ps) out.push_back(PoseTensors::from(p, grad));
    return out;
}

fixtures::FitFixture exact_static(std::uint64_t seed) {
    auto fx = fixtures::toy_fit_fixture(seed, 0.0, 5, false);
    return fx;
}

}  // namespace

TEST_CASE("project_orthographic examples") {
    std::vector<Real> p{1, 2, 5};
    CHECK(project_orthographic(p, Camera{1, 0, 0}) == std::vector<Real>{1, 2});
    std::vector<Real> q{1, 1, 0};
    CHECK(project_orthographic(q, Camera{2, 10, 10}) == std::vector<Real>{12, 12});

    std::mt19937_64 rng(1);
    std::normal_distribution<Real> n(0, 1);
    std::vector<Real> pts(30);
    for (auto& x : pts) x = n(rng);
    Camera cam{1.5, 0.2, -0.3}, shifted{1.5, 0.2 + 0.7, -0.3 - 0.4};
    auto a = project_orthographic(pts, cam), b = project_orthographic(pts, shifted);
    for (std::size_t i = 0; i < a.size(); i += 2) {
        CHECK(b[i] - a[i] == doctest::Approx(0.7));
        CHECK(b[i + 1] - a[i + 1] == doctest::Approx(-0.4));
    }
    auto t = project_orthographic(Tensor::from({10, 3}, pts), cam);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(t.data()[i] == doctest::Approx(a[i]).epsilon(1e-15));
}

TEST_CASE("fit_loss vanishes on an exact static problem") {
    auto fx = exact_static(2);
    CHECK(fit_loss_value(fx.problem, fx.problem.init_params) == 0.0);
}

TEST_CASE("unit keypoint offset costs exactly the keypoint weight") {
    auto fx = exact_static(3);
    for (std::size_t i = 0; i < fx.problem.keypoints.data.size(); i += 3) {
        fx.problem.keypoints.data[i] += 1.0;
        fx.problem.keypoints.data[i + 2] = 1.0;
    }
    fx.problem.weights = {1.0, 0.0, 0.0};
    CHECK(fit_loss_value(fx.problem, fx.problem.init_params) == doctest::Approx(1.0).epsilon(1e-12));
    fx.problem.weights = {2.5, 0.0, 0.0};
    CHECK(fit_loss_value(fx.problem, fx.problem.init_params) == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("linear-in-time motion has no acceleration cost") {
    auto fx = exact_static(4);
    auto params = fx.problem.init_params;
    for (std::size_t f = 0; f < params.size(); ++f)
        params[f].global_translation = {0.3 * f, -0.1 * f, 0.05 * f};
    auto terms = fit_loss_terms(fx.problem, as_tensors(params));
    CHECK(std::abs(terms.acceleration.item()) < 1e-20);
    CHECK(terms.keypoint.item() > 0.0);
}

TEST_CASE("fit_loss is nonnegative and rejects frame mismatches") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto fx = fixtures::toy_fit_fixture(seed, 0.2);
        auto terms = fit_loss_terms(fx.problem, as_tensors(fx.problem.init_params));
        CHECK(terms.total.item() >= 0.0);
        CHECK(terms.keypoint.item() >= 0.0);
        CHECK(terms.acceleration.item() >= 0.0);
        CHECK(terms.regularization.item() == 0.0);
    }
    auto fx = fixtures::toy_fit_fixture(0, 0.1);
    auto short_seq = fx.problem.init_params;
    short_seq.pop_back();
    CHECK_THROWS_AS(fit_loss_value(fx.problem, short_seq), UsageError);
}

TEST_CASE("fit_loss gradients match finite differences") {
    for (std::uint64_t seed = 100; seed < 120; ++seed) {
        auto fx = fixtures::toy_fit_fixture(seed, 0.15, 4);
        // Evaluate away from the initialization so the regularizer contributes.
        std::mt19937_64 rng(seed);
        std::normal_distribution<Real> n(0, 0.05);
        auto params = fx.problem.init_params;
        for (auto& p : params)
            for (auto* f : {&p.theta_body, &p.theta_right, &p.global_rotation, &p.global_translation})
                for (auto& x : *f) x += n(rng);

        auto t = as_tensors(params, true);
        fit_loss(fx.problem, t).backward();
        for (std::size_t frame : {std::size_t{0}, std::size_t{2}}) {
            for (std::size_t field = 0; field < 5; ++field) {
                auto probe_base = as_tensors(params);
                Tensor x0 = *refined_fields(probe_base[frame])[field];
                auto fd = finite_difference_gradient(
                    [&](const Tensor& x) {
                        auto probe = as_tensors(params);
                        *refined_fields(probe[frame])[field] = x;
                        return fit_loss(fx.problem, probe).item();
                    },
                    x0);
                CHECK(grad_mismatch(refined_fields(t[frame])[field]->grad(), fd.data()) <= 1.0);
            }
        }
    }
}

TEST_CASE("refine_sequence keeps an optimal problem at zero") {
    auto fx = exact_static(5);
    auto r = refine_sequence(fx.problem, 10, 0.01);
    CHECK(r.trace.size() == 11);
    for (auto v : r.trace) CHECK(v == 0.0);
    CHECK_THROWS_AS(refine_sequence(fx.problem, 0, 0.01), UsageError);
}

TEST_CASE("refine_sequence halves the loss on the perturbed toy problem") {
    auto fx = fixtures::toy_fit_fixture(7, 0.1);
    auto r = refine_sequence(fx.problem, 200, 0.01);
    CHECK(r.trace.back() < 0.5 * r.trace.front());
    CHECK(fit_loss_value(fx.problem, r.params) == doctest::Approx(r.trace.back()).epsilon(1e-12));
    // Face and shape are frozen.
    for (std::size_t f = 0; f < r.params.size(); ++f) {
        CHECK(r.params[f].psi_face == fx.problem.init_params[f].psi_face);
        CHECK(r.params[f].beta == fx.problem.init_params[f].beta);
    }
}

TEST_CASE("a dominant regularizer pins the parameters to the initialization") {
    auto fx = fixtures::toy_fit_fixture(8, 0.1);
    fx.problem.weights.regularization = 1e6;
    auto r = refine_sequence(fx.problem, 50, 1e-4);
    for (std::size_t f = 0; f < r.params.size(); ++f) {
        const auto& a = r.params[f];
        const auto& b = fx.problem.init_params[f];
        for (std::size_t i = 0; i < a.theta_body.size(); ++i) CHECK(std::abs(a.theta_body[i] - b.theta_body[i]) < 1e-3);
        for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(a.global_rotation[i] - b.global_rotation[i]) < 1e-3);
        for (std::size_t i = 0; i < 3; ++i)
            CHECK(std::abs(a.global_translation[i] - b.global_translation[i]) < 1e-3);
    }
}

TEST_CASE("refine_sequence ends no worse than it starts") {
    for (std::uint64_t seed = 200; seed < 220; ++seed) {
        auto fx = fixtures::toy_fit_fixture(seed, 0.1);
        auto r = refine_sequence(fx.problem, 100, 0.01);
        CHECK(r.trace.back() <= r.trace.front());
    }
}

TEST_CASE("keypoint file round trip and errors") {
    auto fx = fixtures::toy_fit_fixture(9, 0.1, 3);
    auto text = keypoints_to_string(fx.problem.keypoints);
    CHECK(text.rfind("m3t-keypoints v1 frames=3 points=4\n", 0) == 0);
    auto back = parse_keypoints(text);
    CHECK(back.frames == 3);
    CHECK(back.points == 4);
    CHECK(back.data == fx.problem.keypoints.data);

    CHECK_THROWS_AS(parse_keypoints("m3t-keypoints v2 frames=1 points=1\n0 0 1\n"), ParseError);
    try {
        parse_keypoints("m3t-keypoints v1 frames=2 points=1\n0 0 1\n0 0\n");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
    CHECK_THROWS_AS(parse_keypoints("m3t-keypoints v1 frames=1 points=1\n0 0 1.5\n"), ParseError);
    CHECK_THROWS_AS(parse_keypoints("m3t-keypoints v1 frames=2 points=1\n0 0 1\n"), ParseError);
}

TEST_CASE("params sequence round trip") {
    auto fx = fixtures::toy_fit_fixture(3, 0.1, 4);
    auto back = parse_params_sequence(params_sequence_to_json(fx.problem.init_params));
    REQUIRE(back.size() == 4);
    for (std::size_t t = 0; t < 4; ++t) {
        CHECK(back[t].beta == fx.problem.init_params[t].beta);
        CHECK(back[t].theta_body == fx.problem.init_params[t].theta_body);
        CHECK(back[t].theta_right == fx.problem.init_params[t].theta_right);
        CHECK(back[t].psi_face == fx.problem.init_params[t].psi_face);
        CHECK(back[t].global_rotation == fx.problem.init_params[t].global_rotation);
        CHECK(back[t].global_translation == fx.problem.init_params[t].global_translation);
    }
    CHECK_THROWS_AS(parse_params_sequence("[1,2"), ParseError);
    CHECK_THROWS_AS(parse_params_sequence(R"({"format":"m3t-params","version":1,"frames":[{"beta":[]}]})"), ParseError);
    CHECK_THROWS_AS(parse_params_sequence(R"({"format":"other","version":1,"frames":[]})"), ParseError);
}
