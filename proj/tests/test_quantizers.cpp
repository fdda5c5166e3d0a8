#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "m3t/errors.hpp"
#include "m3t/ops.hpp"
#include "m3t/quantizers.hpp"

using namespace m3t;
using namespace m3t::quant;

TEST_CASE("preset codebook sizes") {
    CHECK(LevelSpec::body().codebook_size() == 100);
    CHECK(LevelSpec::hand().codebook_size() == 180);
    CHECK(LevelSpec::face().codebook_size() == 216);
    CHECK(LevelSpec::for_modality(Modality::left_hand) == LevelSpec::hand());
}

TEST_CASE("fsq_quantize examples") {
    std::vector<Real> zero{0, 0, 0};
    auto q = fsq_quantize(zero, LevelSpec::body());
    CHECK(q.digits[0] == 2);
    CHECK(q.digits[1] == 2);
    CHECK((q.digits[2] == 1 || q.digits[2] == 2));  // middle pair of an even level count
    CHECK(q.quantized[0] == 0.0);
    CHECK(q.quantized[1] == 0.0);

    std::vector<Real> big{10, 10, 10};
    auto top = fsq_quantize(big, LevelSpec{{5, 5, 5}});
    CHECK(top.digits == std::vector<int>{4, 4, 4});
    CHECK(top.quantized == std::vector<Real>{2, 2, 2});

    // tanh(30) == 1.0 exactly in double; the top level must still be L-1.
    std::vector<Real> huge{30, -30, 30};
    auto sat = fsq_quantize(huge, LevelSpec{{5, 6, 4}});
    CHECK(sat.digits == std::vector<int>{4, 0, 3});

    std::vector<Real> two{0.1, 0.2};
    CHECK_THROWS_AS(fsq_quantize(two, LevelSpec::body()), UsageError);
}

TEST_CASE("fsq straight-through gradient equals the bound's gradient") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<Real> u(-2, 2);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Real> v(2 * 3 * 4);
        for (auto& x : v) x = u(rng);
        auto z1 = Tensor::from({2, 3, 4}, v, true);
        auto z2 = Tensor::from({2, 3, 4}, v, true);
        sum(fsq_quantize_tensor(z1, LevelSpec::hand(), 1)).backward();
        sum(fsq_bound(z2, LevelSpec::hand(), 1)).backward();
        for (std::size_t i = 0; i < v.size(); ++i) CHECK(z1.grad()[i] == z2.grad()[i]);
    }
}

TEST_CASE("each dimension reaches exactly L levels over a dense sweep") {
    for (int L : {2, 3, 4, 5, 6, 7, 8}) {
        LevelSpec spec{{L}};
        std::set<Real> values;
        std::set<int> digits;
        for (int i = 0; i <= 200000; ++i) {
            Real z = -10.0 + 20.0 * i / 200000.0;
            auto q = fsq_quantize(std::span<const Real>(&z, 1), spec);
            values.insert(q.quantized[0]);
            digits.insert(q.digits[0]);
        }
        CHECK(values.size() == static_cast<std::size_t>(L));
        CHECK(*digits.begin() == 0);
        CHECK(*digits.rbegin() == L - 1);
        // Levels are symmetric about zero.
        CHECK(*values.begin() == -*values.rbegin());
    }
}

TEST_CASE("fsq snapping is idempotent") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<Real> u(-4, 4);
    for (const auto& spec : {LevelSpec::body(), LevelSpec::hand(), LevelSpec::face()}) {
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<Real> z{u(rng), u(rng), u(rng)};
            auto q = fsq_quantize(z, spec);
            CHECK(fsq_snap(q.quantized, spec) == q.quantized);
            CHECK(fsq_digits_of(q.quantized, spec) == q.digits);
            CHECK(fsq_levels_of(q.digits, spec) == q.quantized);
        }
    }
}

TEST_CASE("tensor quantization matches the per-frame routine") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<Real> u(-3, 3);
    const std::size_t B = 2, d = 3, T = 5;
    std::vector<Real> v(B * d * T);
    for (auto& x : v) x = u(rng);
    auto z = Tensor::from({B, d, T}, v);
    auto spec = LevelSpec::face();
    auto q = fsq_quantize_tensor(z, spec, 1);
    auto digits = fsq_digits_tensor(q, spec, 1);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t t = 0; t < T; ++t) {
            std::vector<Real> frame{z.at({b, 0, t}), z.at({b, 1, t}), z.at({b, 2, t})};
            auto ref = fsq_quantize(frame, spec);
            for (std::size_t i = 0; i < d; ++i) {
                CHECK(q.at({b, i, t}) == ref.quantized[i]);
                CHECK(digits[(b * T + t) * d + i] == ref.digits[i]);
            }
        }
}

TEST_CASE("digits_to_index examples") {
    auto spec = LevelSpec::body();
    std::vector<int> a{0, 0, 0}, b{4, 4, 3}, c{1, 2, 3};
    CHECK(digits_to_index(a, spec) == 0);
    CHECK(digits_to_index(b, spec) == 99);
    CHECK(digits_to_index(c, spec) == 86);
    std::vector<int> bad{5, 0, 0};
    CHECK_THROWS_AS(digits_to_index(bad, spec), UsageError);
    CHECK_THROWS_AS(index_to_digits(100, spec), UsageError);
}

TEST_CASE("mixed-radix packing is a bijection on every preset") {
    for (const auto& spec : {LevelSpec::body(), LevelSpec::hand(), LevelSpec::face()}) {
        std::set<std::vector<int>> seen;
        for (std::size_t i = 0; i < spec.codebook_size(); ++i) {
            auto d = index_to_digits(i, spec);
            CHECK(digits_to_index(d, spec) == i);
            seen.insert(d);
        }
        CHECK(seen.size() == spec.codebook_size());
    }
}

TEST_CASE("vq_quantize examples") {
    auto cb = Codebook::from_entries(2, 1, {0.0, 10.0});
    std::vector<Real> z{2.0};
    auto m = vq_quantize(z, cb);
    CHECK(m.index == 0);
    CHECK(cb.usage_counts[0] == 1);

    std::vector<Real> hit{10.0};
    auto exact = vq_quantize(hit, cb);
    CHECK(exact.index == 1);
    CHECK(exact.distance == 0.0);

    std::vector<Real> mid{5.0};
    CHECK(vq_quantize(mid, cb).index == 0);

    Codebook empty;
    CHECK_THROWS_AS(vq_quantize(z, empty), UsageError);
}

TEST_CASE("vq never returns a farther entry than any other") {
    std::mt19937_64 rng(12);
    std::normal_distribution<Real> n(0, 1);
    auto cb = Codebook::uniform_init(64, 3, 7);
    auto ev = cb.entries.data();
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<Real> z{n(rng) * 0.05, n(rng) * 0.05, n(rng) * 0.05};
        auto m = vq_quantize(z, cb);
        for (std::size_t k = 0; k < 64; ++k) {
            Real dk = 0;
            for (int j = 0; j < 3; ++j) dk += (z[j] - ev[k * 3 + j]) * (z[j] - ev[k * 3 + j]);
            CHECK(m.distance <= std::sqrt(dk) + 1e-15);
        }
    }
}

TEST_CASE("vq tensor path: straight-through to z, codebook gradient via the codebook loss") {
    auto cb = Codebook::from_entries(3, 2, {0, 0, 1, 1, -1, 2});
    auto z = Tensor::from({2, 2}, {0.9, 1.2, -0.8, 1.7}, true);
    auto r = vq_quantize_tensor(z, cb);
    CHECK(r.indices == std::vector<std::size_t>{1, 2});
    CHECK(r.quantized.to_vector() == std::vector<Real>{1, 1, -1, 2});
    sum(r.quantized).backward();
    for (auto g : z.grad()) CHECK(g == 1.0);
    CHECK(!cb.entries.has_grad());
}

TEST_CASE("vq_losses examples and stop-gradient routing") {
    auto z = Tensor::from({1}, {1.0}, true);
    auto e = Tensor::from({1}, {0.0}, true);
    auto l = vq_losses(z, e);
    CHECK(l.codebook_loss.item() == 1.0);
    CHECK(l.commitment_loss.item() == 1.0);

    l.commitment_loss.backward();
    CHECK(z.grad()[0] == 2.0);
    CHECK(!e.has_grad());  // entry is detached in the commitment term
    z.zero_grad();
    l.codebook_loss.backward();
    CHECK(z.grad()[0] == 0.0);
    CHECK(e.grad()[0] == -2.0);

    auto same = vq_losses(Tensor::from({2}, {3, 4}), Tensor::from({2}, {3, 4}));
    CHECK(same.codebook_loss.item() == 0.0);
    CHECK(same.commitment_loss.item() == 0.0);
}

TEST_CASE("utilization examples") {
    TokenStream all{Modality::face, "ASL", {}, false};
    for (std::size_t i = 0; i < 216; ++i) all.indices.push_back(i);
    auto full = utilization(std::span(&all, 1), 216);
    CHECK(full.used_fraction == 1.0);
    CHECK(full.frequency_sd == 0.0);
    CHECK(full.total_tokens == 216);

    TokenStream one{Modality::body, "ASL", std::vector<std::size_t>(50, 7), false};
    auto single = utilization(std::span(&one, 1), 100);
    CHECK(single.used_fraction == doctest::Approx(0.01));

    TokenStream bad{Modality::body, "ASL", {100}, false};
    CHECK_THROWS_AS(utilization(std::span(&bad, 1), 100), DataError);
}

TEST_CASE("used_fraction never decreases as streams are appended") {
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<std::size_t> pick(0, 179);
    std::vector<TokenStream> streams;
    Real prev = 0.0;
    for (int s = 0; s < 40; ++s) {
        TokenStream ts{Modality::right_hand, "DGS", {}, false};
        for (int i = 0; i < 5; ++i) ts.indices.push_back(pick(rng));
        streams.push_back(ts);
        auto rep = utilization(streams, 180);
        CHECK(rep.used_fraction >= prev);
        std::size_t total = 0;
        for (auto c : rep.frequency_histogram) total += c;
        CHECK(total == rep.total_tokens);
        prev = rep.used_fraction;
    }
}
