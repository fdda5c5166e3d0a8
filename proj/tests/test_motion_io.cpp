#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "m3t/errors.hpp"
#include "m3t/motion_io.hpp"

using namespace m3t;

namespace {

MotionSequence random_motion(Modality m, std::size_t frames, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<Real> n(0.0, 3.0);
    MotionSequence s{m, 25.0, frames, modality_dim(m), {}};
    s.data.resize(frames * s.dim);
    for (auto& v : s.data) v = n(rng);
    return s;
}

bool same(const MotionSequence& a, const MotionSequence& b) {
    return a.modality == b.modality && a.fps == b.fps && a.frames == b.frames && a.dim == b.dim && a.data == b.data;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("m3t_io_" + name)).string();
}

}  // namespace

TEST_CASE("binary and text motion round trips are exact") {
    for (std::uint64_t s = 0; s < 20; ++s) {
        auto m = random_motion(kModalities[s % 4], s + 1, s);
        CHECK(same(motion_from_bytes(motion_to_bytes(m)), m));
        CHECK(same(motion_from_text(motion_to_text(m)), m));
    }
    auto empty = random_motion(Modality::body, 0, 1);
    CHECK(same(motion_from_bytes(motion_to_bytes(empty)), empty));
}

TEST_CASE("binary layout") {
    auto m = random_motion(Modality::face, 2, 1);
    auto bytes = motion_to_bytes(m);
    CHECK(bytes.substr(0, 4) == "M3TK");
    CHECK(bytes.size() == 4 + 4 + 4 + 8 + 8 + 8 + 2 * 108 * 8);
}

TEST_CASE("files detect their format") {
    auto m = random_motion(Modality::left_hand, 5, 2);
    auto bin = temp_path("a.m3tk"), txt = temp_path("a.txt");
    write_motion(m, bin);
    write_motion(m, txt, true);
    CHECK(same(read_motion(bin), m));
    CHECK(same(read_motion(txt), m));
    std::filesystem::remove(bin);
    std::filesystem::remove(txt);
    CHECK_THROWS_AS(read_motion(temp_path("missing")), UsageError);
}

TEST_CASE("dataset round trip") {
    std::vector<MotionSequence> items;
    for (std::uint64_t s = 0; s < 6; ++s) items.push_back(random_motion(kModalities[s % 4], 3 + s, s));
    auto back = dataset_from_bytes(dataset_to_bytes(items));
    REQUIRE(back.size() == items.size());
    for (std::size_t i = 0; i < items.size(); ++i) CHECK(same(back[i], items[i]));
    CHECK(dataset_from_bytes(dataset_to_bytes({})).empty());
    auto path = temp_path("d.m3td");
    write_dataset(items, path);
    CHECK(read_dataset(path).size() == 6);
    std::filesystem::remove(path);
}

TEST_CASE("malformed binary input") {
    auto bytes = motion_to_bytes(random_motion(Modality::body, 3, 1));
    CHECK_THROWS_AS(motion_from_bytes(bytes.substr(0, bytes.size() - 1)), ParseError);
    CHECK_THROWS_AS(motion_from_bytes(bytes + "x"), ParseError);
    CHECK_THROWS_AS(motion_from_bytes("XXXX" + bytes.substr(4)), ParseError);
    CHECK_THROWS_AS(motion_from_bytes("M3"), ParseError);
    auto wrong_mod = bytes;
    wrong_mod[8] = 9;
    CHECK_THROWS_AS(motion_from_bytes(wrong_mod), ParseError);
    auto wrong_dim = bytes;
    wrong_dim[8] = 3;  // face code with body dimension
    CHECK_THROWS_AS(motion_from_bytes(wrong_dim), ParseError);
    CHECK_THROWS_AS(dataset_from_bytes(bytes), ParseError);
}

TEST_CASE("malformed text input reports the line") {
    auto text = motion_to_text(random_motion(Modality::body, 3, 1));
    CHECK_THROWS_AS(motion_from_text(""), ParseError);
    CHECK_THROWS_AS(motion_from_text("m3t-motion v2 modality=body frames=0 dim=60\n"), ParseError);
    CHECK_THROWS_AS(motion_from_text("m3t-motion v1 modality=torso frames=0 dim=60\n"), ParseError);
    CHECK_THROWS_AS(motion_from_text("m3t-motion v1 modality=body frames=0\n"), ParseError);
    CHECK_THROWS_AS(motion_from_text("m3t-motion v1 modality=body frames=0 dim=61\n"), ParseError);
    auto cut = text.substr(0, text.rfind('\n', text.size() - 2) + 1);
    try {
        motion_from_text(cut);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 4);
    }
    auto bad = text;
    bad.replace(bad.find('\n') + 1, 1, "abc ");
    try {
        motion_from_text(bad);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
}

TEST_CASE("validation on write") {
    auto m = random_motion(Modality::body, 2, 1);
    m.dim = 59;
    CHECK_THROWS_AS(motion_to_bytes(m), DimensionError);
    auto n = random_motion(Modality::body, 2, 1);
    n.data[0] = std::numeric_limits<Real>::infinity();
    CHECK_THROWS_AS(motion_to_text(n), DataError);
    auto f = random_motion(Modality::body, 2, 1);
    f.fps = 0;
    CHECK_THROWS_AS(motion_to_bytes(f), DataError);
}
