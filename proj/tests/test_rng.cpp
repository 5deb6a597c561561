#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "stein/math.hpp"
#include "stein/rng.hpp"
#include "test_util.hpp"

using namespace stein;

TEST_CASE("draws are pure functions of (seed, stream, index)") {
    RandomStream a(42, 7);
    RandomStream b(42, 7);
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());

    // jumping reproduces any position
    RandomStream c(42, 7);
    c.jump_to(50);
    double at50 = c.next_uniform();
    RandomStream d(42, 7);
    for (int i = 0; i < 50; ++i) d.next_uniform();
    REQUIRE(d.next_uniform() == at50);
    REQUIRE(RandomStream(42, 7).uniform_at(50) == at50);
}

TEST_CASE("different seeds and streams decorrelate") {
    RandomStream a(1, 0), b(2, 0), c(1, 1);
    int equal_ab = 0, equal_ac = 0;
    for (int i = 0; i < 1000; ++i) {
        std::uint64_t va = a.next_u64(), vb = b.next_u64(), vc = c.next_u64();
        equal_ab += va == vb;
        equal_ac += va == vc;
    }
    REQUIRE(equal_ab == 0);
    REQUIRE(equal_ac == 0);
}

TEST_CASE("uniforms stay inside the open interval") {
    RandomStream s(3, 0);
    for (int i = 0; i < 100'000; ++i) {
        double u = s.next_uniform();
        REQUIRE(u > 0.0);
        REQUIRE(u < 1.0);
    }
}

TEST_CASE("uniform sample mean within the CLT band") {
    const std::size_t n = 1'000'000;
    RandomStream s(12345, 0);
    KahanSum acc;
    for (std::size_t i = 0; i < n; ++i) acc.add(s.next_uniform());
    double m = acc.value() / static_cast<double>(n);
    // Var U = 1/12, 3 sigma band
    REQUIRE(std::fabs(m - 0.5) < 3.0 / std::sqrt(12.0) * 1e-3);
}

TEST_CASE("uniform KS statistic at 1e5 samples") {
    RandomStream s(2024, 5);
    std::vector<double> v(100'000);
    for (auto& x : v) x = s.next_uniform();
    double ks = test_util::ks_statistic(v, [](double x) { return x; });
    REQUIRE(ks < 1.63 / std::sqrt(1e5));
}

TEST_CASE("substream ids are stable and distinct") {
    auto a = substream_id(StreamPurpose::sample_coordinate, 0);
    auto b = substream_id(StreamPurpose::sample_coordinate, 1);
    auto c = substream_id(StreamPurpose::oracle, 0);
    REQUIRE(a != b);
    REQUIRE(a != c);
    REQUIRE(a == substream_id(StreamPurpose::sample_coordinate, 0));
}
