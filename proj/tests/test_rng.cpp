#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "qkdsim/rng.hpp"

using qkdsim::Rng;

TEST_CASE("raw stream matches the published splitmix64 vector", "[rng]") {
    // First outputs of splitmix64 from state 0, as published with the
    // reference implementation.
    const std::array<std::uint64_t, 4> expected = {
        0xE220A8397B1DCDAFull, 0x6E789E6AA1B965F4ull, 0x06C45D188009454Full,
        0xF88BB8A8724C81ECull};
    Rng r(0);
    for (std::uint64_t e : expected) REQUIRE(r.next_u64() == e);
}

TEST_CASE("per-round streams are frozen", "[rng]") {
    // Regression pins: round records must stay reproducible across
    // versions, so the derivation itself may never drift.
    REQUIRE(Rng::for_round(42, 0).next_u64() == 0xC5A57E8172F0A9D2ull);
    REQUIRE(Rng::for_round(42, 1).next_u64() == 0x6471F70293F908CEull);
}

TEST_CASE("same seed gives the same stream", "[rng]") {
    Rng a(123456789), b(123456789);
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());

    Rng c = Rng::for_round(7, 3), d = Rng::for_round(7, 3);
    for (int i = 0; i < 100; ++i) REQUIRE(c.next_u64() == d.next_u64());
}

TEST_CASE("adjacent rounds are decorrelated", "[rng]") {
    // Adjacent round indices must not produce overlapping streams.
    Rng a = Rng::for_round(42, 10), b = Rng::for_round(42, 11);
    int equal = 0;
    for (int i = 0; i < 64; ++i) equal += a.next_u64() == b.next_u64();
    REQUIRE(equal == 0);
}

TEST_CASE("uniform lies in the half-open unit interval", "[rng]") {
    Rng r(1);
    for (int i = 0; i < 100000; ++i) {
        const double u = r.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
    }
}

TEST_CASE("uniform mean within four standard errors", "[rng]") {
    Rng r(2);
    const int n = 100000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += r.uniform();
    const double mean = sum / n;
    const double se = std::sqrt(1.0 / 12.0 / n);
    REQUIRE(std::abs(mean - 0.5) <= 4.0 * se);
}

TEST_CASE("bit is balanced within four standard errors", "[rng]") {
    Rng r(3);
    const int n = 100000;
    int ones = 0;
    for (int i = 0; i < n; ++i) ones += r.bit();
    const double se = std::sqrt(0.25 * n);
    REQUIRE(std::abs(ones - 0.5 * n) <= 4.0 * se);
}

TEST_CASE("index stays in range and covers all values", "[rng]") {
    Rng r(4);
    std::vector<int> counts(6, 0);
    const int n = 60000;
    for (int i = 0; i < n; ++i) {
        const std::uint32_t k = r.index(6);
        REQUIRE(k < 6);
        ++counts[k];
    }
    // Each bucket expects n/6 = 10000, sd ~ 91; a 4-sigma band.
    for (int c : counts) REQUIRE(std::abs(c - 10000) <= 4 * 92);
}

TEST_CASE("bernoulli edge probabilities", "[rng]") {
    Rng r(5);
    for (int i = 0; i < 1000; ++i) REQUIRE_FALSE(r.bernoulli(0.0));
    for (int i = 0; i < 1000; ++i) REQUIRE(r.bernoulli(1.0));
}
