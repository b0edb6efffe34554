#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstddef>
#include <stdexcept>

#include "qkdsim/analytics.hpp"
#include "qkdsim/devices.hpp"
#include "qkdsim/protocols.hpp"

using namespace qkdsim;

TEST_CASE("two-basis efficiencies: direct modulation doubles the rate", "[analytics]") {
    const auto conv = bb84_efficiency(false);
    REQUIRE(conv.sending == 0.5);
    REQUIRE(conv.receiving == 0.25);
    REQUIRE(conv.total == 0.125);
    const auto imp = bb84_efficiency(true);
    REQUIRE(imp.sending == 1.0);
    REQUIRE(imp.receiving == 0.25);
    REQUIRE(imp.total == 0.25);
    REQUIRE(imp.total / conv.total == 2.0);
    REQUIRE(conv.n_slots == 2);
}

TEST_CASE("differential-phase efficiencies scale as (n-1)/n vs (n-1)/n^2",
          "[analytics]") {
    const auto conv3 = dps_efficiency(3, false);
    REQUIRE_THAT(conv3.sending, Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-15));
    REQUIRE_THAT(conv3.receiving, Catch::Matchers::WithinAbs(2.0 / 3.0, 1e-15));
    REQUIRE_THAT(conv3.total, Catch::Matchers::WithinAbs(2.0 / 9.0, 1e-15));
    const auto imp3 = dps_efficiency(3, true);
    REQUIRE(imp3.sending == 1.0);
    REQUIRE_THAT(imp3.total, Catch::Matchers::WithinAbs(2.0 / 3.0, 1e-15));
    REQUIRE_THAT(imp3.total / conv3.total, Catch::Matchers::WithinAbs(3.0, 1e-12));

    for (std::size_t n = 2; n <= 24; ++n) {
        const auto c = dps_efficiency(n, false);
        const auto i = dps_efficiency(n, true);
        REQUIRE_THAT(c.total,
                     Catch::Matchers::WithinAbs((n - 1.0) / (double(n) * n), 1e-15));
        REQUIRE_THAT(i.total, Catch::Matchers::WithinAbs((n - 1.0) / n, 1e-15));
        REQUIRE_THAT(i.total / c.total, Catch::Matchers::WithinAbs(double(n), 1e-9));
    }

    // The direct-modulation efficiency climbs toward one; the split source peaks
    // at n = 2 and falls off.
    double prev = dps_efficiency(2, true).total;
    for (std::size_t n = 3; n <= 24; ++n) {
        const double cur = dps_efficiency(n, true).total;
        REQUIRE(cur > prev);
        prev = cur;
    }
    REQUIRE(dps_efficiency(2, false).total == 0.25);
    for (std::size_t n = 3; n <= 24; ++n) {
        REQUIRE(dps_efficiency(n, false).total < dps_efficiency(n - 1, false).total);
    }

    REQUIRE_THROWS_AS(dps_efficiency(1, true), std::domain_error);
    REQUIRE_THROWS_AS(dps_efficiency(0, false), std::domain_error);
}

TEST_CASE("ideal arrival-instance weights are 1:2:...:2:1", "[analytics]") {
    for (std::size_t n = 2; n <= 10; ++n) {
        const auto m = instance_marginals(n);
        REQUIRE(m.size() == n + 1);
        double sum = 0.0;
        for (double w : m) sum += w;
        REQUIRE_THAT(sum, Catch::Matchers::WithinAbs(1.0, 1e-12));
        REQUIRE(m.front() == 1.0 / (2.0 * n));
        REQUIRE(m.back() == 1.0 / (2.0 * n));
        for (std::size_t j = 1; j <= n - 1; ++j) REQUIRE(m[j] == 2.0 / (2.0 * n));
    }
}

TEST_CASE("intercept-resend with matching hardware costs one bit in four",
          "[analytics]") {
    REQUIRE(intercept_resend_qber(Protocol::Bb84) == 0.25);
    REQUIRE(intercept_resend_qber(Protocol::Dps) == 0.25);
}

TEST_CASE("sifted-rate chains multiply through the link budget", "[analytics]") {
    // Ideal three-slot direct-modulation run, clock-limited: every round keeps
    // (n-1)/n of the sift, so 1e9/300 * 2/3 = 1e9/450.
    SourceConfig src;
    src.scheme = SourceScheme::ImprovedDirectPm;
    src.n_slots = 3;
    ChannelConfig ch;
    DetectorConfig det;
    REQUIRE_THAT(sifted_rate_hz(src, ch, det, dps_efficiency(3, true)),
                 Catch::Matchers::WithinAbs(1.0e9 / 450.0, 1e-6));

    // Conventional two-basis source at 5 MHz pairs: 5e6 * 1/8.
    SourceConfig bb;
    bb.scheme = SourceScheme::ConventionalBs;
    bb.n_slots = 2;
    bb.pair_rate_hz = 5.0e6;
    REQUIRE_THAT(sifted_rate_hz(bb, ch, det, bb84_efficiency(false)),
                 Catch::Matchers::WithinAbs(625000.0, 1e-9));

    // Lossy custom chain, checked factor by factor.
    SourceConfig lsrc;
    lsrc.scheme = SourceScheme::ConventionalBs;
    lsrc.n_slots = 3;
    lsrc.pair_rate_hz = 2.0e6;
    lsrc.shaping_loss = 0.1;
    ChannelConfig lch;
    lch.length_km = 1.0;
    lch.loss_db_per_km = 2.0;
    DetectorConfig ldet;
    ldet.efficiency = 0.8;
    const double expect = 2.0e6 * 0.9 * (1.0 / 3.0) * std::pow(10.0, -0.2) * 0.8 *
                          (2.0 / 3.0);
    REQUIRE_THAT(sifted_rate_hz(lsrc, lch, ldet, dps_efficiency(3, false)),
                 Catch::Matchers::WithinAbs(expect, 1e-9));

    // The clock ceiling binds when the pair source outruns it.
    SourceConfig fast = src;
    fast.pair_rate_hz = 1.0e12;
    REQUIRE(sifted_rate_hz(fast, ch, det, dps_efficiency(3, true)) ==
            sifted_rate_hz(src, ch, det, dps_efficiency(3, true)));
}
