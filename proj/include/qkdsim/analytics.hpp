#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "qkdsim/devices.hpp"
#include "qkdsim/protocols.hpp"

namespace qkdsim {

// Closed-form key-creation efficiencies. "sending" is the probability that a
// round survives state preparation, "receiving" the probability that a photon
// reaching an ideal analyzer yields a usable key event. total == sending *
// receiving always holds by construction.
struct EfficiencyReport {
    Protocol protocol;
    SourceScheme scheme;
    std::size_t n_slots;
    double sending;
    double receiving;
    double total;
};

inline EfficiencyReport bb84_efficiency(bool improved) {
    EfficiencyReport r;
    r.protocol = Protocol::Bb84;
    r.scheme = improved ? SourceScheme::ImprovedDirectPm : SourceScheme::ConventionalBs;
    r.n_slots = 2;
    r.sending = improved ? 1.0 : 0.5;
    // Basis match (1/2) times interior-instance probability (1/2).
    r.receiving = 0.25;
    r.total = r.sending * r.receiving;
    return r;
}

inline EfficiencyReport dps_efficiency(std::size_t n_slots, bool improved) {
    if (n_slots < 2) throw std::domain_error("dps_efficiency: n_slots must be >= 2");
    EfficiencyReport r;
    r.protocol = Protocol::Dps;
    r.scheme = improved ? SourceScheme::ImprovedDirectPm : SourceScheme::ConventionalBs;
    r.n_slots = n_slots;
    const double n = static_cast<double>(n_slots);
    r.sending = improved ? 1.0 : 1.0 / n;
    r.receiving = (n - 1.0) / n;
    r.total = r.sending * r.receiving;
    return r;
}

// Probability of a click landing in time instance j, conditional on a click,
// for an equal-amplitude n-slot state averaged over phase patterns:
// (1, 2, ..., 2, 1) / (2n).
inline std::vector<double> instance_marginals(std::size_t n_slots) {
    if (n_slots < 1) throw std::domain_error("instance_marginals: n_slots must be >= 1");
    const double n = static_cast<double>(n_slots);
    std::vector<double> m(n_slots + 1, 1.0 / n);
    m.front() = 1.0 / (2.0 * n);
    m.back() = 1.0 / (2.0 * n);
    return m;
}

// Sifted-key error rate under a full intercept/resend attack with the
// matching single-photon analyzer. Both protocols give 1/4.
inline double intercept_resend_qber(Protocol) { return 0.25; }

// Practical sifted-key rate in bits per second.
inline double sifted_rate_hz(const SourceConfig& source, const ChannelConfig& channel,
                             const DetectorConfig& detector, const EfficiencyReport& report) {
    source.validate();
    channel.validate();
    detector.validate();
    const double clock = std::min(source.pair_rate_hz, max_clock_rate_hz(source));
    return clock * (1.0 - source.shaping_loss) * report.sending * channel.survival_probability() *
           detector.efficiency * report.receiving;
}

}  // namespace qkdsim
