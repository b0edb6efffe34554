#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qkdsim/photonics.hpp"
#include "qkdsim/protocols.hpp"
#include "qkdsim/rng.hpp"

namespace qkdsim {

enum class SourceScheme { ImprovedDirectPm, ConventionalBs };

/// Heralded single-photon encoder. The conventional encoder splits the
/// photon across N delay paths with passive couplers, so only 1/N of the
/// amplitude survives recombination; the direct-modulation encoder shapes
/// the waveform without splitters and loses nothing beyond reshaping.
struct SourceConfig {
    SourceScheme scheme = SourceScheme::ImprovedDirectPm;
    std::size_t n_slots = 2;
    double slot_period_ns = 100.0;
    double shaping_loss = 0.0;      // probability in [0, 1)
    double pair_rate_hz = 1.0e7;

    void validate() const {
        if (n_slots == 0) throw std::domain_error("SourceConfig: n_slots must be positive");
        if (!(slot_period_ns > 0.0))
            throw std::invalid_argument("SourceConfig: slot_period must be positive");
        if (!(shaping_loss >= 0.0 && shaping_loss < 1.0))
            throw std::invalid_argument("SourceConfig: shaping_loss must be in [0,1)");
        if (!(pair_rate_hz > 0.0))
            throw std::invalid_argument("SourceConfig: pair_rate must be positive");
    }

    double survival_probability() const {
        const double base = 1.0 - shaping_loss;
        return scheme == SourceScheme::ConventionalBs
                   ? base / static_cast<double>(n_slots)
                   : base;
    }
};

/// Fiber link. All slots of one photon see the same drift, so the common
/// phase cancels in every interference term downstream.
struct ChannelConfig {
    double length_km = 0.0;
    double loss_db_per_km = 0.0;
    double common_phase_drift_rad = 0.0;

    void validate() const {
        if (length_km < 0.0) throw std::invalid_argument("ChannelConfig: negative length");
        if (loss_db_per_km < 0.0) throw std::invalid_argument("ChannelConfig: negative loss");
    }

    double survival_probability() const {
        return std::pow(10.0, -length_km * loss_db_per_km / 10.0);
    }
};

struct DetectorConfig {
    double efficiency = 1.0;
    double dark_count_prob_per_gate = 0.0;
    double jitter_sigma_ns = 0.0;

    void validate() const {
        if (!(efficiency >= 0.0 && efficiency <= 1.0))
            throw std::invalid_argument("DetectorConfig: efficiency must be in [0,1]");
        if (!(dark_count_prob_per_gate >= 0.0 && dark_count_prob_per_gate <= 1.0))
            throw std::invalid_argument("DetectorConfig: dark count prob must be in [0,1]");
        if (jitter_sigma_ns < 0.0)
            throw std::invalid_argument("DetectorConfig: negative jitter");
    }
};

/// Probability that a detection time lands outside its slot: arrival
/// uniform over the slot, Gaussian timing jitter on top. Computed by
/// Simpson quadrature of the Gaussian tail, P = (2/T) Int_0^T Phi(-t/sigma) dt,
/// so it stays correct at large sigma where the linearized estimate breaks.
inline double mis_bin_probability(double jitter_sigma_ns, double slot_period_ns) {
    if (!(slot_period_ns > 0.0))
        throw std::invalid_argument("mis_bin_probability: slot_period must be positive");
    if (jitter_sigma_ns < 0.0)
        throw std::invalid_argument("mis_bin_probability: negative jitter");
    if (jitter_sigma_ns == 0.0) return 0.0;
    // The integrand is negligible past 12 sigma.
    const double upper = std::min(slot_period_ns, 12.0 * jitter_sigma_ns);
    const int panels = 1024;
    const double h = upper / panels;
    const double inv = 1.0 / (jitter_sigma_ns * std::sqrt(2.0));
    const auto tail = [inv](double t) { return 0.5 * std::erfc(t * inv); };
    double sum = tail(0.0) + tail(upper);
    for (int i = 1; i < panels; ++i) sum += tail(i * h) * (i % 2 ? 4.0 : 2.0);
    return std::min(1.0, (2.0 / slot_period_ns) * (h / 3.0) * sum);
}

namespace detail {
/// detect() sits in the Monte Carlo hot path; the quadrature result only
/// depends on (sigma, T), so memoize the last pair per thread.
inline double cached_mis_bin_probability(double sigma, double period) {
    thread_local double c_sigma = -1.0, c_period = -1.0, c_p = 0.0;
    if (sigma != c_sigma || period != c_period) {
        c_sigma = sigma;
        c_period = period;
        c_p = mis_bin_probability(sigma, period);
    }
    return c_p;
}
}  // namespace detail

/// Emit a phase-modulated rectangular photon, or nothing if the encoder
/// loses it. Survival is (1 - shaping_loss) times 1/N for the conventional
/// splitter encoder, and (1 - shaping_loss) alone for direct modulation.
inline std::optional<TimeBinState> emit(const SourceConfig& source,
                                        const PhasePattern& pattern, Rng& rng) {
    if (pattern.size() != source.n_slots)
        throw std::invalid_argument("emit: pattern length does not match n_slots");
    if (!rng.bernoulli(source.survival_probability())) return std::nullopt;
    return make_rect_state(source.n_slots, pattern, source.slot_period_ns);
}

/// Propagate through the fiber: Bernoulli survival at 10^(-L*alpha/10),
/// then a common phase on every slot.
inline std::optional<TimeBinState> transmit(const TimeBinState& state,
                                            const ChannelConfig& channel, Rng& rng) {
    if (!rng.bernoulli(channel.survival_probability())) return std::nullopt;
    if (channel.common_phase_drift_rad == 0.0) return state;
    const std::complex<double> drift = unit_phasor(channel.common_phase_drift_rad);
    std::vector<std::complex<double>> amps(state.n_slots());
    for (std::size_t k = 0; k < state.n_slots(); ++k) amps[k] = state.amplitude(k) * drift;
    return TimeBinState(std::move(amps), state.slot_period_ns());
}

/// Imperfect detection of one analyzer output distribution.
///
/// With probability `efficiency` the photon registers and its click is
/// drawn from `dist`; timing jitter then displaces the recorded instance
/// by -1 or +1, each with the mis-binning probability (clamped to the
/// instance range). Every (detector, instance) gate may also fire a dark
/// count. One fired gate yields an event (Ok for the photon gate,
/// DarkSuspect for a lone dark count); two or more yield Ambiguous.
inline std::optional<DetectionEvent> detect(const DetectionDistribution& dist,
                                            const DetectorConfig& det,
                                            double slot_period_ns, Rng& rng) {
    const std::size_t n_inst = dist.n_instances();

    std::optional<std::pair<Detector, std::size_t>> photon;
    if (rng.bernoulli(det.efficiency)) photon = sample_detection(dist, rng.uniform());

    if (photon && det.jitter_sigma_ns > 0.0) {
        const double p_mis = std::min(
            detail::cached_mis_bin_probability(det.jitter_sigma_ns, slot_period_ns), 0.5);
        const double u = rng.uniform();
        std::size_t j = photon->second;
        if (u < p_mis) {
            if (j > 0) --j;
        } else if (u < 2.0 * p_mis) {
            if (j + 1 < n_inst) ++j;
        }
        photon->second = j;
    }

    std::size_t clicks = 0;
    std::optional<DetectionEvent> first;
    bool first_is_photon = false;
    const double dark = det.dark_count_prob_per_gate;
    for (Detector d : {Detector::D1, Detector::D2}) {
        for (std::size_t j = 0; j < n_inst; ++j) {
            const bool photon_here = photon && photon->first == d && photon->second == j;
            const bool dark_here = dark > 0.0 && rng.bernoulli(dark);
            if (!photon_here && !dark_here) continue;
            ++clicks;
            if (!first) {
                first = DetectionEvent{d, j, EventFlag::Ok};
                first_is_photon = photon_here;
            }
        }
    }

    if (clicks == 0) return std::nullopt;
    if (clicks > 1) {
        first->flag = EventFlag::Ambiguous;
        return first;
    }
    first->flag = first_is_photon ? EventFlag::Ok : EventFlag::DarkSuspect;
    return first;
}

/// Hard round-rate ceiling of the source: one photon spans N*T.
inline double max_clock_rate_hz(const SourceConfig& source) {
    return 1.0e9 / (static_cast<double>(source.n_slots) * source.slot_period_ns);
}

}  // namespace qkdsim
