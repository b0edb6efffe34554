#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qkdsim/photonics.hpp"
#include "qkdsim/rng.hpp"

namespace qkdsim {

enum class Protocol { Bb84, Dps };

enum class Basis { Z, X };

/// Analyzer phase for a measurement basis: Z -> 0, X -> pi/2.
inline double basis_phase(Basis b) { return b == Basis::Z ? 0.0 : kPi / 2.0; }

/// Slot-1 modulation angle for a BB84 (basis, bit) pair:
///   (Z,0) -> 0, (Z,1) -> pi, (X,0) -> pi/2, (X,1) -> 3*pi/2.
/// Bit 0 maps to the first element of each basis set.
inline double bb84_phase(Basis basis, int bit) {
    if (basis == Basis::Z) return bit ? kPi : 0.0;
    return bit ? kPi + kPi / 2.0 : kPi / 2.0;
}

/// Alice's per-round BB84 draw: a basis, a bit, and the induced two-slot
/// pattern (0, delta_theta).
struct Bb84AliceChoice {
    Basis basis = Basis::Z;
    int bit = 0;

    double delta_theta() const { return bb84_phase(basis, bit); }
    PhasePattern pattern() const { return PhasePattern({0.0, delta_theta()}); }
};

inline Bb84AliceChoice bb84_alice_prepare(Rng& rng) {
    Bb84AliceChoice c;
    c.basis = rng.bit() ? Basis::X : Basis::Z;
    c.bit = rng.bit() ? 1 : 0;
    return c;
}

/// Alice's per-round DPS draw: N slot phases, each 0 or pi. Key bit k
/// (k = 1..N-1) is the phase difference between slots k and k-1:
/// 0 -> bit 0, pi -> bit 1.
class DpsAliceChoice {
public:
    explicit DpsAliceChoice(std::vector<double> slot_phases)
        : slot_phases_(std::move(slot_phases)) {
        if (slot_phases_.size() < 2)
            throw std::domain_error("DpsAliceChoice: need at least 2 slots");
        for (double p : slot_phases_)
            if (p != 0.0 && p != kPi)
                throw std::invalid_argument("DpsAliceChoice: phases must be 0 or pi");
    }

    static DpsAliceChoice random(std::size_t n_slots, Rng& rng) {
        std::vector<double> phases(n_slots);
        for (double& p : phases) p = rng.bit() ? kPi : 0.0;
        return DpsAliceChoice(std::move(phases));
    }

    std::size_t n_slots() const { return slot_phases_.size(); }
    const std::vector<double>& slot_phases() const { return slot_phases_; }
    PhasePattern pattern() const { return PhasePattern(slot_phases_); }

    /// Key bit carried at interior instance k, 1 <= k <= N-1.
    int key_bit(std::size_t k) const {
        return slot_phases_[k] != slot_phases_[k - 1] ? 1 : 0;
    }

private:
    std::vector<double> slot_phases_;
};

enum class EventFlag { Ok, Ambiguous, DarkSuspect };

/// A click at Bob's (or Eve's) analyzer output.
struct DetectionEvent {
    Detector detector = Detector::D1;
    std::size_t instance = 0;
    EventFlag flag = EventFlag::Ok;

    bool operator==(const DetectionEvent&) const = default;
};

enum class Verdict {
    Key,
    DiscardEdge,
    DiscardBasisMismatch,
    DiscardNoClick,
    DiscardAmbiguous,
};

/// Result of the post-detection classical sifting exchange. Bits are
/// present exactly when the verdict is Key.
struct SiftOutcome {
    Verdict verdict = Verdict::DiscardNoClick;
    std::optional<int> alice_bit;
    std::optional<int> bob_bit;

    static SiftOutcome key(int alice, int bob) {
        return SiftOutcome{Verdict::Key, alice, bob};
    }
    static SiftOutcome discard(Verdict v) { return SiftOutcome{v, {}, {}}; }

    bool operator==(const SiftOutcome&) const = default;
};

/// Detector-to-bit convention, fixed globally: a matched phase difference
/// interferes onto D2, so D2 carries bit 0 and D1 carries bit 1.
inline int detector_bit(Detector d) { return d == Detector::D2 ? 0 : 1; }

/// BB84 sifting. A key bit needs an unflagged click at the interior
/// instance with matching bases. Basis mismatch discards regardless of
/// where the click fell.
inline SiftOutcome bb84_bob_measure_and_sift(const Bb84AliceChoice& choice,
                                             const std::optional<DetectionEvent>& event,
                                             Basis bob_basis) {
    if (!event) return SiftOutcome::discard(Verdict::DiscardNoClick);
    if (event->flag != EventFlag::Ok) return SiftOutcome::discard(Verdict::DiscardAmbiguous);
    if (bob_basis != choice.basis) return SiftOutcome::discard(Verdict::DiscardBasisMismatch);
    if (event->instance != 1) return SiftOutcome::discard(Verdict::DiscardEdge);
    return SiftOutcome::key(choice.bit, detector_bit(event->detector));
}

/// DPS sifting. Interior instances 1..N-1 carry key bits; Bob announces
/// the instance and Alice reads the bit off her own modulation pattern.
inline SiftOutcome dps_bob_sift(const DpsAliceChoice& choice,
                                const std::optional<DetectionEvent>& event) {
    if (!event) return SiftOutcome::discard(Verdict::DiscardNoClick);
    if (event->flag != EventFlag::Ok) return SiftOutcome::discard(Verdict::DiscardAmbiguous);
    const std::size_t n = choice.n_slots();
    if (event->instance == 0 || event->instance >= n)
        return SiftOutcome::discard(Verdict::DiscardEdge);
    return SiftOutcome::key(choice.key_bit(event->instance), detector_bit(event->detector));
}

/// Simple intercept/resend attack on DPS. Eve measures with an analyzer
/// identical to Bob's (phi = 0). An interior click at instance j tells her
/// the phase difference between slots j-1 and j; she resends a two-slot
/// photon over those slots carrying it. An edge click collapses the photon
/// to the outermost slot, which she resends as a single-slot state.
inline std::optional<TimeBinState> dps_eve_intercept_resend(const TimeBinState& state,
                                                            Rng& rng) {
    const std::size_t n = state.n_slots();
    const auto outcome = sample_detection(mz_distribution(state, 0.0), rng.uniform());
    if (!outcome) return std::nullopt;
    const auto [detector, instance] = *outcome;
    std::vector<std::complex<double>> amps(n, {0.0, 0.0});
    if (instance == 0) {
        amps[0] = {1.0, 0.0};
    } else if (instance == n) {
        amps[n - 1] = {1.0, 0.0};
    } else {
        const double r = 1.0 / std::sqrt(2.0);
        amps[instance - 1] = {r, 0.0};
        amps[instance] = {detector == Detector::D2 ? r : -r, 0.0};
    }
    return TimeBinState(std::move(amps), state.slot_period_ns());
}

/// Intercept/resend attack on PE-BB84. Eve measures the two-slot qubit
/// projectively in a random basis {0,pi} or {pi/2,3pi/2}, infers a bit,
/// and resends the full two-slot state encoding that bit in her basis.
inline std::optional<TimeBinState> bb84_eve_intercept_resend(const TimeBinState& state,
                                                             Rng& rng) {
    if (state.n_slots() != 2)
        throw std::invalid_argument("bb84_eve_intercept_resend: need a 2-slot state");
    const Basis eve_basis = rng.bit() ? Basis::X : Basis::Z;
    // P(bit) projects onto (|0> + e^{i*theta_bit}|1>)/sqrt(2).
    const std::complex<double> phasor0 = unit_phasor(bb84_phase(eve_basis, 0));
    const double p0 =
        0.5 * std::norm(state.amplitude(0) + std::conj(phasor0) * state.amplitude(1));
    const int eve_bit = rng.bernoulli(p0) ? 0 : 1;
    return make_rect_state(2, PhasePattern({0.0, bb84_phase(eve_basis, eve_bit)}),
                           state.slot_period_ns());
}

}  // namespace qkdsim
