#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace qkdsim {

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Probability-sum tolerance for state and distribution invariants.
inline constexpr double kProbTolerance = 1e-12;

enum class Detector { D1, D2 };

/// Unit-magnitude phasor e^{i*theta}.
///
/// The angle is reduced into [0, 2*pi) and the upper half interval is
/// evaluated as the negation of the lower half. Both the fmod reduction
/// and the subtraction of pi are exact in IEEE double (Sterbenz), so
/// phasor(theta + pi) == -phasor(theta) bit-for-bit whenever theta + pi
/// itself was computed exactly. That makes detector-swap symmetry and the
/// zero-click interference arms exact rather than approximate.
inline std::complex<double> unit_phasor(double theta) {
    double t = std::fmod(theta, kTwoPi);
    if (t < 0.0) t += kTwoPi;
    if (t >= kPi) {
        std::complex<double> p = std::polar(1.0, t - kPi);
        return {-p.real(), -p.imag()};
    }
    return std::polar(1.0, t);
}

/// Per-slot modulation angles, one per time slot, stored modulo 2*pi.
class PhasePattern {
public:
    PhasePattern() = default;

    explicit PhasePattern(std::vector<double> phases) : phases_(std::move(phases)) {
        for (double& p : phases_) {
            p = std::fmod(p, kTwoPi);
            if (p < 0.0) p += kTwoPi;
        }
    }

    std::size_t size() const { return phases_.size(); }
    double operator[](std::size_t k) const { return phases_[k]; }
    const std::vector<double>& phases() const { return phases_; }

private:
    std::vector<double> phases_;
};

/// Single-photon wavefunction over N equal time slots of period T.
///
/// Invariant: the amplitudes carry unit total probability; a TimeBinState
/// always represents a photon that is present. Loss is modeled upstream as
/// the absence of a state.
class TimeBinState {
public:
    TimeBinState(std::vector<std::complex<double>> amplitudes, double slot_period_ns)
        : amplitudes_(std::move(amplitudes)), slot_period_ns_(slot_period_ns) {
        if (amplitudes_.empty())
            throw std::domain_error("TimeBinState: need at least one slot");
        if (!(slot_period_ns_ > 0.0))
            throw std::invalid_argument("TimeBinState: slot_period must be positive");
        double norm = 0.0;
        for (const auto& a : amplitudes_) norm += std::norm(a);
        if (std::abs(norm - 1.0) > kProbTolerance)
            throw std::invalid_argument("TimeBinState: amplitudes are not normalized");
    }

    std::size_t n_slots() const { return amplitudes_.size(); }
    double slot_period_ns() const { return slot_period_ns_; }
    const std::complex<double>& amplitude(std::size_t k) const { return amplitudes_[k]; }
    const std::vector<std::complex<double>>& amplitudes() const { return amplitudes_; }

    double squared_norm() const {
        double norm = 0.0;
        for (const auto& a : amplitudes_) norm += std::norm(a);
        return norm;
    }

private:
    std::vector<std::complex<double>> amplitudes_;
    double slot_period_ns_;
};

/// Click probabilities at the analyzer output, indexed by (detector,
/// time instance j = 0..N). Instance j pairs short-path slot j with
/// long-path slot j-1, so an N-slot input spreads over N+1 instances.
class DetectionDistribution {
public:
    DetectionDistribution(std::vector<double> p_d1, std::vector<double> p_d2,
                          double loss_mass)
        : p_d1_(std::move(p_d1)), p_d2_(std::move(p_d2)), loss_mass_(loss_mass) {
        if (p_d1_.size() != p_d2_.size() || p_d1_.empty())
            throw std::invalid_argument("DetectionDistribution: detector rows must match");
        double total = loss_mass_;
        for (double p : p_d1_) {
            if (p < 0.0) throw std::invalid_argument("DetectionDistribution: negative entry");
            total += p;
        }
        for (double p : p_d2_) {
            if (p < 0.0) throw std::invalid_argument("DetectionDistribution: negative entry");
            total += p;
        }
        if (loss_mass_ < 0.0)
            throw std::invalid_argument("DetectionDistribution: negative loss mass");
        if (std::abs(total - 1.0) > kProbTolerance)
            throw std::invalid_argument("DetectionDistribution: probabilities do not sum to 1");
    }

    /// Number of time instances (N+1 for an N-slot input).
    std::size_t n_instances() const { return p_d1_.size(); }
    double loss_mass() const { return loss_mass_; }

    double p(Detector d, std::size_t instance) const {
        return d == Detector::D1 ? p_d1_[instance] : p_d2_[instance];
    }

    const std::vector<double>& row(Detector d) const {
        return d == Detector::D1 ? p_d1_ : p_d2_;
    }

    /// Probability of a click at instance j on either detector.
    double instance_marginal(std::size_t j) const { return p_d1_[j] + p_d2_[j]; }

private:
    std::vector<double> p_d1_;
    std::vector<double> p_d2_;
    double loss_mass_;
};

/// Rectangular-envelope state: amplitude e^{i*theta_k}/sqrt(N) in slot k.
inline TimeBinState make_rect_state(std::size_t n_slots, const PhasePattern& pattern,
                                    double slot_period_ns) {
    if (n_slots == 0)
        throw std::domain_error("make_rect_state: n_slots must be positive");
    if (pattern.size() != n_slots)
        throw std::invalid_argument("make_rect_state: pattern length does not match n_slots");
    const double scale = 1.0 / std::sqrt(static_cast<double>(n_slots));
    std::vector<std::complex<double>> amps(n_slots);
    for (std::size_t k = 0; k < n_slots; ++k) amps[k] = unit_phasor(pattern[k]) * scale;
    return TimeBinState(std::move(amps), slot_period_ns);
}

/// Multiply slot k by e^{i*theta_k}. Norm is preserved.
inline TimeBinState apply_phase_pattern(const TimeBinState& state, const PhasePattern& pattern) {
    if (pattern.size() != state.n_slots())
        throw std::invalid_argument("apply_phase_pattern: pattern length does not match state");
    std::vector<std::complex<double>> amps(state.n_slots());
    for (std::size_t k = 0; k < state.n_slots(); ++k)
        amps[k] = state.amplitude(k) * unit_phasor(pattern[k]);
    return TimeBinState(std::move(amps), state.slot_period_ns());
}

/// Unbalanced Mach-Zehnder analyzer with delay T and phase phi_b in the
/// long arm. Both splitters are 50/50 with transmission 1/sqrt(2) and
/// reflection i/sqrt(2); the long arm takes the reflection at the first
/// splitter. With a_{-1} = a_N = 0:
///
///   P(D1, j) = |a_j - e^{i*phi_b} * a_{j-1}|^2 / 4
///   P(D2, j) = |a_j + e^{i*phi_b} * a_{j-1}|^2 / 4
///
/// The analyzer itself is lossless: loss_mass is 0 here by construction.
inline DetectionDistribution mz_distribution(const TimeBinState& state, double phi_b) {
    const std::size_t n = state.n_slots();
    const std::complex<double> phasor = unit_phasor(phi_b);
    std::vector<double> p1(n + 1), p2(n + 1);
    for (std::size_t j = 0; j <= n; ++j) {
        const std::complex<double> a_short =
            j < n ? state.amplitude(j) : std::complex<double>(0.0, 0.0);
        const std::complex<double> a_long =
            j > 0 ? phasor * state.amplitude(j - 1) : std::complex<double>(0.0, 0.0);
        p1[j] = 0.25 * std::norm(a_short - a_long);
        p2[j] = 0.25 * std::norm(a_short + a_long);
    }
    return DetectionDistribution(std::move(p1), std::move(p2), 0.0);
}

/// Inverse-CDF sample of a detection outcome from a unit-interval draw.
///
/// Outcomes are enumerated in fixed order: D1 with ascending instance,
/// then D2 with ascending instance, then loss. A draw past the accumulated
/// total (float rounding at the top edge) resolves to loss when loss_mass
/// is positive, otherwise to the last outcome with positive probability.
inline std::optional<std::pair<Detector, std::size_t>> sample_detection(
    const DetectionDistribution& dist, double draw) {
    double cum = 0.0;
    std::optional<std::pair<Detector, std::size_t>> last;
    for (Detector d : {Detector::D1, Detector::D2}) {
        for (std::size_t j = 0; j < dist.n_instances(); ++j) {
            const double p = dist.p(d, j);
            if (p <= 0.0) continue;
            cum += p;
            last = {d, j};
            if (draw < cum) return last;
        }
    }
    if (dist.loss_mass() > 0.0) return std::nullopt;
    return last;
}

}  // namespace qkdsim
