#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <thread>
#include <utility>
#include <vector>

#include "qkdsim/analytics.hpp"
#include "qkdsim/devices.hpp"
#include "qkdsim/photonics.hpp"
#include "qkdsim/protocols.hpp"
#include "qkdsim/rng.hpp"
#include "qkdsim/stats.hpp"

namespace qkdsim {

inline constexpr std::size_t kNumVerdicts = 5;

/// One fully specified Monte Carlo experiment. Source-side fields live here
/// flat (scheme, n_slots, slot period, ...) so the config has a single
/// source of truth; source() assembles the device struct on demand.
struct ExperimentConfig {
    Protocol protocol = Protocol::Dps;
    SourceScheme scheme = SourceScheme::ImprovedDirectPm;
    std::size_t n_slots = 3;
    std::uint64_t trials = 1'000'000;
    std::uint64_t master_seed = 42;
    double attack_fraction = 0.0;
    double slot_period_ns = 100.0;
    double shaping_loss = 0.0;
    double pair_rate_hz = 1.0e7;
    ChannelConfig channel{};
    DetectorConfig detector{};

    bool improved() const { return scheme == SourceScheme::ImprovedDirectPm; }

    SourceConfig source() const {
        SourceConfig s;
        s.scheme = scheme;
        s.n_slots = n_slots;
        s.slot_period_ns = slot_period_ns;
        s.shaping_loss = shaping_loss;
        s.pair_rate_hz = pair_rate_hz;
        return s;
    }

    void validate() const {
        if (n_slots < 2)
            throw std::invalid_argument("ExperimentConfig: n_slots must be >= 2");
        if (protocol == Protocol::Bb84 && n_slots != 2)
            throw std::invalid_argument("ExperimentConfig: the two-basis protocol uses exactly 2 slots");
        if (trials == 0) throw std::invalid_argument("ExperimentConfig: trials must be >= 1");
        if (!(attack_fraction >= 0.0 && attack_fraction <= 1.0))
            throw std::invalid_argument("ExperimentConfig: attack_fraction must be in [0,1]");
        source().validate();
        channel.validate();
        detector.validate();
    }
};

/// Full audit trail of one protocol round, including the classical
/// announcements. Reproducible from (master_seed, round_index) alone.
struct TrialRecord {
    std::uint64_t round_index = 0;
    Protocol protocol = Protocol::Dps;
    std::vector<double> alice_phases;
    Basis alice_basis = Basis::Z;  // two-basis protocol only
    int alice_raw_bit = 0;         // two-basis protocol only
    Basis bob_basis = Basis::Z;    // two-basis protocol only
    bool emitted = false;
    bool attacked = false;
    bool arrived = false;
    std::optional<DetectionEvent> event;
    SiftOutcome outcome;
    std::optional<std::size_t> announced_instance;  // Bob's public timing claim
    bool bases_compared = false;

    bool operator==(const TrialRecord&) const = default;
};

namespace detail {
/// Loss-only distribution: lets detect() run its dark-count gates on
/// rounds where no photon reached the analyzer.
inline DetectionDistribution no_photon_distribution(std::size_t n_slots) {
    return DetectionDistribution(std::vector<double>(n_slots + 1, 0.0),
                                 std::vector<double>(n_slots + 1, 0.0), 1.0);
}
}  // namespace detail

/// Simulate one round end to end:
/// prepare -> emit -> [intercept/resend] -> fiber -> analyzer -> detect -> sift.
inline TrialRecord run_round(const ExperimentConfig& cfg, std::uint64_t round_index) {
    Rng rng = Rng::for_round(cfg.master_seed, round_index);
    TrialRecord rec;
    rec.round_index = round_index;
    rec.protocol = cfg.protocol;

    std::optional<Bb84AliceChoice> bb84;
    std::optional<DpsAliceChoice> dps;
    PhasePattern pattern;
    if (cfg.protocol == Protocol::Bb84) {
        bb84 = bb84_alice_prepare(rng);
        pattern = bb84->pattern();
        rec.alice_basis = bb84->basis;
        rec.alice_raw_bit = bb84->bit;
        rec.bob_basis = rng.bit() ? Basis::X : Basis::Z;
    } else {
        dps = DpsAliceChoice::random(cfg.n_slots, rng);
        pattern = dps->pattern();
    }
    rec.alice_phases = pattern.phases();

    // Eve picks her rounds up front; the draw is consumed whether or not
    // the encoder emits, keeping stream layout independent of losses.
    const bool attack_selected =
        cfg.attack_fraction > 0.0 && rng.bernoulli(cfg.attack_fraction);

    std::optional<TimeBinState> photon = emit(cfg.source(), pattern, rng);
    rec.emitted = photon.has_value();

    if (photon && attack_selected) {
        rec.attacked = true;
        photon = cfg.protocol == Protocol::Bb84 ? bb84_eve_intercept_resend(*photon, rng)
                                                : dps_eve_intercept_resend(*photon, rng);
    }

    if (photon) photon = transmit(*photon, cfg.channel, rng);
    rec.arrived = photon.has_value();

    if (photon) {
        const double phi_b =
            cfg.protocol == Protocol::Bb84 ? basis_phase(rec.bob_basis) : 0.0;
        rec.event =
            detect(mz_distribution(*photon, phi_b), cfg.detector, cfg.slot_period_ns, rng);
    } else if (cfg.detector.dark_count_prob_per_gate > 0.0) {
        // Bob's gates open every round; dark counts do not need a photon.
        rec.event = detect(detail::no_photon_distribution(cfg.n_slots), cfg.detector,
                           cfg.slot_period_ns, rng);
    }

    if (cfg.protocol == Protocol::Bb84) {
        rec.outcome = bb84_bob_measure_and_sift(*bb84, rec.event, rec.bob_basis);
        rec.bases_compared = rec.event.has_value() && rec.event->flag == EventFlag::Ok;
    } else {
        rec.outcome = dps_bob_sift(*dps, rec.event);
    }
    if (rec.event && rec.event->flag == EventFlag::Ok)
        rec.announced_instance = rec.event->instance;
    return rec;
}

/// Model-exact prediction of sifted keys per round for a configuration.
/// Covers loss, detector efficiency, dark counts, jitter, and the attack,
/// in any combination except attack together with jitter (nullopt there).
inline std::optional<double> predicted_key_efficiency(const ExperimentConfig& cfg) {
    const bool jitter = cfg.detector.jitter_sigma_ns > 0.0;
    if (cfg.attack_fraction > 0.0 && jitter) return std::nullopt;
    const double p =
        jitter ? std::min(detail::cached_mis_bin_probability(cfg.detector.jitter_sigma_ns,
                                                             cfg.slot_period_ns),
                          0.5)
               : 0.0;
    const double n = static_cast<double>(cfg.n_slots);
    // Interior-instance mass after jitter displacement: edges feed p/(2n)
    // each inward, interior leaks p/n per outermost instance.
    double receiving = (n - 1.0 - p) / n;
    if (cfg.protocol == Protocol::Bb84) receiving *= 0.5;
    const double d = cfg.detector.dark_count_prob_per_gate;
    // An Ok click needs silence in the other 2(n+1)-1 gates.
    const double quiet = d > 0.0 ? std::pow(1.0 - d, 2.0 * (n + 1.0) - 1.0) : 1.0;
    return cfg.source().survival_probability() * cfg.channel.survival_probability() *
           cfg.detector.efficiency * quiet * receiving;
}

/// Model-exact sifted-key error rate: attack_fraction/4 under attack,
/// the jitter leakage term with jitter alone, 0 in the clean system,
/// nullopt when attack and jitter mix.
inline std::optional<double> predicted_qber(const ExperimentConfig& cfg) {
    const bool jitter = cfg.detector.jitter_sigma_ns > 0.0;
    const bool attack = cfg.attack_fraction > 0.0;
    if (attack && jitter) return std::nullopt;
    if (attack) return cfg.attack_fraction * 0.25;
    if (!jitter) return 0.0;
    const double p = std::min(
        detail::cached_mis_bin_probability(cfg.detector.jitter_sigma_ns, cfg.slot_period_ns),
        0.5);
    const double n = static_cast<double>(cfg.n_slots);
    // Displaced clicks land on a key instance whose bit is a fair coin
    // relative to the one detected.
    return 0.5 * p * (2.0 * n - 3.0) / (n - 1.0 - p);
}

/// Expected click-instance distribution conditional on an Ok click.
/// Only exact without jitter and without the attack; loss, efficiency and
/// dark counts do not distort it.
inline std::optional<std::vector<double>> predicted_instance_marginals(
    const ExperimentConfig& cfg) {
    if (cfg.detector.jitter_sigma_ns > 0.0 || cfg.attack_fraction > 0.0) return std::nullopt;
    return instance_marginals(cfg.n_slots);
}

/// Aggregated results of a Monte Carlo experiment.
///
/// All tallies are integers, so merging partial sums is exact and
/// independent of worker count and merge order; every derived quantity is
/// computed from the final tallies.
struct SummaryStats {
    Protocol protocol = Protocol::Dps;
    SourceScheme scheme = SourceScheme::ImprovedDirectPm;
    std::size_t n_slots = 0;
    std::uint64_t trials = 0;
    std::uint64_t master_seed = 0;
    double attack_fraction = 0.0;

    std::uint64_t emitted = 0;
    std::uint64_t attacked = 0;
    std::uint64_t arrived = 0;
    std::uint64_t clicked = 0;
    std::uint64_t ambiguous = 0;
    std::uint64_t dark_suspect = 0;
    std::array<std::uint64_t, kNumVerdicts> verdicts{};
    std::uint64_t key_errors = 0;
    std::vector<std::uint64_t> instance_hist;  // Ok clicks only

    std::optional<double> oracle_key_efficiency;
    std::optional<double> oracle_qber;
    std::optional<std::vector<double>> oracle_instance_marginals;

    bool operator==(const SummaryStats&) const = default;

    void add(const TrialRecord& rec) {
        emitted += rec.emitted ? 1 : 0;
        attacked += rec.attacked ? 1 : 0;
        arrived += rec.arrived ? 1 : 0;
        if (rec.event) {
            ++clicked;
            switch (rec.event->flag) {
                case EventFlag::Ok:
                    ++instance_hist[rec.event->instance];
                    break;
                case EventFlag::Ambiguous:
                    ++ambiguous;
                    break;
                case EventFlag::DarkSuspect:
                    ++dark_suspect;
                    break;
            }
        }
        ++verdicts[static_cast<std::size_t>(rec.outcome.verdict)];
        if (rec.outcome.verdict == Verdict::Key &&
            *rec.outcome.alice_bit != *rec.outcome.bob_bit)
            ++key_errors;
    }

    void merge(const SummaryStats& other) {
        emitted += other.emitted;
        attacked += other.attacked;
        arrived += other.arrived;
        clicked += other.clicked;
        ambiguous += other.ambiguous;
        dark_suspect += other.dark_suspect;
        for (std::size_t i = 0; i < verdicts.size(); ++i) verdicts[i] += other.verdicts[i];
        key_errors += other.key_errors;
        for (std::size_t i = 0; i < instance_hist.size(); ++i)
            instance_hist[i] += other.instance_hist[i];
    }

    std::uint64_t verdict_count(Verdict v) const {
        return verdicts[static_cast<std::size_t>(v)];
    }
    std::uint64_t key_count() const { return verdict_count(Verdict::Key); }

    double key_efficiency() const {
        return trials ? static_cast<double>(key_count()) / static_cast<double>(trials) : 0.0;
    }
    double key_efficiency_stderr() const {
        return binomial_stderr(key_efficiency(), trials);
    }
    double qber() const {
        return key_count() ? static_cast<double>(key_errors) / static_cast<double>(key_count())
                           : 0.0;
    }
    double qber_stderr() const { return binomial_stderr(qber(), key_count()); }

    /// z-score of the key count against the closed-form rate; 0 when no
    /// oracle applies.
    double z_key_efficiency() const {
        return oracle_key_efficiency ? binomial_z(key_count(), trials, *oracle_key_efficiency)
                                     : 0.0;
    }

    /// z-score of the error count among keys; infinite if errors appear
    /// where the oracle says exactly zero.
    double z_qber() const {
        return oracle_qber ? binomial_z(key_errors, key_count(), *oracle_qber) : 0.0;
    }

    double instance_chi_square() const {
        return oracle_instance_marginals
                   ? chi_square_statistic(instance_hist, *oracle_instance_marginals)
                   : 0.0;
    }

    /// Every applicable oracle gate at once. Binomial gates use |z| <=
    /// z_limit, the instance histogram a chi-square test at alpha = 0.001.
    bool verification_ok(double z_limit = 4.0) const {
        if (oracle_key_efficiency && std::abs(z_key_efficiency()) > z_limit) return false;
        if (oracle_qber && std::abs(z_qber()) > z_limit) return false;
        if (oracle_instance_marginals &&
            instance_chi_square() > chi_square_critical_001(n_slots))
            return false;
        return true;
    }
};

inline SummaryStats make_empty_stats(const ExperimentConfig& cfg) {
    SummaryStats s;
    s.protocol = cfg.protocol;
    s.scheme = cfg.scheme;
    s.n_slots = cfg.n_slots;
    s.trials = cfg.trials;
    s.master_seed = cfg.master_seed;
    s.attack_fraction = cfg.attack_fraction;
    s.instance_hist.assign(cfg.n_slots + 1, 0);
    s.oracle_key_efficiency = predicted_key_efficiency(cfg);
    s.oracle_qber = predicted_qber(cfg);
    s.oracle_instance_marginals = predicted_instance_marginals(cfg);
    return s;
}

/// Run the whole experiment. n_workers = 0 picks the hardware thread
/// count. Rounds are split into contiguous blocks, but per-round streams
/// make the result identical for every worker count.
inline SummaryStats run_experiment(const ExperimentConfig& cfg, unsigned n_workers = 0) {
    cfg.validate();
    SummaryStats total = make_empty_stats(cfg);
    if (n_workers == 0) n_workers = std::max(1u, std::thread::hardware_concurrency());
    const std::uint64_t workers =
        std::min<std::uint64_t>(n_workers, cfg.trials);

    if (workers <= 1) {
        for (std::uint64_t i = 0; i < cfg.trials; ++i) total.add(run_round(cfg, i));
        return total;
    }

    std::vector<SummaryStats> parts(workers, make_empty_stats(cfg));
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::uint64_t q = cfg.trials / workers;
    const std::uint64_t r = cfg.trials % workers;
    std::uint64_t begin = 0;
    for (std::uint64_t w = 0; w < workers; ++w) {
        const std::uint64_t count = q + (w < r ? 1 : 0);
        pool.emplace_back([&cfg, &part = parts[w], begin, count] {
            for (std::uint64_t i = 0; i < count; ++i) part.add(run_round(cfg, begin + i));
        });
        begin += count;
    }
    for (auto& t : pool) t.join();
    for (const auto& part : parts) total.merge(part);
    return total;
}

/// One point of the N-sweep: both encoder schemes at the same slot count.
struct SweepRow {
    std::size_t n_slots = 0;
    double improved_empirical = 0.0;
    double improved_oracle = 0.0;
    double conventional_empirical = 0.0;
    double conventional_oracle = 0.0;
    double stderr_improved = 0.0;
    double stderr_conventional = 0.0;
};

/// Sweep the N-period protocol across slot counts, running both encoder
/// schemes per point. Each cell gets its own derived seed so points are
/// statistically independent yet fully reproducible.
inline std::vector<SweepRow> sweep_n(const ExperimentConfig& base, std::size_t n_min,
                                     std::size_t n_max, unsigned n_workers = 0) {
    if (n_min < 2) throw std::invalid_argument("sweep_n: n_min must be >= 2");
    if (n_max < n_min) throw std::invalid_argument("sweep_n: n_max must be >= n_min");
    std::vector<SweepRow> rows;
    rows.reserve(n_max - n_min + 1);
    for (std::size_t n = n_min; n <= n_max; ++n) {
        SweepRow row;
        row.n_slots = n;
        for (bool improved : {true, false}) {
            ExperimentConfig cfg = base;
            cfg.protocol = Protocol::Dps;
            cfg.n_slots = n;
            cfg.scheme =
                improved ? SourceScheme::ImprovedDirectPm : SourceScheme::ConventionalBs;
            cfg.master_seed =
                Rng::for_round(base.master_seed, 2 * n + (improved ? 1 : 0)).next_u64();
            const SummaryStats stats = run_experiment(cfg, n_workers);
            const double oracle = stats.oracle_key_efficiency
                                      ? *stats.oracle_key_efficiency
                                      : std::numeric_limits<double>::quiet_NaN();
            if (improved) {
                row.improved_empirical = stats.key_efficiency();
                row.improved_oracle = oracle;
                row.stderr_improved = stats.key_efficiency_stderr();
            } else {
                row.conventional_empirical = stats.key_efficiency();
                row.conventional_oracle = oracle;
                row.stderr_conventional = stats.key_efficiency_stderr();
            }
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace qkdsim
