#pragma once

#include <charconv>
#include <cstddef>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qkdsim/analytics.hpp"
#include "qkdsim/engine.hpp"

namespace qkdsim {

/// Locale-independent float formatting: 9 significant digits, '.' decimal
/// separator. Reparsing the output and reprinting it reproduces the same
/// bytes (decimals of <= 15 significant digits survive a double round
/// trip), so emitted fields are stable under load/store cycles.
inline std::string format_g9(double v) {
    char buf[64];
    const auto res =
        std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 9);
    return std::string(buf, res.ptr);
}

inline const char* protocol_name(Protocol p) { return p == Protocol::Bb84 ? "bb84" : "dps"; }

inline const char* scheme_name(SourceScheme s) {
    return s == SourceScheme::ImprovedDirectPm ? "improved" : "conventional";
}

inline const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Key: return "key";
        case Verdict::DiscardEdge: return "discard_edge";
        case Verdict::DiscardBasisMismatch: return "discard_basis_mismatch";
        case Verdict::DiscardNoClick: return "discard_no_click";
        case Verdict::DiscardAmbiguous: return "discard_ambiguous";
    }
    return "unknown";
}

namespace detail {
inline double or_nan(const std::optional<double>& v) {
    return v ? *v : std::numeric_limits<double>::quiet_NaN();
}
}  // namespace detail

/// Column schema of the one-record-per-experiment summary CSV. The record
/// carries the full configuration, so a result file alone is enough to
/// reproduce the run.
inline std::string summary_csv_header() {
    return "protocol,scheme,n_slots,trials,master_seed,attack_fraction,"
           "slot_period_ns,shaping_loss,pair_rate_hz,"
           "length_km,loss_db_per_km,common_phase_drift_rad,"
           "efficiency,dark_count_prob_per_gate,jitter_sigma_ns,"
           "emitted,attacked,arrived,clicked,ambiguous_events,dark_suspect_events,"
           "keys,key_errors,discard_edge,discard_basis_mismatch,discard_no_click,"
           "discard_ambiguous,"
           "key_efficiency,key_efficiency_stderr,qber,qber_stderr,"
           "oracle_key_efficiency,oracle_qber,z_key_efficiency,z_qber,"
           "instance_chi_square,verification_ok";
}

inline std::string summary_csv_row(const ExperimentConfig& cfg, const SummaryStats& s) {
    std::ostringstream os;
    os << protocol_name(cfg.protocol) << ',' << scheme_name(cfg.scheme) << ','
       << cfg.n_slots << ',' << cfg.trials << ',' << cfg.master_seed << ','
       << format_g9(cfg.attack_fraction) << ',' << format_g9(cfg.slot_period_ns) << ','
       << format_g9(cfg.shaping_loss) << ',' << format_g9(cfg.pair_rate_hz) << ','
       << format_g9(cfg.channel.length_km) << ',' << format_g9(cfg.channel.loss_db_per_km)
       << ',' << format_g9(cfg.channel.common_phase_drift_rad) << ','
       << format_g9(cfg.detector.efficiency) << ','
       << format_g9(cfg.detector.dark_count_prob_per_gate) << ','
       << format_g9(cfg.detector.jitter_sigma_ns) << ',' << s.emitted << ',' << s.attacked
       << ',' << s.arrived << ',' << s.clicked << ',' << s.ambiguous << ','
       << s.dark_suspect << ',' << s.key_count() << ',' << s.key_errors << ','
       << s.verdict_count(Verdict::DiscardEdge) << ','
       << s.verdict_count(Verdict::DiscardBasisMismatch) << ','
       << s.verdict_count(Verdict::DiscardNoClick) << ','
       << s.verdict_count(Verdict::DiscardAmbiguous) << ','
       << format_g9(s.key_efficiency()) << ',' << format_g9(s.key_efficiency_stderr()) << ','
       << format_g9(s.qber()) << ',' << format_g9(s.qber_stderr()) << ','
       << format_g9(detail::or_nan(s.oracle_key_efficiency)) << ','
       << format_g9(detail::or_nan(s.oracle_qber)) << ',' << format_g9(s.z_key_efficiency())
       << ',' << format_g9(s.z_qber()) << ','
       << format_g9(s.oracle_instance_marginals
                        ? s.instance_chi_square()
                        : std::numeric_limits<double>::quiet_NaN())
       << ',' << (s.verification_ok() ? 1 : 0);
    return os.str();
}

inline nlohmann::ordered_json summary_json(const ExperimentConfig& cfg,
                                           const SummaryStats& s) {
    nlohmann::ordered_json j;
    j["protocol"] = protocol_name(cfg.protocol);
    j["scheme"] = scheme_name(cfg.scheme);
    j["n_slots"] = cfg.n_slots;
    j["trials"] = cfg.trials;
    j["master_seed"] = cfg.master_seed;
    j["attack_fraction"] = cfg.attack_fraction;
    j["source"] = {{"slot_period_ns", cfg.slot_period_ns},
                   {"shaping_loss", cfg.shaping_loss},
                   {"pair_rate_hz", cfg.pair_rate_hz}};
    j["channel"] = {{"length_km", cfg.channel.length_km},
                    {"loss_db_per_km", cfg.channel.loss_db_per_km},
                    {"common_phase_drift_rad", cfg.channel.common_phase_drift_rad}};
    j["detector"] = {{"efficiency", cfg.detector.efficiency},
                     {"dark_count_prob_per_gate", cfg.detector.dark_count_prob_per_gate},
                     {"jitter_sigma_ns", cfg.detector.jitter_sigma_ns}};
    j["emitted"] = s.emitted;
    j["attacked"] = s.attacked;
    j["arrived"] = s.arrived;
    j["clicked"] = s.clicked;
    j["ambiguous_events"] = s.ambiguous;
    j["dark_suspect_events"] = s.dark_suspect;
    nlohmann::ordered_json verdicts;
    for (std::size_t i = 0; i < kNumVerdicts; ++i)
        verdicts[verdict_name(static_cast<Verdict>(i))] = s.verdicts[i];
    j["verdicts"] = std::move(verdicts);
    j["key_errors"] = s.key_errors;
    j["instance_hist"] = s.instance_hist;
    j["key_efficiency"] = s.key_efficiency();
    j["key_efficiency_stderr"] = s.key_efficiency_stderr();
    j["qber"] = s.qber();
    j["qber_stderr"] = s.qber_stderr();
    j["oracle_key_efficiency"] =
        s.oracle_key_efficiency ? nlohmann::ordered_json(*s.oracle_key_efficiency)
                                : nlohmann::ordered_json(nullptr);
    j["oracle_qber"] = s.oracle_qber ? nlohmann::ordered_json(*s.oracle_qber)
                                     : nlohmann::ordered_json(nullptr);
    j["oracle_instance_marginals"] =
        s.oracle_instance_marginals ? nlohmann::ordered_json(*s.oracle_instance_marginals)
                                    : nlohmann::ordered_json(nullptr);
    j["z_key_efficiency"] = s.z_key_efficiency();
    j["z_qber"] = s.z_qber();
    j["instance_chi_square"] = s.oracle_instance_marginals
                                   ? nlohmann::ordered_json(s.instance_chi_square())
                                   : nlohmann::ordered_json(nullptr);
    j["verification_ok"] = s.verification_ok();
    return j;
}

inline std::string sweep_csv_header() {
    return "n,improved_empirical,improved_oracle,conventional_empirical,"
           "conventional_oracle,stderr_improved,stderr_conventional";
}

inline std::string sweep_csv_row(const SweepRow& r) {
    std::ostringstream os;
    os << r.n_slots << ',' << format_g9(r.improved_empirical) << ','
       << format_g9(r.improved_oracle) << ',' << format_g9(r.conventional_empirical) << ','
       << format_g9(r.conventional_oracle) << ',' << format_g9(r.stderr_improved) << ','
       << format_g9(r.stderr_conventional);
    return os.str();
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    os << sweep_csv_header() << '\n';
    for (const auto& r : rows) os << sweep_csv_row(r) << '\n';
    return os.str();
}

inline nlohmann::ordered_json sweep_json_row(const SweepRow& r) {
    nlohmann::ordered_json j;
    j["n"] = r.n_slots;
    j["improved_empirical"] = r.improved_empirical;
    j["improved_oracle"] = r.improved_oracle;
    j["conventional_empirical"] = r.conventional_empirical;
    j["conventional_oracle"] = r.conventional_oracle;
    j["stderr_improved"] = r.stderr_improved;
    j["stderr_conventional"] = r.stderr_conventional;
    return j;
}

inline std::string ratios_csv(std::size_t n_slots) {
    const auto marg = instance_marginals(n_slots);
    std::ostringstream os;
    os << "n,instance,weight,probability\n";
    for (std::size_t j = 0; j < marg.size(); ++j) {
        const int weight = (j == 0 || j + 1 == marg.size()) ? 1 : 2;
        os << n_slots << ',' << j << ',' << weight << ',' << format_g9(marg[j]) << '\n';
    }
    return os.str();
}

/// Instance-marginal table in the style of the click-ratio figures:
/// weights 1:2:...:2:1 and the normalized probability per instance.
inline std::string ratios_table(std::size_t n_slots) {
    const auto marg = instance_marginals(n_slots);
    std::ostringstream os;
    os << "instance marginals, n = " << n_slots << "\n";
    os << "  weights ";
    for (std::size_t j = 0; j < marg.size(); ++j)
        os << (j ? " : " : "") << ((j == 0 || j + 1 == marg.size()) ? 1 : 2);
    os << "\n";
    os << "  instance  weight  probability\n";
    for (std::size_t j = 0; j < marg.size(); ++j) {
        const int weight = (j == 0 || j + 1 == marg.size()) ? 1 : 2;
        os << "  " << j;
        for (std::size_t pad = std::to_string(j).size(); pad < 8; ++pad) os << ' ';
        os << "  " << weight << "       " << format_g9(marg[j]) << "\n";
    }
    return os.str();
}

namespace detail {
inline void report_line(std::ostringstream& os, const std::string& label,
                        const std::string& value) {
    os << "  " << label << ' ';
    for (std::size_t pad = label.size(); pad < 26; ++pad) os << '.';
    os << ' ' << value << '\n';
}
}  // namespace detail

/// Human-readable run report: configuration echo, round fates, verdicts,
/// empirical-vs-oracle comparison with z-scores, and the rate limits.
/// Deterministic byte-for-byte for a given (config, stats) pair.
inline std::string human_report(const ExperimentConfig& cfg, const SummaryStats& s) {
    using detail::report_line;
    std::ostringstream os;
    os << "qkdsim experiment report\n";
    os << "========================\n";
    os << "configuration\n";
    report_line(os, "protocol", protocol_name(cfg.protocol));
    report_line(os, "scheme", scheme_name(cfg.scheme));
    report_line(os, "n_slots", std::to_string(cfg.n_slots));
    report_line(os, "trials", std::to_string(cfg.trials));
    report_line(os, "master_seed", std::to_string(cfg.master_seed));
    report_line(os, "attack_fraction", format_g9(cfg.attack_fraction));
    report_line(os, "slot_period_ns", format_g9(cfg.slot_period_ns));
    report_line(os, "shaping_loss", format_g9(cfg.shaping_loss));
    report_line(os, "pair_rate_hz", format_g9(cfg.pair_rate_hz));
    report_line(os, "length_km", format_g9(cfg.channel.length_km));
    report_line(os, "loss_db_per_km", format_g9(cfg.channel.loss_db_per_km));
    report_line(os, "common_phase_drift_rad", format_g9(cfg.channel.common_phase_drift_rad));
    report_line(os, "efficiency", format_g9(cfg.detector.efficiency));
    report_line(os, "dark_count_prob_per_gate",
                format_g9(cfg.detector.dark_count_prob_per_gate));
    report_line(os, "jitter_sigma_ns", format_g9(cfg.detector.jitter_sigma_ns));

    os << "round fates\n";
    report_line(os, "emitted", std::to_string(s.emitted));
    report_line(os, "attacked", std::to_string(s.attacked));
    report_line(os, "arrived", std::to_string(s.arrived));
    report_line(os, "clicked", std::to_string(s.clicked));
    report_line(os, "ambiguous events", std::to_string(s.ambiguous));
    report_line(os, "dark-suspect events", std::to_string(s.dark_suspect));

    os << "sifting verdicts\n";
    for (std::size_t i = 0; i < kNumVerdicts; ++i)
        report_line(os, verdict_name(static_cast<Verdict>(i)), std::to_string(s.verdicts[i]));

    os << "key statistics (empirical / oracle / z)\n";
    report_line(os, "total key efficiency",
                format_g9(s.key_efficiency()) + " / " +
                    format_g9(detail::or_nan(s.oracle_key_efficiency)) + " / " +
                    format_g9(s.z_key_efficiency()));
    report_line(os, "key efficiency stderr", format_g9(s.key_efficiency_stderr()));
    report_line(os, "qber",
                format_g9(s.qber()) + " / " + format_g9(detail::or_nan(s.oracle_qber)) +
                    " / " + format_g9(s.z_qber()));
    report_line(os, "qber stderr", format_g9(s.qber_stderr()));

    os << "instance histogram\n  counts";
    for (auto c : s.instance_hist) os << ' ' << c;
    os << '\n';
    if (s.oracle_instance_marginals) {
        report_line(os, "chi-square",
                    format_g9(s.instance_chi_square()) + " (critical " +
                        format_g9(chi_square_critical_001(cfg.n_slots)) +
                        " at alpha 0.001, dof " + std::to_string(cfg.n_slots) + ")");
    } else {
        report_line(os, "chi-square", "not gated for this configuration");
    }

    const EfficiencyReport eff =
        cfg.protocol == Protocol::Bb84 ? bb84_efficiency(cfg.improved())
                                       : dps_efficiency(cfg.n_slots, cfg.improved());
    os << "rate limits\n";
    report_line(os, "max_clock_rate_hz", format_g9(max_clock_rate_hz(cfg.source())));
    report_line(os, "analytic sifted_rate_hz",
                format_g9(sifted_rate_hz(cfg.source(), cfg.channel, cfg.detector, eff)));

    os << "verification: " << (s.verification_ok() ? "PASS" : "FAIL: VERIFICATION_FAILURE")
       << " (binomial gates at 4 sigma, histogram chi-square at alpha 0.001)\n";
    return os.str();
}

}  // namespace qkdsim
