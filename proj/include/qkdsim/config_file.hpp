#pragma once

#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "qkdsim/engine.hpp"

namespace qkdsim {

/// Malformed experiment file. The message carries "file:line:" wherever a
/// specific line is at fault.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

inline std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

[[noreturn]] inline void fail_at(const std::string& name, std::size_t line,
                                 const std::string& what) {
    std::ostringstream os;
    os << name << ":" << line << ": " << what;
    throw ConfigError(os.str());
}

inline double parse_double(const std::string& name, std::size_t line, const std::string& key,
                           const std::string& value) {
    const char* begin = value.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0')
        fail_at(name, line, "value for '" + key + "' is not a number: '" + value + "'");
    return v;
}

inline std::uint64_t parse_u64(const std::string& name, std::size_t line,
                               const std::string& key, const std::string& value) {
    if (value.empty() || value[0] == '-')
        fail_at(name, line, "value for '" + key + "' is not a nonnegative integer: '" + value + "'");
    const char* begin = value.c_str();
    char* end = nullptr;
    const unsigned long long v = std::strtoull(begin, &end, 10);
    if (end == begin || *end != '\0')
        fail_at(name, line, "value for '" + key + "' is not a nonnegative integer: '" + value + "'");
    return static_cast<std::uint64_t>(v);
}

}  // namespace detail

/// Parse the flat experiment-file format:
///
///   # comment
///   protocol = dps              (required; bb84 | dps)
///   scheme = improved           (improved | conventional)
///   n_slots = 3
///   trials = 1000000
///   master_seed = 42
///   attack_fraction = 0.0
///   [source]    slot_period_ns, shaping_loss, pair_rate_hz
///   [channel]   length_km, loss_db_per_km, common_phase_drift_rad
///   [detector]  efficiency, dark_count_prob_per_gate, jitter_sigma_ns
///
/// Unset keys keep their defaults. Unknown keys, unknown sections, and
/// files that never set `protocol` are errors with line diagnostics.
inline ExperimentConfig parse_experiment_config(std::istream& in,
                                                const std::string& source_name) {
    ExperimentConfig cfg;
    std::string section;  // empty = experiment-level keys
    bool saw_protocol = false;
    bool saw_n_slots = false;

    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::size_t hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        const std::string line = detail::trim(raw);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']')
                detail::fail_at(source_name, line_no, "unterminated section header");
            section = detail::lower(detail::trim(line.substr(1, line.size() - 2)));
            if (section != "source" && section != "channel" && section != "detector")
                detail::fail_at(source_name, line_no, "unknown section [" + section + "]");
            continue;
        }

        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            detail::fail_at(source_name, line_no, "expected 'key = value'");
        const std::string key = detail::lower(detail::trim(line.substr(0, eq)));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty()) detail::fail_at(source_name, line_no, "empty key");
        if (value.empty())
            detail::fail_at(source_name, line_no, "empty value for '" + key + "'");

        if (section.empty()) {
            if (key == "protocol") {
                const std::string v = detail::lower(value);
                if (v == "bb84")
                    cfg.protocol = Protocol::Bb84;
                else if (v == "dps")
                    cfg.protocol = Protocol::Dps;
                else
                    detail::fail_at(source_name, line_no,
                                    "protocol must be 'bb84' or 'dps', got '" + value + "'");
                saw_protocol = true;
            } else if (key == "scheme") {
                const std::string v = detail::lower(value);
                if (v == "improved")
                    cfg.scheme = SourceScheme::ImprovedDirectPm;
                else if (v == "conventional")
                    cfg.scheme = SourceScheme::ConventionalBs;
                else
                    detail::fail_at(source_name, line_no,
                                    "scheme must be 'improved' or 'conventional', got '" +
                                        value + "'");
            } else if (key == "n_slots") {
                cfg.n_slots = static_cast<std::size_t>(
                    detail::parse_u64(source_name, line_no, key, value));
                saw_n_slots = true;
            } else if (key == "trials") {
                cfg.trials = detail::parse_u64(source_name, line_no, key, value);
            } else if (key == "master_seed") {
                cfg.master_seed = detail::parse_u64(source_name, line_no, key, value);
            } else if (key == "attack_fraction") {
                cfg.attack_fraction = detail::parse_double(source_name, line_no, key, value);
            } else {
                detail::fail_at(source_name, line_no, "unknown key '" + key + "'");
            }
        } else if (section == "source") {
            if (key == "slot_period_ns")
                cfg.slot_period_ns = detail::parse_double(source_name, line_no, key, value);
            else if (key == "shaping_loss")
                cfg.shaping_loss = detail::parse_double(source_name, line_no, key, value);
            else if (key == "pair_rate_hz")
                cfg.pair_rate_hz = detail::parse_double(source_name, line_no, key, value);
            else
                detail::fail_at(source_name, line_no, "unknown key '" + key + "' in [source]");
        } else if (section == "channel") {
            if (key == "length_km")
                cfg.channel.length_km = detail::parse_double(source_name, line_no, key, value);
            else if (key == "loss_db_per_km")
                cfg.channel.loss_db_per_km =
                    detail::parse_double(source_name, line_no, key, value);
            else if (key == "common_phase_drift_rad")
                cfg.channel.common_phase_drift_rad =
                    detail::parse_double(source_name, line_no, key, value);
            else
                detail::fail_at(source_name, line_no, "unknown key '" + key + "' in [channel]");
        } else {
            if (key == "efficiency")
                cfg.detector.efficiency = detail::parse_double(source_name, line_no, key, value);
            else if (key == "dark_count_prob_per_gate")
                cfg.detector.dark_count_prob_per_gate =
                    detail::parse_double(source_name, line_no, key, value);
            else if (key == "jitter_sigma_ns")
                cfg.detector.jitter_sigma_ns =
                    detail::parse_double(source_name, line_no, key, value);
            else
                detail::fail_at(source_name, line_no, "unknown key '" + key + "' in [detector]");
        }
    }

    if (!saw_protocol)
        throw ConfigError(source_name + ": no protocol set (an experiment file must at least name its protocol)");
    // The two-basis protocol fixes the slot count; only an explicit
    // contradicting n_slots should be rejected downstream.
    if (cfg.protocol == Protocol::Bb84 && !saw_n_slots) cfg.n_slots = 2;

    try {
        cfg.validate();
    } catch (const std::exception& e) {
        throw ConfigError(source_name + ": " + e.what());
    }
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open experiment file");
    return parse_experiment_config(in, path);
}

}  // namespace qkdsim
