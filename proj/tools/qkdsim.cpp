#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "qkdsim/config_file.hpp"
#include "qkdsim/reporting.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitVerificationFailure = 3;

namespace fs = std::filesystem;

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::string format = "csv";
    std::uint64_t seed = 0;
    std::uint64_t trials = 0;
    unsigned threads = 0;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* trials_opt = nullptr;
};

// Precedence: --out flag, then QKDSIM_OUT_DIR, then the working directory.
fs::path resolve_out_dir(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("QKDSIM_OUT_DIR"); env && *env) return env;
    return ".";
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

qkdsim::ExperimentConfig load_with_overrides(const CommonOpts& opts) {
    qkdsim::ExperimentConfig cfg = qkdsim::load_experiment_config(opts.config_path);
    if (opts.seed_opt && opts.seed_opt->count() > 0) cfg.master_seed = opts.seed;
    if (opts.trials_opt && opts.trials_opt->count() > 0) cfg.trials = opts.trials;
    try {
        cfg.validate();
    } catch (const std::exception& e) {
        throw qkdsim::ConfigError(opts.config_path + ": " + e.what());
    }
    return cfg;
}

int finish_experiment(const CommonOpts& opts, const qkdsim::ExperimentConfig& cfg,
                      const qkdsim::SummaryStats& stats, const std::string& stem) {
    const fs::path dir = resolve_out_dir(opts.out_dir);
    fs::create_directories(dir);
    if (opts.format == "csv") {
        write_file(dir / (stem + "_summary.csv"), qkdsim::summary_csv_header() + "\n" +
                                                      qkdsim::summary_csv_row(cfg, stats) +
                                                      "\n");
    } else {
        write_file(dir / (stem + "_summary.jsonl"),
                   qkdsim::summary_json(cfg, stats).dump() + "\n");
    }
    const std::string report = qkdsim::human_report(cfg, stats);
    write_file(dir / (stem + "_report.txt"), report);
    std::cout << report;
    if (!stats.verification_ok()) {
        std::cerr << "VERIFICATION_FAILURE: empirical statistics disagree with the "
                     "closed-form oracle beyond the gate\n";
        return kExitVerificationFailure;
    }
    return kExitOk;
}

int cmd_run(const CommonOpts& opts) {
    const qkdsim::ExperimentConfig cfg = load_with_overrides(opts);
    const qkdsim::SummaryStats stats = qkdsim::run_experiment(cfg, opts.threads);
    return finish_experiment(opts, cfg, stats, "run");
}

int cmd_attack(const CommonOpts& opts, double fraction, bool fraction_set) {
    qkdsim::ExperimentConfig cfg = load_with_overrides(opts);
    if (fraction_set) cfg.attack_fraction = fraction;
    const qkdsim::SummaryStats stats = qkdsim::run_experiment(cfg, opts.threads);
    return finish_experiment(opts, cfg, stats, "attack");
}

int cmd_sweep_n(const CommonOpts& opts, std::size_t n_min, std::size_t n_max) {
    const qkdsim::ExperimentConfig base = load_with_overrides(opts);
    const std::vector<qkdsim::SweepRow> rows =
        qkdsim::sweep_n(base, n_min, n_max, opts.threads);

    const fs::path dir = resolve_out_dir(opts.out_dir);
    fs::create_directories(dir);
    const std::string csv = qkdsim::sweep_csv(rows);
    if (opts.format == "csv") {
        write_file(dir / "sweep.csv", csv);
    } else {
        std::string jsonl;
        for (const auto& r : rows) jsonl += qkdsim::sweep_json_row(r).dump() + "\n";
        write_file(dir / "sweep.jsonl", jsonl);
    }
    std::cout << csv;

    // Per-cell binomial gate against the oracle columns.
    bool ok = true;
    for (const auto& r : rows) {
        for (auto [emp, oracle] :
             {std::pair{r.improved_empirical, r.improved_oracle},
              std::pair{r.conventional_empirical, r.conventional_oracle}}) {
            if (std::isnan(oracle)) continue;
            const double se = qkdsim::binomial_stderr(oracle, base.trials);
            if (std::abs(emp - oracle) > 4.0 * se) ok = false;
        }
    }
    if (!ok) {
        std::cerr << "VERIFICATION_FAILURE: sweep cell disagrees with the oracle curve "
                     "beyond 4 standard errors\n";
        return kExitVerificationFailure;
    }
    return kExitOk;
}

int cmd_ratios(const CommonOpts& opts, std::size_t n_slots) {
    const fs::path dir = resolve_out_dir(opts.out_dir);
    fs::create_directories(dir);
    if (opts.format == "csv") {
        write_file(dir / "ratios.csv", qkdsim::ratios_csv(n_slots));
    } else {
        const auto marg = qkdsim::instance_marginals(n_slots);
        std::string jsonl;
        for (std::size_t j = 0; j < marg.size(); ++j) {
            nlohmann::ordered_json row;
            row["n"] = n_slots;
            row["instance"] = j;
            row["weight"] = (j == 0 || j + 1 == marg.size()) ? 1 : 2;
            row["probability"] = marg[j];
            jsonl += row.dump() + "\n";
        }
        write_file(dir / "ratios.jsonl", jsonl);
    }
    std::cout << qkdsim::ratios_table(n_slots);
    return kExitOk;
}

void add_common_options(CLI::App* sub, CommonOpts& opts, bool needs_config) {
    if (needs_config)
        sub->add_option("config", opts.config_path, "experiment file")->required();
    sub->add_option("--out,-o", opts.out_dir,
                    "output directory (default: $QKDSIM_OUT_DIR or '.')");
    sub->add_option("--format", opts.format, "output format")
        ->check(CLI::IsMember({"csv", "jsonl"}));
    opts.seed_opt = sub->add_option("--seed", opts.seed, "override master_seed");
    opts.trials_opt =
        sub->add_option("--trials", opts.trials, "override trial count")
            ->check(CLI::Range(std::uint64_t{1}, std::numeric_limits<std::uint64_t>::max()));
    sub->add_option("--threads", opts.threads, "worker threads (0 = hardware)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"phase-encoding QKD simulator and analytic toolkit"};
    app.require_subcommand(1);

    CommonOpts run_opts;
    CLI::App* run_cmd = app.add_subcommand("run", "run one experiment and verify it");
    add_common_options(run_cmd, run_opts, true);

    CommonOpts sweep_opts;
    std::size_t n_min = 2, n_max = 20;
    CLI::App* sweep_cmd = app.add_subcommand(
        "sweep-n", "key-creation efficiency versus slot count, both schemes");
    add_common_options(sweep_cmd, sweep_opts, true);
    sweep_cmd->add_option("--n-min", n_min, "smallest slot count")
        ->check(CLI::Range(std::size_t{2}, std::size_t{4096}));
    sweep_cmd->add_option("--n-max", n_max, "largest slot count")
        ->check(CLI::Range(std::size_t{2}, std::size_t{4096}));

    CommonOpts attack_opts;
    double fraction = 1.0;
    CLI::App* attack_cmd =
        app.add_subcommand("attack", "intercept/resend attack QBER versus oracle");
    add_common_options(attack_cmd, attack_opts, true);
    CLI::Option* fraction_opt =
        attack_cmd->add_option("--fraction", fraction, "fraction of rounds attacked")
            ->check(CLI::Range(0.0, 1.0));

    CommonOpts ratios_opts;
    std::size_t ratios_n = 3;
    CLI::App* ratios_cmd =
        app.add_subcommand("ratios", "print the instance-marginal table for a slot count");
    add_common_options(ratios_cmd, ratios_opts, false);
    ratios_cmd->add_option("--n", ratios_n, "slot count")
        ->check(CLI::Range(std::size_t{1}, std::size_t{4096}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfigError;
    }

    try {
        if (run_cmd->parsed()) return cmd_run(run_opts);
        if (sweep_cmd->parsed()) return cmd_sweep_n(sweep_opts, n_min, n_max);
        if (attack_cmd->parsed())
            return cmd_attack(attack_opts, fraction, fraction_opt->count() > 0);
        if (ratios_cmd->parsed()) return cmd_ratios(ratios_opts, ratios_n);
    } catch (const qkdsim::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfigError;
    }
    return kExitOk;
}
