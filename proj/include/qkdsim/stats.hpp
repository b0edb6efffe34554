#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace qkdsim {

inline double binomial_stderr(double p, std::uint64_t trials) {
    if (trials == 0) return 0.0;
    const double q = std::min(std::max(p, 0.0), 1.0);
    return std::sqrt(q * (1.0 - q) / static_cast<double>(trials));
}

// z-score of an observed success count against a known success probability.
// Returns 0 when the binomial has zero variance.
inline double binomial_z(std::uint64_t successes, std::uint64_t trials, double p) {
    if (trials == 0) return 0.0;
    const double n = static_cast<double>(trials);
    const double var = n * p * (1.0 - p);
    if (var <= 0.0) {
        const double expected = n * p;
        return static_cast<double>(successes) == expected ? 0.0 : INFINITY;
    }
    return (static_cast<double>(successes) - n * p) / std::sqrt(var);
}

// Pearson statistic for observed category counts against expected
// probabilities. Categories with zero expected probability must have zero
// observed count (otherwise the statistic is infinite).
inline double chi_square_statistic(const std::vector<std::uint64_t>& observed,
                                   const std::vector<double>& expected_probs) {
    if (observed.size() != expected_probs.size())
        throw std::invalid_argument("chi_square_statistic: size mismatch");
    std::uint64_t total = 0;
    for (auto c : observed) total += c;
    if (total == 0) return 0.0;
    double stat = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const double e = expected_probs[i] * static_cast<double>(total);
        const double o = static_cast<double>(observed[i]);
        if (e <= 0.0) {
            if (o > 0.0) return INFINITY;
            continue;
        }
        stat += (o - e) * (o - e) / e;
    }
    return stat;
}

// Upper critical value of the chi-square distribution at alpha = 0.001.
// Exact table for small dof, Wilson-Hilferty approximation beyond it.
inline double chi_square_critical_001(std::size_t dof) {
    if (dof == 0) throw std::domain_error("chi_square_critical_001: dof must be >= 1");
    static constexpr std::array<double, 10> kTable = {
        10.827566170662733, 13.815510557964274, 16.266236196238129, 18.466826952903151,
        20.515005652432873, 22.457744484825323, 24.321886347856850, 26.124481558376136,
        27.877164871256568, 29.588298445074422};
    if (dof <= kTable.size()) return kTable[dof - 1];
    const double k = static_cast<double>(dof);
    const double z = 3.090232306167813;  // standard normal quantile at 1 - 0.001
    const double t = 1.0 - 2.0 / (9.0 * k) + z * std::sqrt(2.0 / (9.0 * k));
    return k * t * t * t;
}

}  // namespace qkdsim
