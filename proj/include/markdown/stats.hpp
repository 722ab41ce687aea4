#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace markdown::stats {

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    bool exact = false;
};

/// Pairs (n_a * n_b) at or below which Mann-Whitney p-values are exact.
inline constexpr std::size_t kExactPairLimit = 400;

/// Midranks (1-based) of `values`, ties sharing the average rank.
std::vector<double> midranks(std::span<const double> values);

/// U of sample a (pairs a > b, ties count half) with a two-sided p-value.
/// Exact permutation distribution of the midrank sum when n_a * n_b <= kExactPairLimit,
/// otherwise a tie-corrected normal approximation with continuity correction.
TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b);

/// Tie-corrected H with a chi-squared p-value on k - 1 degrees of freedom.
TestResult kruskal_wallis(const std::vector<std::vector<double>>& samples);

struct Normality {
    double jarque_bera = 0.0;
    double p_value = 1.0;
    double skewness = 0.0;
    double excess_kurtosis = 0.0;
};

Normality jarque_bera(std::span<const double> sample);

double median(std::vector<double> values);
double mean(std::span<const double> values);

}  // namespace markdown::stats
