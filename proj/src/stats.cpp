#include "markdown/stats.hpp"

#include "markdown/error.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace markdown::stats {

namespace {

/// Sum over tie groups of t^3 - t.
double tie_term(std::span<const double> values) {
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size();) {
        std::size_t j = i;
        while (j < v.size() && v[j] == v[i]) ++j;
        const auto t = static_cast<double>(j - i);
        sum += t * t * t - t;
        i = j;
    }
    return sum;
}

/// P(|T - mu| >= |t_obs - mu|) where T is the sum of n_a midranks drawn without replacement.
/// Works on doubled ranks so every rank is an integer.
double exact_two_sided(const std::vector<double>& ranks, std::size_t n_a, double observed) {
    std::vector<long> doubled;
    doubled.reserve(ranks.size());
    for (double r : ranks) doubled.push_back(std::lround(2.0 * r));
    const std::size_t n = ranks.size();
    std::vector<long> sorted = doubled;
    std::sort(sorted.rbegin(), sorted.rend());
    const long max_sum = std::accumulate(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n_a), 0L);
    // ways[j][s]: number of j-subsets with doubled rank sum s.
    std::vector<std::vector<long double>> ways(
        n_a + 1, std::vector<long double>(static_cast<std::size_t>(max_sum) + 1, 0.0L));
    ways[0][0] = 1.0L;
    for (std::size_t i = 0; i < n; ++i) {
        const long r = doubled[i];
        for (std::size_t j = std::min(i + 1, n_a); j >= 1; --j)
            for (long s = max_sum - r; s >= 0; --s)
                if (ways[j - 1][static_cast<std::size_t>(s)] != 0.0L)
                    ways[j][static_cast<std::size_t>(s + r)] += ways[j - 1][static_cast<std::size_t>(s)];
    }
    // Mean doubled sum is n_a * (n + 1).
    const long mu2 = static_cast<long>(n_a) * static_cast<long>(n + 1);
    const long obs2 = std::lround(2.0 * observed);
    const long dev = std::labs(obs2 - mu2);
    long double hit = 0.0L, all = 0.0L;
    for (long s = 0; s <= max_sum; ++s) {
        const long double w = ways[n_a][static_cast<std::size_t>(s)];
        all += w;
        if (std::labs(s - mu2) >= dev) hit += w;
    }
    return static_cast<double>(hit / all);
}

}  // namespace

std::vector<double> midranks(std::span<const double> values) {
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j < idx.size() && values[idx[j]] == values[idx[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) ranks[idx[k]] = r;
        i = j;
    }
    return ranks;
}

TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw InvalidArgument("mann_whitney_u needs two non-empty samples");
    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    const std::vector<double> ranks = midranks(pooled);
    const auto na = static_cast<double>(a.size());
    const auto nb = static_cast<double>(b.size());
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) rank_sum += ranks[i];

    TestResult out;
    out.statistic = rank_sum - na * (na + 1.0) / 2.0;
    if (a.size() * b.size() <= kExactPairLimit) {
        // The deviation of either rank sum from its mean is the same; enumerate the smaller sample.
        out.exact = true;
        const double total = (na + nb) * (na + nb + 1.0) / 2.0;
        out.p_value = a.size() <= b.size() ? exact_two_sided(ranks, a.size(), rank_sum)
                                           : exact_two_sided(ranks, b.size(), total - rank_sum);
        return out;
    }
    const double n = na + nb;
    const double variance = na * nb / 12.0 * ((n + 1.0) - tie_term(pooled) / (n * (n - 1.0)));
    if (!(variance > 0.0)) {
        out.p_value = 1.0;
        return out;
    }
    const double z = std::max(0.0, std::abs(out.statistic - na * nb / 2.0) - 0.5) / std::sqrt(variance);
    out.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
    return out;
}

TestResult kruskal_wallis(const std::vector<std::vector<double>>& samples) {
    if (samples.size() < 2) throw InvalidArgument("kruskal_wallis needs at least two groups");
    std::vector<double> pooled;
    for (const auto& s : samples) {
        if (s.empty()) throw InvalidArgument("kruskal_wallis needs non-empty groups");
        pooled.insert(pooled.end(), s.begin(), s.end());
    }
    const std::vector<double> ranks = midranks(pooled);
    const auto n = static_cast<double>(pooled.size());
    double h = 0.0;
    std::size_t offset = 0;
    for (const auto& s : samples) {
        double r = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) r += ranks[offset + i];
        offset += s.size();
        h += r * r / static_cast<double>(s.size());
    }
    h = 12.0 / (n * (n + 1.0)) * h - 3.0 * (n + 1.0);
    const double correction = 1.0 - tie_term(pooled) / (n * n * n - n);
    TestResult out;
    if (!(correction > 0.0)) return out;
    out.statistic = std::max(0.0, h / correction);
    const double df = static_cast<double>(samples.size() - 1);
    out.p_value = boost::math::gamma_q(df / 2.0, out.statistic / 2.0);
    return out;
}

Normality jarque_bera(std::span<const double> sample) {
    Normality out;
    const auto n = static_cast<double>(sample.size());
    if (sample.size() < 3) return out;
    const double m = mean(sample);
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double x : sample) {
        const double d = x - m;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if (!(m2 > 0.0)) return out;
    out.skewness = m3 / std::pow(m2, 1.5);
    out.excess_kurtosis = m4 / (m2 * m2) - 3.0;
    out.jarque_bera = n / 6.0 * (out.skewness * out.skewness + out.excess_kurtosis * out.excess_kurtosis / 4.0);
    out.p_value = std::exp(-out.jarque_bera / 2.0);
    return out;
}

double median(std::vector<double> values) {
    if (values.empty()) throw InvalidArgument("median of an empty sample");
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    const double upper = values[mid];
    if (values.size() % 2 == 1) return upper;
    const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

double mean(std::span<const double> values) {
    if (values.empty()) throw InvalidArgument("mean of an empty sample");
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

}  // namespace markdown::stats
