#include "markdown/synthetic.hpp"

#include "markdown/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace markdown {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kVelocityWeeks = 4;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::int64_t draw_units(double lambda, double shape, std::mt19937_64& rng) {
    if (!(lambda > 0.0)) return 0;
    if (shape <= 0.0) return std::llround(lambda);
    std::gamma_distribution<double> gamma(shape, lambda / shape);
    std::poisson_distribution<std::int64_t> poisson(gamma(rng));
    return poisson(rng);
}

double season_factor(const ProductTruth& t, int week) {
    return 1.0 + t.amplitude * std::sin(kTwoPi * week / 52.0 + t.phase);
}

}  // namespace

void WorldConfig::validate() const {
    if (products == 0) throw InvalidArgument("world needs at least one product");
    if (groups < 1) throw InvalidArgument("world needs at least one group");
    if (history_weeks < 2) throw InvalidArgument("history must span at least 2 weeks");
    if (!(cover_median > 0.0 && stock_median > 0.0 && price_median > 0.0))
        throw InvalidArgument("cover, stock and price medians must be positive");
    if (cover_sigma < 0.0 || stock_sigma < 0.0 || price_sigma < 0.0)
        throw InvalidArgument("lognormal spreads must be >= 0");
    if (!(zero_seller_share >= 0.0 && zero_seller_share < 1.0))
        throw InvalidArgument("zero_seller_share must lie in [0, 1)");
    if (!(0.0 <= cost_ratio_min && cost_ratio_min <= cost_ratio_max && cost_ratio_max < 1.0))
        throw InvalidArgument("cost ratios must satisfy 0 <= min <= max < 1");
    if (!(0.0 <= elasticity_min && elasticity_min <= elasticity_max) || elasticity_jitter < 0.0)
        throw InvalidArgument("elasticity range must be non-negative and ordered");
    if (fixed_elasticity && *fixed_elasticity < 0.0) throw InvalidArgument("fixed_elasticity must be >= 0");
    if (!(season_amplitude >= 0.0 && season_amplitude < 0.6)) throw InvalidArgument("season_amplitude must lie in [0, 0.6)");
    if (age_decay < 0.0 || noise_shape < 0.0) throw InvalidArgument("age_decay and noise_shape must be >= 0");
    if (!(markdown_share >= 0.0 && markdown_share <= 1.0)) throw InvalidArgument("markdown_share must lie in [0, 1]");
    if (!(0.0 < history_depth_min && history_depth_min <= history_depth_max && history_depth_max <= 1.0) ||
        !(history_depth_step > 0.0) || history_depth_noise < 0.0)
        throw InvalidArgument("history depth policy must satisfy 0 < min <= max <= 1 and step > 0");
}

std::string group_label(int g) {
    if (g < 26) return std::string(1, static_cast<char>('A' + g));
    return "G" + std::to_string(g);
}

std::vector<std::string> synthetic_features(int groups) {
    std::vector<std::string> names{features::kPriceBand, features::kVelocity, features::kSeasonSin,
                                   features::kSeasonCos, features::kWeeksOnSite};
    // One-hot for every group but the first; the intercept absorbs it.
    for (int g = 1; g < groups; ++g) names.push_back("group_" + group_label(g));
    return names;
}

SyntheticWorld::SyntheticWorld(WorldConfig config, std::uint64_t seed, int period,
                               std::map<std::string, ProductTruth> truth)
    : config_(std::move(config)), seed_(seed), period_(period), truth_(std::move(truth)) {}

const ProductTruth& SyntheticWorld::truth(const std::string& product_id) const {
    auto it = truth_.find(product_id);
    if (it == truth_.end()) throw InvalidArgument("product " + product_id + " is not in the world");
    return it->second;
}

double SyntheticWorld::expected_sales(const std::string& product_id, double depth, int week) const {
    const ProductTruth& t = truth(product_id);
    const double season = season_factor(t, week) / season_factor(t, period_);
    return t.base * std::exp(t.elasticity * depth) * season * std::exp(t.age_decay * (period_ - week));
}

GeneratedData generate_catalogue(const WorldConfig& config, std::uint64_t seed) {
    config.validate();
    std::mt19937_64 rng(seed);
    const int period = config.history_weeks + 1;
    const std::size_t n = config.products;

    std::uniform_int_distribution<int> group_of(0, config.groups - 1);
    std::lognormal_distribution<double> cover(std::log(config.cover_median), config.cover_sigma);
    std::lognormal_distribution<double> stock(std::log(config.stock_median), config.stock_sigma);
    std::lognormal_distribution<double> price(std::log(config.price_median), config.price_sigma);
    std::bernoulli_distribution zero_seller(config.zero_seller_share);
    std::uniform_real_distribution<double> cost_ratio(config.cost_ratio_min, config.cost_ratio_max);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<int> age(20, 260);

    std::vector<double> group_elasticity(static_cast<std::size_t>(config.groups));
    std::vector<double> group_phase(static_cast<std::size_t>(config.groups));
    for (int g = 0; g < config.groups; ++g) {
        const double t = config.groups == 1 ? 0.5 : static_cast<double>(g) / (config.groups - 1);
        group_elasticity[static_cast<std::size_t>(g)] =
            config.elasticity_min + t * (config.elasticity_max - config.elasticity_min);
        group_phase[static_cast<std::size_t>(g)] = kTwoPi * unit(rng);
    }

    const int width = std::max<int>(5, static_cast<int>(std::to_string(n).size()));
    std::vector<Product> products(n);
    std::vector<ProductTruth> truths(n);
    std::vector<double> cover_target(n);
    std::vector<int> weeks_on_site(n);
    for (std::size_t i = 0; i < n; ++i) {
        Product& p = products[i];
        ProductTruth& t = truths[i];
        const int g = group_of(rng);
        std::string num = std::to_string(i + 1);
        p.id = "P" + std::string(static_cast<std::size_t>(width) - num.size(), '0') + num;
        p.group = group_label(g);
        p.full_price = Money::from_major(std::max(1.0, price(rng)));
        p.unit_cost = Money{std::llround(static_cast<double>(p.full_price.minor) * cost_ratio(rng))};
        p.stock_units = std::max<std::int64_t>(1, std::llround(stock(rng)));
        cover_target[i] = cover(rng);
        t.base = zero_seller(rng) ? 0.0 : static_cast<double>(p.stock_units) / cover_target[i];
        t.stock_units = p.stock_units;
        t.elasticity = config.fixed_elasticity
                           ? *config.fixed_elasticity
                           : std::max(0.05, group_elasticity[static_cast<std::size_t>(g)] +
                                                config.elasticity_jitter * normal(rng));
        t.amplitude = config.season_amplitude * (0.5 + unit(rng));
        t.phase = group_phase[static_cast<std::size_t>(g)] + 0.3 * normal(rng);
        t.age_decay = config.age_decay * (0.5 + unit(rng));
        weeks_on_site[i] = age(rng);
    }

    // Cover percentile drives the historical discount: the confound.
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double ca = truths[a].base > 0 ? cover_target[a] : INFINITY;
        const double cb = truths[b].base > 0 ? cover_target[b] : INFINITY;
        return ca < cb || (ca == cb && a < b);
    });
    std::vector<double> percentile(n);
    for (std::size_t r = 0; r < n; ++r) percentile[order[r]] = n == 1 ? 0.5 : static_cast<double>(r) / (n - 1);

    const DepthSet policy_grid =
        DepthSet::range(config.history_depth_min, config.history_depth_max, config.history_depth_step);
    std::bernoulli_distribution on_markdown(config.markdown_share);
    const double span = config.history_depth_max - config.history_depth_min;

    std::map<std::string, ProductTruth> truth_map;
    std::vector<TrainingRecord> history;
    history.reserve(n * static_cast<std::size_t>(config.history_weeks));
    for (std::size_t i = 0; i < n; ++i) {
        Product& p = products[i];
        const ProductTruth& t = truths[i];
        auto lambda = [&](double depth, int week) {
            return t.base * std::exp(t.elasticity * depth) * season_factor(t, week) / season_factor(t, period) *
                   std::exp(t.age_decay * (period - week));
        };

        double pre = 0.0;
        for (int w = 1 - kVelocityWeeks; w <= 0; ++w) pre += static_cast<double>(draw_units(lambda(0.0, w), config.noise_shape, rng));

        for (int w = 1; w <= config.history_weeks; ++w) {
            double depth = 0.0;
            if (w < config.history_weeks && on_markdown(rng)) {
                const double raw = config.history_depth_min + span * percentile[i] +
                                   config.history_depth_noise * normal(rng);
                depth = policy_grid.nearest(std::clamp(raw, config.history_depth_min, config.history_depth_max));
            }
            const std::int64_t units = draw_units(lambda(depth, w), config.noise_shape, rng);
            history.push_back(TrainingRecord{p.id, w, depth, static_cast<double>(units)});
            if (w == config.history_weeks) p.sold_units = units;
        }

        p.covariates[features::kPriceBand] = std::log(p.full_price.major());
        p.covariates[features::kVelocity] = std::log1p(pre / kVelocityWeeks);
        p.covariates[features::kSeasonSin] = std::sin(kTwoPi * period / 52.0);
        p.covariates[features::kSeasonCos] = std::cos(kTwoPi * period / 52.0);
        p.covariates[features::kWeeksOnSite] = weeks_on_site[i];
        for (int g = 1; g < config.groups; ++g)
            p.covariates["group_" + group_label(g)] = p.group == group_label(g) ? 1.0 : 0.0;
        truth_map.emplace(p.id, t);
    }

    return GeneratedData{Catalogue(period, std::move(products)), std::move(history),
                         SyntheticWorld(config, seed, period, std::move(truth_map))};
}

std::map<std::string, std::int64_t> simulate_sales(const SyntheticWorld& world, const Assignment& assignment,
                                                   int periods, std::uint64_t seed) {
    if (periods < 0) throw InvalidArgument("periods must be >= 0");
    std::map<std::string, std::int64_t> out;
    for (const auto& [id, depth] : assignment) {
        const ProductTruth& t = world.truth(id);
        // Each product has its own stream so results do not depend on which other products are priced.
        std::mt19937_64 rng(splitmix64(seed ^ splitmix64(fnv1a(id))));
        std::int64_t total = 0;
        for (int k = 0; k < periods; ++k)
            total += draw_units(world.expected_sales(id, depth, world.period() + k), world.config().noise_shape, rng);
        out.emplace(id, std::min(total, t.stock_units));
    }
    return out;
}

}  // namespace markdown
