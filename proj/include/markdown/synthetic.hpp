#pragma once

#include "markdown/demand.hpp"
#include "markdown/domain.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace markdown {

/// Knobs of the synthetic retail world. Units: weeks, units of stock, major currency.
struct WorldConfig {
    std::size_t products = 10000;
    int groups = 4;
    int history_weeks = 104;

    double cover_median = 20.0;
    double cover_sigma = 0.6;
    double stock_median = 60.0;
    double stock_sigma = 0.9;
    double price_median = 30.0;
    double price_sigma = 0.5;
    double zero_seller_share = 0.02;
    double cost_ratio_min = 0.25;
    double cost_ratio_max = 0.45;

    // Elasticity: group means spread evenly over [min, max], per-product jitter on top.
    double elasticity_min = 0.8;
    double elasticity_max = 2.6;
    double elasticity_jitter = 0.3;
    std::optional<double> fixed_elasticity;

    double season_amplitude = 0.15;
    double age_decay = 0.002;
    /// Gamma-Poisson shape. 0 disables noise (expected sales are rounded).
    double noise_shape = 8.0;

    // Historical pricing policy: poorer sellers got deeper discounts.
    double markdown_share = 0.3;
    double history_depth_min = 0.1;
    double history_depth_max = 0.8;
    double history_depth_step = 0.1;
    double history_depth_noise = 0.08;

    void validate() const;
};

/// Ground-truth demand parameters of one product.
struct ProductTruth {
    double base = 0.0;        // full-price weekly rate at the catalogue period
    double elasticity = 0.0;  // log-sales gain per unit depth
    double amplitude = 0.0;
    double phase = 0.0;
    double age_decay = 0.0;
    std::int64_t stock_units = 0;
};

class SyntheticWorld {
public:
    SyntheticWorld() = default;
    SyntheticWorld(WorldConfig config, std::uint64_t seed, int period, std::map<std::string, ProductTruth> truth);

    /// Expected weekly sales at `week` for a given depth. Non-decreasing in depth.
    double expected_sales(const std::string& product_id, double depth, int week) const;
    double expected_sales(const std::string& product_id, double depth) const {
        return expected_sales(product_id, depth, period_);
    }

    const ProductTruth& truth(const std::string& product_id) const;
    bool contains(const std::string& product_id) const { return truth_.count(product_id) != 0; }
    const WorldConfig& config() const noexcept { return config_; }
    std::uint64_t seed() const noexcept { return seed_; }
    int period() const noexcept { return period_; }
    std::size_t size() const noexcept { return truth_.size(); }

private:
    WorldConfig config_;
    std::uint64_t seed_ = 0;
    int period_ = 0;
    std::map<std::string, ProductTruth> truth_;
};

struct GeneratedData {
    Catalogue catalogue;
    std::vector<TrainingRecord> history;
    SyntheticWorld world;
};

/// Draws a catalogue, weeks 1..history_weeks of sales, and the world behind them.
/// The catalogue period is history_weeks + 1; its sold_units are the last history week.
GeneratedData generate_catalogue(const WorldConfig& config, std::uint64_t seed);

/// Realized units per product summed over `periods` event weeks, capped at stock.
std::map<std::string, std::int64_t> simulate_sales(const SyntheticWorld& world, const Assignment& assignment,
                                                   int periods, std::uint64_t seed);

/// Expected weekly sales straight from the world, ignoring covariates.
class GroundTruthModel : public DemandModel {
public:
    explicit GroundTruthModel(const SyntheticWorld& world) : world_(&world) {}
    using DemandModel::predict;
    double predict(const std::string& product_id, const Covariates&, double depth) const override {
        return world_->expected_sales(product_id, depth);
    }
    std::string kind() const override { return "ground_truth"; }

private:
    const SyntheticWorld* world_;
};

/// Default covariate list produced by generate_catalogue for `groups` groups.
std::vector<std::string> synthetic_features(int groups);

/// Group label for index g: A, B, ..., Z, G26, G27, ...
std::string group_label(int g);

}  // namespace markdown
