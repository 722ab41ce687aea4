#include "markdown/error.hpp"
#include "markdown/optimizer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_support.hpp"

using namespace markdown;

namespace {

/// s(d) = a * exp(b * d); parameters read from covariates.
class CurveModel : public DemandModel {
public:
    double predict(const std::string&, const Covariates& x, double depth) const override {
        return x.at("a") * std::exp(x.at("b") * depth);
    }
    std::string kind() const override { return "curve"; }
};

/// s(d) = level + slope * d for every product.
class LinearModel : public DemandModel {
public:
    LinearModel(double level, double slope) : level_(level), slope_(slope) {}
    double predict(const std::string&, const Covariates&, double depth) const override {
        return level_ + slope_ * depth;
    }
    std::string kind() const override { return "linear"; }

private:
    double level_, slope_;
};

Product curve_product(double a, double b, double price = 10.0, double cost = 4.0) {
    Product p;
    p.id = "x";
    p.group = "g";
    p.full_price = Money::from_major(price);
    p.unit_cost = Money::from_major(cost);
    p.stock_units = 100;
    p.sold_units = 5;
    p.covariates = {{"a", a}, {"b", b}};
    return p;
}

}  // namespace

TEST(Profit, UnitProfitAndTotal) {
    const Product p = curve_product(3.0, 0.0);
    const ProfitModel profit;
    EXPECT_DOUBLE_EQ(profit.unit_profit(p, 0.2), 10.0 * 0.8 - 4.0);
    EXPECT_DOUBLE_EQ(expected_total_profit(p, 0.2, CurveModel{}, profit), 3.0 * 4.0);
    EXPECT_THROW(expected_total_profit(p, 1.5, CurveModel{}, profit), InvalidArgument);
}

TEST(OptimizeDepth, MatchesEnumerationOnRandomProducts) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> a(0.1, 20.0), b(0.0, 4.0), price(5.0, 80.0), ratio(0.2, 0.7);
    const DepthSet grid = DepthSet::range(0.1, 0.7, 0.1);
    const CurveModel model;
    const ProfitModel profit;
    for (int i = 0; i < 1000; ++i) {
        const double pr = price(rng);
        const Product p = curve_product(a(rng), b(rng), pr, pr * ratio(rng));
        double best_d = grid.values().front(), best = -INFINITY;
        for (double d : grid) {
            const double s = p.covariates.at("a") * std::exp(p.covariates.at("b") * d);
            const double obj = s * s * ((p.price() * (1.0 - d)) - p.cost());
            if (obj > best) {
                best = obj;
                best_d = d;
            }
        }
        const DepthChoice c = optimize_depth(p, grid, model, profit);
        ASSERT_EQ(c.depth, best_d) << i;
        ASSERT_EQ(c.no_profitable_depth, !(best > 0.0));
    }
}

TEST(OptimizeDepth, UnprofitableFallsBackToShallowest) {
    const Product p = curve_product(5.0, 1.0, 10.0, 9.5);
    const DepthChoice c = optimize_depth(p, DepthSet({0.1, 0.2, 0.3}), CurveModel{}, ProfitModel{});
    EXPECT_TRUE(c.no_profitable_depth);
    EXPECT_EQ(c.depth, 0.1);
}

TEST(OptimizeDepth, TiesKeepShallower) {
    const Product p = curve_product(0.0, 0.0);
    EXPECT_TRUE(optimize_depth(p, DepthSet({0.2, 0.4}), CurveModel{}, ProfitModel{}).no_profitable_depth);
    const Product flat = curve_product(2.0, 0.0, 10.0, 0.0);
    // Flat demand: the shallowest depth earns the most.
    EXPECT_EQ(optimize_depth(flat, DepthSet({0.2, 0.4}), CurveModel{}, ProfitModel{}).depth, 0.2);
}

TEST(OptimizeDepth, EmptySetThrows) {
    EXPECT_THROW(optimize_depth(curve_product(1, 1), DepthSet{}, CurveModel{}, ProfitModel{}), InvalidArgument);
}

TEST(Holdout, SplitsCoverTheSolution) {
    Assignment a;
    for (int i = 0; i < 101; ++i) a.set("p" + std::to_string(i), 0.1 * (1 + i % 5));
    const auto [control, treatment] = randomize_holdout(a, 0.5, 3);
    EXPECT_EQ(control.size(), 51u);  // round(50.5)
    EXPECT_EQ(control.size() + treatment.size(), a.size());
    for (const auto& [id, d] : control) {
        EXPECT_FALSE(treatment.contains(id));
        EXPECT_EQ(*a.depth(id), d);
    }
    const auto again = randomize_holdout(a, 0.5, 3);
    EXPECT_EQ(again.first.size(), control.size());
    for (const auto& [id, d] : control) EXPECT_TRUE(again.first.contains(id));
}

TEST(Holdout, ExtremesAndBadFraction) {
    Assignment a;
    a.set("p", 0.2);
    a.set("q", 0.3);
    EXPECT_EQ(randomize_holdout(a, 0.0, 1).second.size(), 2u);
    EXPECT_EQ(randomize_holdout(a, 1.0, 1).first.size(), 2u);
    EXPECT_EQ(randomize_holdout(Assignment{}, 0.5, 1).first.size(), 0u);
    EXPECT_THROW(randomize_holdout(a, 1.5, 1), InvalidArgument);
}

TEST(Pipeline, ControlKeepsSolverDepthsAndPinsStay) {
    const Catalogue cat = testing_support::lognormal_catalogue(3000, 4);
    IthaxTargets targets;
    targets.stock_value = 0.2 * stock_value(std::span<const Product>(cat.begin(), cat.end()));
    targets.stock_depth = 0.3;
    Levers levers;
    levers.inclusions.set(cat[0].id, 0.5);
    const DepthSet depths = DepthSet::range(0.0, 0.7, 0.1);
    const BandMapping b0 = default_initial_mapping(cat, depths, targets, levers);
    const auto region = FeasibleRegion::everywhere(cat.groups(), DepthSet::range(0.1, 0.7, 0.1));
    const LinearModel model(2.0, 1.0);
    const OptimizedEvent event = run_promotheus(cat, targets, b0, levers, model, region, PipelineOptions{0.5, 9});
    EXPECT_TRUE(event.solution.report.converged);
    for (const EventLine& line : event.lines) {
        if (line.arm == Arm::control) EXPECT_EQ(line.final_depth, line.ithax_depth);
        if (line.product_id == cat[0].id) {
            EXPECT_TRUE(line.pinned);
            EXPECT_EQ(line.final_depth, 0.5);
        }
    }
    EXPECT_EQ(event.combined().size(), event.solution.assignment.size());
}

TEST(Pipeline, EmptyRegionFallsBackToSolverDepth) {
    const Catalogue cat = testing_support::lognormal_catalogue(2000, 5);
    IthaxTargets targets;
    targets.stock_value = 0.2 * stock_value(std::span<const Product>(cat.begin(), cat.end()));
    targets.stock_depth = 0.3;
    const DepthSet depths = DepthSet::range(0.0, 0.7, 0.1);
    const BandMapping b0 = default_initial_mapping(cat, depths, targets);
    const FeasibleRegion nowhere;
    const LinearModel model(1.0, 0.0);
    const OptimizedEvent event = run_promotheus(cat, targets, b0, {}, model, nowhere, PipelineOptions{0.0, 1});
    ASSERT_FALSE(event.lines.empty());
    for (const EventLine& line : event.lines) {
        EXPECT_EQ(line.arm, Arm::treatment);
        EXPECT_TRUE(line.fallback);
        EXPECT_EQ(line.final_depth, line.ithax_depth);
    }
}
