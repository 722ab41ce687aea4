#include "markdown/error.hpp"
#include "markdown/synthetic.hpp"
#include "markdown/validation.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"

using namespace markdown;

namespace {

std::vector<TrainingRecord> weeks(int first, int last) {
    std::vector<TrainingRecord> out;
    for (int w = first; w <= last; ++w) out.push_back({"p", w, 0.0, 1.0});
    return out;
}

/// Wraps a model and halves its predictions beyond `from`.
class BrokenModel : public DemandModel {
public:
    BrokenModel(const DemandModel& inner, double from) : inner_(inner), from_(from) {}
    double predict(const std::string& id, const Covariates& x, double depth) const override {
        const double s = inner_.predict(id, x, depth);
        return depth > from_ ? 0.5 * s : s;
    }
    std::string kind() const override { return "broken"; }

private:
    const DemandModel& inner_;
    double from_;
};

}  // namespace

TEST(Wape, HandComputed) {
    const std::vector<double> a{10, 20, 30}, f{12, 18, 33};
    EXPECT_NEAR(wape(a, f), 7.0 / 60.0, 1e-12);
}

TEST(Wape, PerfectIsZero) {
    const std::vector<double> a{1, 2, 3};
    EXPECT_EQ(wape(a, a), 0.0);
}

TEST(Wape, ZeroActualsThrow) {
    const std::vector<double> a{0, 0}, f{1, 1};
    EXPECT_THROW(wape(a, f), InvalidArgument);
}

TEST(KFold, TenFoldsOfFiveOverTwoYears) {
    const auto history = weeks(1, 104);
    const auto folds = timeseries_kfold(history, 10, 5);
    ASSERT_EQ(folds.size(), 10u);
    EXPECT_EQ(folds[0], (FoldSplit{1, 1, 99, 100, 104}));
    EXPECT_EQ(folds[9], (FoldSplit{10, 1, 54, 55, 59}));
    for (const FoldSplit& f : folds) {
        EXPECT_LT(f.train_last, f.holdout_first);
        EXPECT_EQ(f.holdout_last - f.holdout_first + 1, 5);
    }
}

TEST(KFold, OneYearIsTooShort) {
    const auto history = weeks(1, 52);
    EXPECT_THROW(timeseries_kfold(history, 10, 5), InvalidArgument);
}

TEST(KFold, MinimumTrainingSpanIsBinding) {
    EXPECT_NO_THROW(timeseries_kfold(weeks(1, 58), 10, 5));
    EXPECT_THROW(timeseries_kfold(weeks(1, 57), 10, 5), InvalidArgument);
}

TEST(Region, PublishedTablePattern) {
    const DepthSet grid = DepthSet::range(0.2, 0.8, 0.1);
    const FeasibleRegion region = region_from_table(grid, testing_support::published_wape_table(), 0.55);
    const auto expected = testing_support::published_feasible_pattern();
    for (const auto& [g, row] : expected) {
        const auto& cells = region.cells().at(g);
        ASSERT_EQ(cells.size(), row.size());
        for (std::size_t i = 0; i < row.size(); ++i) {
            EXPECT_EQ(cells[i].feasible, row[i]) << g << " " << grid.values()[i];
            EXPECT_EQ(region.contains(g, grid.values()[i]), row[i]);
        }
    }
    EXPECT_EQ(region.allowed("C").values(), (std::vector<double>{0.2, 0.3, 0.4, 0.5, 0.6}));
    EXPECT_EQ(region.cells().at("A")[0].reason, "wape above threshold");
}

TEST(Region, NaNMeansNoSupport) {
    const DepthSet grid({0.1, 0.2});
    const FeasibleRegion region = region_from_table(grid, {{"g", {0.3, std::nan("")}}}, 0.55);
    EXPECT_TRUE(region.contains("g", 0.1));
    EXPECT_FALSE(region.contains("g", 0.2));
    EXPECT_EQ(region.cells().at("g")[1].reason, "no support");
    EXPECT_TRUE(region.allowed("unknown").empty());
}

TEST(Region, RowLengthMismatchThrows) {
    EXPECT_THROW(region_from_table(DepthSet({0.1, 0.2}), {{"g", {0.3}}}, 0.55), InvalidArgument);
}

TEST(Region, BuiltFromBacktestOnSyntheticHistory) {
    WorldConfig cfg;
    cfg.products = 1500;
    cfg.groups = 2;
    cfg.history_weeks = 40;
    const GeneratedData data = generate_catalogue(cfg, 21);
    const Catalogue& cat = data.catalogue;
    RegionOptions options;
    options.folds = 3;
    const DepthSet grid = DepthSet::range(0.1, 0.8, 0.1);
    int fits = 0;
    const FeasibleRegion region = build_feasible_region(
        data.history, cat,
        [&](std::span<const TrainingRecord> train) {
            ++fits;
            return std::make_unique<BaselineModel>(fit_baseline(train, cat));
        },
        grid, options);
    EXPECT_EQ(fits, 3);
    ASSERT_EQ(region.groups(), (std::vector<std::string>{"A", "B"}));
    for (const auto& [g, cells] : region.cells()) {
        ASSERT_EQ(cells.size(), grid.size());
        for (const RegionCell& c : cells) {
            if (c.reason == "no support") {
                EXPECT_FALSE(c.feasible);
                continue;
            }
            EXPECT_GE(c.observations, options.min_support);
            EXPECT_EQ(c.feasible, c.wape < options.threshold);
        }
    }
    EXPECT_FALSE(region.allowed("A").empty());
}

TEST(Audit, BaselineCurvesNeverDecrease) {
    WorldConfig cfg;
    cfg.products = 800;
    cfg.history_weeks = 30;
    const GeneratedData data = generate_catalogue(cfg, 2);
    const BaselineModel model = fit_baseline(data.history, data.catalogue);
    const DepthSet grid = DepthSet::range(0.0, 0.8, 0.1);
    const auto region = FeasibleRegion::everywhere(data.catalogue.groups(), grid);
    const MonotonicityAudit audit = audit_monotonicity(model, data.catalogue, grid, region);
    EXPECT_EQ(audit.products, data.catalogue.size());
    EXPECT_EQ(audit.non_decreasing, 1.0);
    EXPECT_TRUE(audit.decreasing.empty());
}

TEST(Audit, BrokenAdapterIsCaught) {
    WorldConfig cfg;
    cfg.products = 300;
    cfg.history_weeks = 30;
    cfg.zero_seller_share = 0.0;
    const GeneratedData data = generate_catalogue(cfg, 3);
    const GroundTruthModel truth(data.world);
    const BrokenModel broken(truth, 0.5);
    const DepthSet grid = DepthSet::range(0.1, 0.8, 0.1);
    // Region stops at 0.5, so the damage is outside it.
    const FeasibleRegion region = region_from_table(
        grid, {{"A", {0.3, 0.3, 0.3, 0.3, 0.9, 0.9, 0.9, 0.9}},
               {"B", {0.3, 0.3, 0.3, 0.3, 0.9, 0.9, 0.9, 0.9}},
               {"C", {0.3, 0.3, 0.3, 0.3, 0.9, 0.9, 0.9, 0.9}},
               {"D", {0.3, 0.3, 0.3, 0.3, 0.9, 0.9, 0.9, 0.9}}},
        0.55);
    const MonotonicityAudit audit = audit_monotonicity(broken, data.catalogue, grid, region);
    EXPECT_LT(audit.non_decreasing, 1.0);
    EXPECT_FALSE(audit.decreasing.empty());
    EXPECT_EQ(audit.strictly_in_region, 1.0);
}
