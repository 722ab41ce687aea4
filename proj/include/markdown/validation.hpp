#pragma once

#include "markdown/demand.hpp"
#include "markdown/domain.hpp"

#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace markdown {

/// Weighted absolute percentage error: sum |a - f| / sum a. Throws when sum a == 0.
double wape(std::span<const double> actuals, std::span<const double> forecasts);

/// One backtest split. All ranges are inclusive week numbers.
struct FoldSplit {
    int fold = 0;
    int train_first = 0;
    int train_last = 0;
    int holdout_first = 0;
    int holdout_last = 0;

    friend bool operator==(const FoldSplit&, const FoldSplit&) = default;
};

/// Fold 1 holds out the latest `horizon` weeks; fold k is shifted back by (k - 1) * horizon.
/// Every fold keeps at least `min_train_weeks` of training before its holdout.
std::vector<FoldSplit> timeseries_kfold(std::span<const TrainingRecord> history, int k, int horizon,
                                        int min_train_weeks = 8);

/// Backtest accuracy of one (group, depth) cell.
struct RegionCell {
    double wape = 0.0;  // NaN when there is no support
    std::size_t observations = 0;
    bool feasible = false;
    std::string reason;  // empty, "no support" or "wape above threshold"
};

/// Per-group depths where backtested accuracy clears a WAPE threshold.
class FeasibleRegion {
public:
    FeasibleRegion() = default;
    FeasibleRegion(DepthSet grid, double threshold, std::map<std::string, std::vector<RegionCell>> cells);

    /// Every cell feasible for every listed group; for tests and ithax-only runs.
    static FeasibleRegion everywhere(const std::vector<std::string>& groups, const DepthSet& grid);

    const DepthSet& grid() const noexcept { return grid_; }
    double threshold() const noexcept { return threshold_; }
    const std::map<std::string, std::vector<RegionCell>>& cells() const noexcept { return cells_; }

    /// Allowed depths for a group; empty for unknown groups.
    DepthSet allowed(const std::string& group) const;
    std::vector<std::string> groups() const;
    bool contains(const std::string& group, double depth) const;

private:
    DepthSet grid_;
    double threshold_ = 0.0;
    std::map<std::string, std::vector<RegionCell>> cells_;
};

/// Region from a precomputed (group x depth) WAPE table. NaN entries mean no support.
FeasibleRegion region_from_table(const DepthSet& grid, const std::map<std::string, std::vector<double>>& table,
                                 double threshold);

using ModelFitter = std::function<std::unique_ptr<DemandModel>(std::span<const TrainingRecord> train)>;

struct RegionOptions {
    int folds = 10;
    int horizon = 5;
    double threshold = 0.55;
    std::size_t min_support = 30;
    int min_train_weeks = 8;
};

/// Fits on each fold's training weeks and scores holdout WAPE per (group, nearest grid depth).
/// Cell WAPE is the unweighted mean over folds that observed the cell.
FeasibleRegion build_feasible_region(std::span<const TrainingRecord> history, const Catalogue& catalogue,
                                     const ModelFitter& fit, const DepthSet& grid, const RegionOptions& options);

struct MonotonicityAudit {
    double non_decreasing = 0.0;     // fraction over the full grid
    double strictly_in_region = 0.0; // fraction strictly increasing over each product's allowed depths
    std::vector<std::string> decreasing;      // products failing the full-grid check
    std::vector<std::string> not_strict;      // products failing the in-region check
    std::size_t products = 0;
};

MonotonicityAudit audit_monotonicity(const DemandModel& model, const Catalogue& catalogue, const DepthSet& grid,
                                     const FeasibleRegion& region);

}  // namespace markdown
