#include "markdown/validation.hpp"

#include "markdown/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace markdown {

double wape(std::span<const double> actuals, std::span<const double> forecasts) {
    if (actuals.size() != forecasts.size()) throw InvalidArgument("wape: actuals and forecasts differ in length");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < actuals.size(); ++i) {
        num += std::abs(actuals[i] - forecasts[i]);
        den += actuals[i];
    }
    if (!(den > 0.0)) throw InvalidArgument("undefined WAPE: actuals sum to zero");
    return num / den;
}

std::vector<FoldSplit> timeseries_kfold(std::span<const TrainingRecord> history, int k, int horizon,
                                        int min_train_weeks) {
    if (k < 1 || horizon < 1 || min_train_weeks < 1)
        throw InvalidArgument("timeseries_kfold: folds, horizon and minimum training span must be >= 1");
    if (history.empty()) throw InvalidArgument("timeseries_kfold: empty history");
    auto [lo, hi] = std::minmax_element(history.begin(), history.end(),
                                        [](const auto& a, const auto& b) { return a.week < b.week; });
    const int first = lo->week, last = hi->week;
    const int available = last - first + 1;
    const int required = k * horizon + min_train_weeks;
    if (available < required)
        throw InvalidArgument("insufficient history: " + std::to_string(k) + " folds of " + std::to_string(horizon) +
                              " weeks need " + std::to_string(required) + " weeks, history spans " +
                              std::to_string(available));
    std::vector<FoldSplit> folds;
    for (int j = 1; j <= k; ++j) {
        FoldSplit f;
        f.fold = j;
        f.holdout_last = last - (j - 1) * horizon;
        f.holdout_first = f.holdout_last - horizon + 1;
        f.train_first = first;
        f.train_last = f.holdout_first - 1;
        folds.push_back(f);
    }
    return folds;
}

FeasibleRegion::FeasibleRegion(DepthSet grid, double threshold, std::map<std::string, std::vector<RegionCell>> cells)
    : grid_(std::move(grid)), threshold_(threshold), cells_(std::move(cells)) {
    for (const auto& [g, row] : cells_)
        if (row.size() != grid_.size()) throw InvalidArgument("region row for group " + g + " does not match the grid");
}

FeasibleRegion FeasibleRegion::everywhere(const std::vector<std::string>& groups, const DepthSet& grid) {
    std::map<std::string, std::vector<RegionCell>> cells;
    for (const auto& g : groups) cells[g] = std::vector<RegionCell>(grid.size(), RegionCell{0.0, 0, true, ""});
    return FeasibleRegion(grid, std::numeric_limits<double>::infinity(), std::move(cells));
}

DepthSet FeasibleRegion::allowed(const std::string& group) const {
    auto it = cells_.find(group);
    if (it == cells_.end()) return {};
    std::vector<double> out;
    for (std::size_t j = 0; j < grid_.size(); ++j)
        if (it->second[j].feasible) out.push_back(grid_.values()[j]);
    return DepthSet(std::move(out));
}

std::vector<std::string> FeasibleRegion::groups() const {
    std::vector<std::string> out;
    for (const auto& [g, row] : cells_) out.push_back(g);
    return out;
}

bool FeasibleRegion::contains(const std::string& group, double depth) const {
    auto it = cells_.find(group);
    if (it == cells_.end()) return false;
    for (std::size_t j = 0; j < grid_.size(); ++j)
        if (std::abs(grid_.values()[j] - depth) <= DepthSet::kTolerance) return it->second[j].feasible;
    return false;
}

FeasibleRegion region_from_table(const DepthSet& grid, const std::map<std::string, std::vector<double>>& table,
                                 double threshold) {
    std::map<std::string, std::vector<RegionCell>> cells;
    for (const auto& [g, row] : table) {
        if (row.size() != grid.size()) throw InvalidArgument("WAPE row for group " + g + " does not match the grid");
        auto& out = cells[g];
        for (double w : row) {
            RegionCell c;
            c.wape = w;
            if (std::isnan(w)) {
                c.reason = "no support";
            } else if (w < threshold) {
                c.feasible = true;
            } else {
                c.reason = "wape above threshold";
            }
            out.push_back(c);
        }
    }
    return FeasibleRegion(grid, threshold, std::move(cells));
}

FeasibleRegion build_feasible_region(std::span<const TrainingRecord> history, const Catalogue& catalogue,
                                     const ModelFitter& fit, const DepthSet& grid, const RegionOptions& options) {
    if (grid.empty()) throw InvalidArgument("feasible region needs a non-empty depth grid");
    const auto folds = timeseries_kfold(history, options.folds, options.horizon, options.min_train_weeks);
    const auto groups = catalogue.groups();
    const std::size_t m = grid.size();
    const bool grid_has_zero = grid.contains(0.0);

    struct Acc {
        double abs_err = 0.0;
        double actual = 0.0;
        std::size_t n = 0;
    };
    // Per group, per grid depth: list of fold-level WAPEs and total observations.
    std::map<std::string, std::vector<std::vector<double>>> fold_wapes;
    std::map<std::string, std::vector<std::size_t>> support;
    for (const auto& g : groups) {
        fold_wapes[g].assign(m, {});
        support[g].assign(m, 0);
    }

    std::vector<TrainingRecord> train;
    for (const FoldSplit& f : folds) {
        train.clear();
        for (const auto& r : history)
            if (r.week <= f.train_last) train.push_back(r);
        const std::unique_ptr<DemandModel> model = fit(train);

        std::map<std::string, std::vector<Acc>> acc;
        for (const auto& g : groups) acc[g].assign(m, {});
        for (const auto& r : history) {
            if (r.week < f.holdout_first || r.week > f.holdout_last) continue;
            if (r.depth <= 0.0 && !grid_has_zero) continue;
            const Product& p = catalogue.at(r.product_id);
            const double d = grid.nearest(r.depth);
            const auto j = static_cast<std::size_t>(
                std::lower_bound(grid.begin(), grid.end(), d - DepthSet::kTolerance) - grid.begin());
            const double forecast = model->predict(p.id, covariates_at(p, catalogue.period(), r.week), r.depth);
            Acc& a = acc[p.group][j];
            a.abs_err += std::abs(r.sales - forecast);
            a.actual += r.sales;
            ++a.n;
        }
        for (const auto& g : groups)
            for (std::size_t j = 0; j < m; ++j) {
                const Acc& a = acc[g][j];
                support[g][j] += a.n;
                if (a.n > 0 && a.actual > 0.0) fold_wapes[g][j].push_back(a.abs_err / a.actual);
            }
    }

    std::map<std::string, std::vector<RegionCell>> cells;
    for (const auto& g : groups) {
        auto& row = cells[g];
        for (std::size_t j = 0; j < m; ++j) {
            RegionCell c;
            c.observations = support[g][j];
            const auto& w = fold_wapes[g][j];
            if (c.observations < options.min_support || w.empty()) {
                c.wape = std::numeric_limits<double>::quiet_NaN();
                c.reason = "no support";
            } else {
                double s = 0.0;
                for (double x : w) s += x;
                c.wape = s / static_cast<double>(w.size());
                c.feasible = c.wape < options.threshold;
                if (!c.feasible) c.reason = "wape above threshold";
            }
            row.push_back(c);
        }
    }
    return FeasibleRegion(grid, options.threshold, std::move(cells));
}

MonotonicityAudit audit_monotonicity(const DemandModel& model, const Catalogue& catalogue, const DepthSet& grid,
                                     const FeasibleRegion& region) {
    MonotonicityAudit audit;
    std::size_t ok_full = 0, ok_strict = 0;
    for (const Product& p : catalogue) {
        ++audit.products;
        const auto curve = predict_curve(model, p, grid);
        bool non_decreasing = true;
        for (std::size_t i = 1; i < curve.size(); ++i)
            if (curve[i].second < curve[i - 1].second) non_decreasing = false;
        if (non_decreasing) ++ok_full;
        else audit.decreasing.push_back(p.id);

        const DepthSet allowed = region.allowed(p.group).intersect(grid);
        bool strict = true;
        double prev = -std::numeric_limits<double>::infinity();
        for (double d : allowed) {
            const double s = model.predict(p, d);
            if (!(s > prev)) strict = false;
            prev = s;
        }
        if (strict) ++ok_strict;
        else audit.not_strict.push_back(p.id);
    }
    if (audit.products > 0) {
        audit.non_decreasing = static_cast<double>(ok_full) / static_cast<double>(audit.products);
        audit.strictly_in_region = static_cast<double>(ok_strict) / static_cast<double>(audit.products);
    }
    return audit;
}

}  // namespace markdown
