#pragma once

#include "markdown/demand.hpp"
#include "markdown/domain.hpp"
#include "markdown/ithax.hpp"
#include "markdown/validation.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace markdown {

/// Unit profit after discount: f * (1 - d) - unit cost, in major units.
struct ProfitModel {
    double unit_profit(const Product& p, double depth) const { return p.price() * (1.0 - depth) - p.cost(); }
};

/// Expected sales times unit profit at `depth`. Negative when priced below cost.
double expected_total_profit(const Product& product, double depth, const DemandModel& model,
                             const ProfitModel& profit = {});

struct DepthChoice {
    double depth = 0.0;
    double objective = 0.0;  // expected sales * expected profit
    double expected_sales = 0.0;
    double expected_profit = 0.0;
    bool no_profitable_depth = false;
};

/// argmax over `feasible` of s * g; ties go to the shallower depth. When nothing is
/// profitable the shallowest depth is returned with the flag set.
DepthChoice optimize_depth(const Product& product, const DepthSet& feasible, const DemandModel& model,
                           const ProfitModel& profit = {});

/// Uniform random split by product: round(fraction * n) products go to control.
std::pair<Assignment, Assignment> randomize_holdout(const Assignment& solution, double holdout_fraction,
                                                    std::uint64_t seed);

enum class Arm { control, treatment };
std::string to_string(Arm arm);

struct EventLine {
    std::string product_id;
    Arm arm = Arm::control;
    double ithax_depth = 0.0;
    double final_depth = 0.0;
    double expected_sales = 0.0;
    double expected_profit = 0.0;
    bool fallback = false;             // treatment product with no usable depth kept its supply-side depth
    bool no_profitable_depth = false;
    bool pinned = false;               // inclusion lever, never re-priced
};

struct OptimizedEvent {
    Solution solution;     // supply-side result
    Assignment control;    // keeps supply-side depths
    Assignment treatment;  // depth-optimized
    std::vector<EventLine> lines;  // sorted by product id
    double control_expected_profit = 0.0;
    double treatment_expected_profit = 0.0;
    double final_stock_depth = 0.0;  // diagnostic, not enforced

    Assignment combined() const;
};

struct PipelineOptions {
    double holdout_fraction = 0.5;
    std::uint64_t seed = 0;
};

/// Supply-side solve, random holdout, then per-product re-pricing of the treatment half
/// within (group region) intersect (event depths).
OptimizedEvent run_promotheus(const Catalogue& catalogue, const IthaxTargets& targets, const BandMapping& initial,
                              const Levers& levers, const DemandModel& model, const FeasibleRegion& region,
                              const PipelineOptions& options);

/// Re-prices an existing supply-side solution. run_promotheus calls this after solving.
OptimizedEvent optimize_event(const Catalogue& catalogue, Solution solution, const DepthSet& event_depths,
                              const Levers& levers, const DemandModel& model, const FeasibleRegion& region,
                              const PipelineOptions& options);

}  // namespace markdown
