#pragma once

#include "markdown/demand.hpp"
#include "markdown/domain.hpp"
#include "markdown/ithax.hpp"
#include "markdown/optimizer.hpp"
#include "markdown/stats.hpp"
#include "markdown/synthetic.hpp"
#include "markdown/validation.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace markdown {

struct ManualResult {
    Assignment assignment;
    double value = 0.0;
    bool insufficient_catalogue = false;
};

/// Naive operations heuristic: highest cover first, one uniform depth, fill until the value
/// target is reached. Products with no recent sales rank first (infinite cover).
ManualResult manual_baseline(const Catalogue& catalogue, double value_target, double depth,
                             const std::set<std::string>& exclusions = {});

inline constexpr const char* kManualArm = "manual";
inline constexpr const char* kSupplyArm = "supply_side";
inline constexpr const char* kFullArm = "full_optimization";

struct PolicyArm {
    std::string name;
    Assignment assignment;
    std::vector<std::string> product_ids;  // sorted, aligned with profits
    std::vector<double> profits;           // realized profit per product, major units
    double stock_value = 0.0;
    double stock_depth = 0.0;
};

struct ArmSummary {
    std::string name;
    std::size_t n = 0;
    double mean = 0.0;
    double median = 0.0;
    stats::Normality normality;
};

struct PairComparison {
    std::string a;
    std::string b;
    double u = 0.0;
    double p_value = 1.0;
    bool exact = false;
    std::optional<double> median_uplift;  // percent; empty when the denominator is zero
    std::optional<double> mean_uplift;
};

struct TestReport {
    std::uint64_t seed = 0;
    std::vector<ArmSummary> arms;
    stats::TestResult kruskal;
    std::vector<PairComparison> pairs;
    SolveReport supply_report;
    std::vector<PolicyArm> samples;
};

/// Pairwise uplift and Mann-Whitney rows for every (earlier, later) pair of arms.
std::vector<PairComparison> uplift_report(const std::vector<PolicyArm>& arms);

struct OnlineTestOptions {
    int event_weeks = 2;
    double holdout_fraction = 0.5;
    double manual_budget_share = 0.5;
    std::uint64_t seed = 0;
    /// Depths offered to the default initial mapping when none is supplied.
    DepthSet event_depths = DepthSet::range(0.1, 0.7, 0.1);
};

/// Three-arm simulated test. The catalogue is split at random into a manual pool and an
/// algorithmic pool so no product is priced by two arms. The manual arm spends its budget
/// share of V*; the algorithmic half runs the full pipeline and its holdout is the
/// supply-side arm.
TestReport run_online_test(const SyntheticWorld& world, const Catalogue& catalogue, const IthaxTargets& targets,
                           const std::optional<BandMapping>& initial, const DemandModel& model,
                           const FeasibleRegion& region, const OnlineTestOptions& options);

/// Cross-seed view of repeated tests.
struct AggregateReport {
    struct Arm {
        std::string name;
        double median_of_medians = 0.0;
        double mean_of_medians = 0.0;
    };
    struct Pair {
        std::string a;
        std::string b;
        std::size_t a_wins = 0;  // seeds with p < alpha and median(a) > median(b)
        std::size_t b_wins = 0;
    };
    std::size_t seeds = 0;
    double alpha = 0.05;
    std::vector<Arm> arms;
    std::vector<Pair> pairs;
    /// Seeds whose arm medians are non-increasing in the given order.
    std::size_t ordered_seeds = 0;
    std::vector<std::string> order;
};

/// `order` lists arm names best first, e.g. full, supply-side, manual.
AggregateReport aggregate_reports(std::span<const TestReport> reports, const std::vector<std::string>& order,
                                  double alpha = 0.05);

/// Everything needed to run the three-arm test on a freshly generated world.
struct SimulationSetup {
    WorldConfig world;
    double stock_value_fraction = 0.35;  // V* as a share of the finite-cover stock value
    double stock_depth = 0.3;
    OnlineTestOptions options;
    bool ground_truth_model = false;  // otherwise the baseline is fitted on the world's history
    bool region_everywhere = false;   // otherwise the region comes from a backtest of the history
    FitOptions fit;
    double winsorize = 0.005;  // 0 disables
    RegionOptions validation;
    DepthSet validation_grid = DepthSet::range(0.1, 0.8, 0.1);
};

/// Generates the world from `seed`, trains and validates on its history, then runs the test
/// with options.seed = seed.
TestReport simulate_online_test(const SimulationSetup& setup, std::uint64_t seed);

}  // namespace markdown
