#include "markdown/experiment.hpp"

#include "markdown/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace markdown {

namespace {

std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

PolicyArm realize(std::string name, const Assignment& assignment, const SyntheticWorld& world,
                  const Catalogue& catalogue, int weeks, std::uint64_t seed) {
    PolicyArm arm;
    arm.name = std::move(name);
    arm.assignment = assignment;
    const auto units = simulate_sales(world, assignment, weeks, seed);
    const ProfitModel profit;
    for (const auto& [id, depth] : assignment) {
        arm.product_ids.push_back(id);
        arm.profits.push_back(static_cast<double>(units.at(id)) * profit.unit_profit(catalogue.at(id), depth));
    }
    if (!assignment.empty()) {
        arm.stock_value = stock_value(assignment, catalogue);
        if (arm.stock_value > 0.0) arm.stock_depth = stock_depth(assignment, catalogue);
    }
    return arm;
}

ArmSummary summarize(const PolicyArm& arm) {
    ArmSummary s;
    s.name = arm.name;
    s.n = arm.profits.size();
    if (s.n > 0) {
        s.mean = stats::mean(arm.profits);
        s.median = stats::median(arm.profits);
        s.normality = stats::jarque_bera(arm.profits);
    }
    return s;
}

std::optional<double> uplift(double a, double b) {
    if (b == 0.0) return std::nullopt;
    return 100.0 * (a - b) / b;
}

}  // namespace

ManualResult manual_baseline(const Catalogue& catalogue, double value_target, double depth,
                             const std::set<std::string>& exclusions) {
    if (!(value_target > 0.0)) throw InvalidArgument("manual baseline needs a positive value target");
    if (!(depth > 0.0 && depth <= 1.0)) throw InvalidArgument("manual baseline depth must lie in (0, 1]");
    std::vector<const Product*> ranked;
    for (const Product& p : catalogue) {
        if (exclusions.count(p.id) || p.stock_units <= 0) continue;
        ranked.push_back(&p);
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const Product* a, const Product* b) {
        const double ca = cover(*a), cb = cover(*b);
        return ca > cb || (ca == cb && a->id < b->id);
    });
    ManualResult out;
    for (const Product* p : ranked) {
        if (out.value >= value_target) break;
        out.assignment.set(p->id, depth);
        out.value += p->stock_value();
    }
    out.insufficient_catalogue = out.value < value_target;
    return out;
}

std::vector<PairComparison> uplift_report(const std::vector<PolicyArm>& arms) {
    if (arms.size() < 2) throw InvalidArgument("uplift_report needs at least two arms");
    std::vector<PairComparison> rows;
    for (std::size_t i = 0; i < arms.size(); ++i)
        for (std::size_t j = i + 1; j < arms.size(); ++j) {
            const PolicyArm& a = arms[i];
            const PolicyArm& b = arms[j];
            PairComparison row;
            row.a = a.name;
            row.b = b.name;
            if (!a.profits.empty() && !b.profits.empty()) {
                const auto test = stats::mann_whitney_u(a.profits, b.profits);
                row.u = test.statistic;
                row.p_value = test.p_value;
                row.exact = test.exact;
                row.median_uplift = uplift(stats::median(a.profits), stats::median(b.profits));
                row.mean_uplift = uplift(stats::mean(a.profits), stats::mean(b.profits));
            }
            rows.push_back(std::move(row));
        }
    return rows;
}

TestReport run_online_test(const SyntheticWorld& world, const Catalogue& catalogue, const IthaxTargets& targets,
                           const std::optional<BandMapping>& initial, const DemandModel& model,
                           const FeasibleRegion& region, const OnlineTestOptions& options) {
    if (!(options.manual_budget_share > 0.0 && options.manual_budget_share < 1.0))
        throw InvalidArgument("manual_budget_share must lie in (0, 1)");
    if (options.event_weeks < 1) throw InvalidArgument("event_weeks must be >= 1");

    // Disjoint candidate pools.
    std::vector<std::string> ids;
    for (const Product& p : catalogue) ids.push_back(p.id);
    std::mt19937_64 rng(derive(options.seed, 0));
    std::shuffle(ids.begin(), ids.end(), rng);
    const std::size_t half = ids.size() / 2;
    const std::set<std::string> manual_ids(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(half));
    const std::set<std::string> ai_ids(ids.begin() + static_cast<std::ptrdiff_t>(half), ids.end());
    const Catalogue manual_pool = catalogue.only(manual_ids);
    const Catalogue ai_pool = catalogue.only(ai_ids);

    const double manual_share = options.manual_budget_share;
    const ManualResult manual =
        manual_baseline(manual_pool, targets.stock_value * manual_share, targets.stock_depth);

    IthaxTargets ai_targets = targets;
    const double ai_share = 1.0 - manual_share;
    ai_targets.stock_value = targets.stock_value * ai_share;
    for (auto& [g, v] : ai_targets.group_values) v *= ai_share;

    Levers levers;
    levers.seed = derive(options.seed, 1);
    const BandMapping mapping =
        initial ? *initial : default_initial_mapping(ai_pool, options.event_depths, ai_targets, levers);
    PipelineOptions pipeline;
    pipeline.holdout_fraction = options.holdout_fraction;
    pipeline.seed = derive(options.seed, 2);
    const OptimizedEvent event = run_promotheus(ai_pool, ai_targets, mapping, levers, model, region, pipeline);

    const std::uint64_t sales_seed = derive(options.seed, 3);
    TestReport report;
    report.seed = options.seed;
    report.supply_report = event.solution.report;
    report.samples.push_back(realize(kFullArm, event.treatment, world, catalogue, options.event_weeks, sales_seed));
    report.samples.push_back(realize(kSupplyArm, event.control, world, catalogue, options.event_weeks, sales_seed));
    report.samples.push_back(
        realize(kManualArm, manual.assignment, world, catalogue, options.event_weeks, sales_seed));

    std::vector<std::vector<double>> groups;
    for (const PolicyArm& arm : report.samples) {
        report.arms.push_back(summarize(arm));
        if (!arm.profits.empty()) groups.push_back(arm.profits);
    }
    if (groups.size() >= 2) report.kruskal = stats::kruskal_wallis(groups);
    report.pairs = uplift_report(report.samples);
    return report;
}

TestReport simulate_online_test(const SimulationSetup& setup, std::uint64_t seed) {
    const GeneratedData data = generate_catalogue(setup.world, seed);
    const Catalogue& catalogue = data.catalogue;
    double finite = 0.0;
    for (const Product& p : catalogue)
        if (std::isfinite(cover(p))) finite += p.stock_value();
    IthaxTargets targets;
    targets.stock_value = setup.stock_value_fraction * finite;
    targets.stock_depth = setup.stock_depth;

    const auto train = [&](std::span<const TrainingRecord> records) {
        return fit_winsorized(records, catalogue, setup.fit, setup.winsorize);
    };
    std::unique_ptr<DemandModel> model;
    if (setup.ground_truth_model)
        model = std::make_unique<GroundTruthModel>(data.world);
    else
        model = std::make_unique<BaselineModel>(train(data.history));
    const FeasibleRegion region =
        setup.region_everywhere
            ? FeasibleRegion::everywhere(catalogue.groups(), setup.options.event_depths)
            : build_feasible_region(
                  data.history, catalogue,
                  [&](std::span<const TrainingRecord> r) { return std::make_unique<BaselineModel>(train(r)); },
                  setup.validation_grid, setup.validation);

    OnlineTestOptions options = setup.options;
    options.seed = seed;
    return run_online_test(data.world, catalogue, targets, std::nullopt, *model, region, options);
}

AggregateReport aggregate_reports(std::span<const TestReport> reports, const std::vector<std::string>& order,
                                  double alpha) {
    AggregateReport out;
    out.seeds = reports.size();
    out.alpha = alpha;
    out.order = order;
    if (reports.empty()) return out;
    auto median_of = [](const TestReport& r, const std::string& name) {
        for (const ArmSummary& a : r.arms)
            if (a.name == name) return a.median;
        throw InvalidArgument("report for seed " + std::to_string(r.seed) + " has no arm " + name);
    };
    for (const ArmSummary& a : reports.front().arms) {
        std::vector<double> medians;
        for (const TestReport& r : reports) medians.push_back(median_of(r, a.name));
        out.arms.push_back({a.name, stats::median(medians), stats::mean(medians)});
    }
    for (const PairComparison& p : reports.front().pairs) {
        AggregateReport::Pair row{p.a, p.b, 0, 0};
        for (const TestReport& r : reports)
            for (const PairComparison& q : r.pairs) {
                if (q.a != p.a || q.b != p.b || !(q.p_value < alpha)) continue;
                const double ma = median_of(r, q.a), mb = median_of(r, q.b);
                if (ma > mb) ++row.a_wins;
                if (mb > ma) ++row.b_wins;
            }
        out.pairs.push_back(row);
    }
    for (const TestReport& r : reports) {
        bool ok = true;
        for (std::size_t i = 1; i < order.size(); ++i) ok = ok && median_of(r, order[i - 1]) >= median_of(r, order[i]);
        if (ok) ++out.ordered_seeds;
    }
    return out;
}

}  // namespace markdown
