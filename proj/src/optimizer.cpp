#include "markdown/optimizer.hpp"

#include "markdown/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace markdown {

double expected_total_profit(const Product& product, double depth, const DemandModel& model,
                             const ProfitModel& profit) {
    if (!(depth >= 0.0 && depth <= 1.0)) throw InvalidArgument("depth must lie in [0, 1]");
    return model.predict(product, depth) * profit.unit_profit(product, depth);
}

DepthChoice optimize_depth(const Product& product, const DepthSet& feasible, const DemandModel& model,
                           const ProfitModel& profit) {
    if (feasible.empty()) throw InvalidArgument("optimize_depth needs at least one feasible depth");
    DepthChoice best;
    bool first = true;
    for (double d : feasible) {
        const double s = model.predict(product, d);
        const double g = s * profit.unit_profit(product, d);
        const double objective = s * g;
        // Depths ascend, so strict improvement keeps the shallower one on ties.
        if (first || objective > best.objective) {
            best = DepthChoice{d, objective, s, g, false};
            first = false;
        }
    }
    if (!(best.objective > 0.0)) {
        const double d = feasible.values().front();
        const double s = model.predict(product, d);
        const double g = s * profit.unit_profit(product, d);
        best = DepthChoice{d, s * g, s, g, true};
    }
    return best;
}

std::pair<Assignment, Assignment> randomize_holdout(const Assignment& solution, double holdout_fraction,
                                                    std::uint64_t seed) {
    if (!(holdout_fraction >= 0.0 && holdout_fraction <= 1.0))
        throw InvalidArgument("holdout_fraction must lie in [0, 1]");
    std::vector<std::string> ids;
    ids.reserve(solution.size());
    for (const auto& [id, d] : solution) ids.push_back(id);
    std::mt19937_64 rng(seed);
    std::shuffle(ids.begin(), ids.end(), rng);
    const auto n_control = static_cast<std::size_t>(std::llround(holdout_fraction * static_cast<double>(ids.size())));
    Assignment control, treatment;
    for (std::size_t i = 0; i < ids.size(); ++i)
        (i < n_control ? control : treatment).set(ids[i], *solution.depth(ids[i]));
    return {std::move(control), std::move(treatment)};
}

std::string to_string(Arm arm) { return arm == Arm::control ? "control" : "treatment"; }

Assignment OptimizedEvent::combined() const {
    Assignment all = control;
    for (const auto& [id, d] : treatment) all.set(id, d);
    return all;
}

OptimizedEvent optimize_event(const Catalogue& catalogue, Solution solution, const DepthSet& event_depths,
                              const Levers& levers, const DemandModel& model, const FeasibleRegion& region,
                              const PipelineOptions& options) {
    OptimizedEvent event;
    auto [control, treatment] = randomize_holdout(solution.assignment, options.holdout_fraction, options.seed);
    const ProfitModel profit;

    for (const auto& [id, d] : control) {
        const Product& p = catalogue.at(id);
        const double s = model.predict(p, d);
        EventLine line{id, Arm::control, d, d, s, s * profit.unit_profit(p, d)};
        line.pinned = levers.inclusions.contains(id);
        event.control_expected_profit += line.expected_profit;
        event.lines.push_back(std::move(line));
    }

    std::map<std::string, DepthSet> allowed_by_group;
    for (const auto& [id, d] : treatment) {
        const Product& p = catalogue.at(id);
        EventLine line{id, Arm::treatment, d, d, 0.0, 0.0};
        if (levers.inclusions.contains(id)) {
            line.pinned = true;
        } else {
            auto it = allowed_by_group.find(p.group);
            if (it == allowed_by_group.end())
                it = allowed_by_group.emplace(p.group, region.allowed(p.group).intersect(event_depths)).first;
            if (it->second.empty()) {
                line.fallback = true;
            } else {
                const DepthChoice choice = optimize_depth(p, it->second, model, profit);
                line.final_depth = choice.depth;
                line.no_profitable_depth = choice.no_profitable_depth;
            }
        }
        line.expected_sales = model.predict(p, line.final_depth);
        line.expected_profit = line.expected_sales * profit.unit_profit(p, line.final_depth);
        treatment.set(id, line.final_depth);
        event.treatment_expected_profit += line.expected_profit;
        event.lines.push_back(std::move(line));
    }
    std::sort(event.lines.begin(), event.lines.end(),
              [](const EventLine& a, const EventLine& b) { return a.product_id < b.product_id; });

    event.control = std::move(control);
    event.treatment = std::move(treatment);
    event.solution = std::move(solution);
    const Assignment all = event.combined();
    if (!all.empty() && stock_value(all, catalogue) > 0.0) event.final_stock_depth = stock_depth(all, catalogue);
    return event;
}

OptimizedEvent run_promotheus(const Catalogue& catalogue, const IthaxTargets& targets, const BandMapping& initial,
                              const Levers& levers, const DemandModel& model, const FeasibleRegion& region,
                              const PipelineOptions& options) {
    Solution solution = solve(catalogue, targets, initial, levers);
    std::vector<double> positive;
    for (double d : initial.depths())
        if (d > 0.0) positive.push_back(d);
    return optimize_event(catalogue, std::move(solution), DepthSet(std::move(positive)), levers, model, region,
                          options);
}

}  // namespace markdown
