#include "markdown/ithax.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace markdown {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string describe(const CoverBand& b) {
    std::ostringstream os;
    os << "(" << b.lower << ", " << b.upper << "]:" << b.depth;
    return os.str();
}

struct Candidate {
    std::size_t index;
    double cover;
    double value;
};

/// Products one allocation may draw from, plus whatever the levers force in.
struct Pool {
    std::vector<Candidate> candidates;
    Assignment forced;
    double forced_value = 0.0;
};

std::vector<Pool> build_pools(const Catalogue& catalogue, const Levers& levers,
                              const std::map<std::string, double>& group_values) {
    const bool by_group = !group_values.empty();
    std::map<std::string, Pool> grouped;
    Pool single;
    Assignment extra;  // inclusions outside every targeted group

    for (const auto& [id, depth] : levers.inclusions) {
        const Product& p = catalogue.at(id);
        if (levers.exclusions.count(id)) throw InvalidArgument("product " + id + " is both included and excluded");
        Pool* pool = &single;
        if (by_group) {
            if (!group_values.count(p.group)) {
                extra.set(id, depth);
                continue;
            }
            pool = &grouped[p.group];
        }
        pool->forced.set(id, depth);
        pool->forced_value += p.stock_value();
    }

    for (std::size_t i = 0; i < catalogue.size(); ++i) {
        const Product& p = catalogue[i];
        if (p.stock_units <= 0 || levers.exclusions.count(p.id) || levers.inclusions.contains(p.id)) continue;
        Candidate c{i, cover(p), p.stock_value()};
        if (!by_group) {
            single.candidates.push_back(c);
        } else if (group_values.count(p.group)) {
            grouped[p.group].candidates.push_back(c);
        }
    }

    std::vector<Pool> pools;
    if (!by_group) {
        pools.push_back(std::move(single));
    } else {
        for (const auto& [g, v] : group_values) pools.push_back(std::move(grouped[g]));
        if (!extra.empty()) {
            Pool rest;
            for (const auto& [id, d] : extra) {
                rest.forced.set(id, d);
                rest.forced_value += catalogue.at(id).stock_value();
            }
            pools.push_back(std::move(rest));
        }
    }
    return pools;
}

Allocation allocate(const BandMapping& mapping, double target, const Pool& pool, const Catalogue& catalogue,
                    std::mt19937_64& rng, double f1_tol) {
    Allocation out;
    out.assignment = pool.forced;
    out.value = pool.forced_value;

    std::vector<std::vector<std::size_t>> buckets(mapping.size());
    for (std::size_t i = 0; i < pool.candidates.size(); ++i) {
        auto b = mapping.band_of(pool.candidates[i].cover);
        if (b && mapping[*b].depth > 0.0) buckets[*b].push_back(i);
    }

    bool took_everything = true;
    for (std::size_t b = mapping.highest(); b >= mapping.lowest(); --b) {
        auto& bucket = buckets[b];
        double band_value = 0.0;
        for (std::size_t i : bucket) band_value += pool.candidates[i].value;
        const double depth = mapping[b].depth;

        if (out.value + band_value <= target) {
            for (std::size_t i : bucket) out.assignment.set(catalogue[pool.candidates[i].index].id, depth);
            out.value += band_value;
        } else {
            took_everything = false;
            std::shuffle(bucket.begin(), bucket.end(), rng);
            for (std::size_t i : bucket) {
                const Candidate& c = pool.candidates[i];
                if (out.value + c.value <= target) {
                    out.assignment.set(catalogue[c.index].id, depth);
                    out.value += c.value;
                }
            }
        }
        if (b == 0) break;
    }
    out.insufficient_catalogue = took_everything && target > 0.0 && (target - out.value) / target >= f1_tol;
    return out;
}

void validate_bands(const std::vector<CoverBand>& bands, double min_width) {
    if (!(min_width > 0.0)) throw InvalidArgument("band min_width must be > 0");
    if (bands.size() < 3) throw InvalidArgument("band mapping needs at least three bands");
    if (bands.front().lower != 0.0) throw InvalidArgument("first band must start at cover 0");
    if (bands.back().upper != kInf) throw InvalidArgument("last band must extend to infinity");
    if (bands.front().depth != 0.0 || bands.back().depth != 0.0)
        throw InvalidArgument("first and last bands must carry depth 0");
    for (std::size_t i = 0; i < bands.size(); ++i) {
        const CoverBand& b = bands[i];
        if (!(b.lower < b.upper)) throw InvalidArgument("band " + describe(b) + " has non-positive width");
        if (i > 0 && b.lower != bands[i - 1].upper)
            throw InvalidArgument("bands " + describe(bands[i - 1]) + " and " + describe(b) + " are not contiguous");
        if (!(b.depth >= 0.0 && b.depth <= 1.0)) throw InvalidArgument("band depth outside [0,1]: " + describe(b));
        if (i > 0 && i + 1 < bands.size()) {
            if (!(b.depth > 0.0)) throw InvalidArgument("interior band " + describe(b) + " must carry a positive depth");
            if (i > 1 && b.depth < bands[i - 1].depth)
                throw InvalidArgument("band depths must not decrease with cover: " + describe(b));
        }
    }
}

}  // namespace

BandMapping::BandMapping(std::vector<CoverBand> bands, double min_width)
    : bands_(std::move(bands)), min_width_(min_width) {
    validate_bands(bands_, min_width_);
}

std::optional<std::size_t> BandMapping::band_of(double cover) const noexcept {
    if (!(cover > 0.0)) return std::nullopt;
    for (std::size_t i = 0; i < bands_.size(); ++i)
        if (bands_[i].contains(cover)) return i;
    return std::nullopt;
}

DepthSet BandMapping::depths() const {
    std::vector<double> v;
    for (const auto& b : bands_)
        if (b.depth > 0.0 && (v.empty() || b.depth > v.back())) v.push_back(b.depth);
    return DepthSet(std::move(v));
}

void IthaxTargets::validate(const BandMapping& initial) const {
    if (!(stock_value > 0.0)) throw InvalidArgument("stock value target must be > 0");
    if (!(stock_depth > 0.0)) throw InvalidArgument("stock depth target must be > 0");
    if (!(stock_depth < initial.max_depth()))
        throw InvalidArgument("stock depth target must be below the highest depth of the initial band mapping");
    if (!(f1_tol > 0.0) || !(f2_tol > 0.0)) throw InvalidArgument("tolerances must be > 0");
    if (max_iterations < 1) throw InvalidArgument("max_iterations must be >= 1");
    if (!group_values.empty()) {
        double sum = 0.0;
        for (const auto& [g, v] : group_values) {
            if (!(v > 0.0)) throw InvalidArgument("group " + g + " stock value target must be > 0");
            sum += v;
        }
        if (std::abs(sum - stock_value) > 1e-6 * stock_value)
            throw InvalidArgument("group stock value targets must sum to the overall target");
    }
}

bool is_adjustable(const CoverBand& band, double min_width) noexcept {
    return band.depth > 0.0 && band.width() / 2.0 >= min_width;
}

Allocation depth_allocation(const BandMapping& mapping, double value_target, const Catalogue& catalogue,
                            const Levers& levers, double f1_tol) {
    levers.inclusions.validate(catalogue);
    auto pools = build_pools(catalogue, levers, {});
    std::mt19937_64 rng(levers.seed);
    return allocate(mapping, value_target, pools.front(), catalogue, rng, f1_tol);
}

std::pair<BandMapping, std::size_t> adjust_overshoot(const BandMapping& mapping, std::size_t target) {
    std::vector<CoverBand> bands = mapping.bands();
    const std::size_t top = mapping.highest();
    std::size_t bx = std::min(target, bands.size() - 1);
    while (!is_adjustable(bands[bx], mapping.min_width())) {
        if (bx == 0) throw BottomedOut("no adjustable band left while reducing stock depth", mapping);
        --bx;
    }
    const double x = bands[bx].width() / 2.0;
    bands[bx].upper -= x;
    for (std::size_t b = bx + 1; b <= top; ++b) {
        bands[b].lower -= x;
        bands[b].upper -= x;
    }
    bands[top + 1].lower = bands[top].upper;
    return {BandMapping(std::move(bands), mapping.min_width()), bx};
}

std::pair<BandMapping, std::size_t> adjust_undershoot(const BandMapping& mapping, std::size_t target,
                                                      double depth_now, std::optional<double> depth_before,
                                                      int iteration, double stagnation_tol) {
    std::vector<CoverBand> bands = mapping.bands();
    const std::size_t top = mapping.highest();
    std::size_t bx = std::min(target, top);

    auto widen_top = [&]() -> std::pair<BandMapping, std::size_t> {
        bands[top].upper += bands[top].width() / 2.0;
        bands[top + 1].lower = bands[top].upper;
        return {BandMapping(std::move(bands), mapping.min_width()), top};
    };

    if (iteration <= 1 || !depth_before) return widen_top();
    if (bx == top) {
        if (std::abs(depth_now - *depth_before) > stagnation_tol) return widen_top();
        --bx;
    }
    while (!is_adjustable(bands[bx], mapping.min_width())) {
        if (bx == 0) throw BottomedOut("no adjustable band left while raising stock depth", mapping);
        --bx;
    }
    // The deepest band keeps its upper bound and absorbs the range given up by bx.
    const double x = bands[bx].width() / 2.0;
    bands[bx].upper -= x;
    for (std::size_t b = bx + 1; b <= top; ++b) {
        bands[b].lower -= x;
        if (b < top) bands[b].upper -= x;
    }
    return {BandMapping(std::move(bands), mapping.min_width()), bx};
}

namespace {

struct EventAllocation {
    Assignment assignment;
    double value = 0.0;
    double depth = 0.0;
    bool insufficient = false;
    std::map<std::string, double> group_achieved;
};

/// Runs one allocation per pool (one pool overall, or one per targeted group) and merges them.
class EventAllocator {
public:
    EventAllocator(const Catalogue& catalogue, const IthaxTargets& targets, const Levers& levers)
        : catalogue_(catalogue), targets_(targets), seed_(levers.seed),
          pools_(build_pools(catalogue, levers, targets.group_values)) {
        for (const auto& [g, v] : targets.group_values) pool_targets_.push_back(v);
        if (pool_targets_.empty()) pool_targets_.push_back(targets.stock_value);
        while (pool_targets_.size() < pools_.size()) pool_targets_.push_back(0.0);
    }

    EventAllocation run(const BandMapping& mapping) const {
        std::mt19937_64 rng(seed_);
        EventAllocation out;
        auto group_it = targets_.group_values.begin();
        for (std::size_t k = 0; k < pools_.size(); ++k) {
            Allocation a = allocate(mapping, pool_targets_[k], pools_[k], catalogue_, rng, targets_.f1_tol);
            if (pool_targets_[k] > 0.0) out.insufficient = out.insufficient || a.insufficient_catalogue;
            if (group_it != targets_.group_values.end()) {
                out.group_achieved[group_it->first] = a.value;
                ++group_it;
            }
            for (const auto& [id, d] : a.assignment) out.assignment.set(id, d);
            out.value += a.value;
        }
        out.depth = out.assignment.empty() ? 0.0 : stock_depth(out.assignment, catalogue_);
        return out;
    }

private:
    const Catalogue& catalogue_;
    const IthaxTargets& targets_;
    std::uint64_t seed_;
    std::vector<Pool> pools_;
    std::vector<double> pool_targets_;
};

}  // namespace

Solution solve(const Catalogue& catalogue, const IthaxTargets& targets, const BandMapping& initial,
               const Levers& levers) {
    targets.validate(initial);
    levers.inclusions.validate(catalogue);
    if (catalogue.empty()) throw InvalidArgument("cannot solve over an empty catalogue");

    Solution out;
    SolveReport& report = out.report;
    for (const auto& b : initial.bands())
        if (b.depth > 0.0 && b.width() <= 4.0 * initial.min_width())
            report.warnings.push_back("band " + describe(b) + " is narrower than 4x the minimum width");

    const EventAllocator allocator(catalogue, targets, levers);
    BandMapping mapping = initial;
    std::size_t bx = mapping.highest();
    std::optional<double> previous_depth;

    for (int i = 1; i <= targets.max_iterations; ++i) {
        EventAllocation event = allocator.run(mapping);

        report.iterations = i;
        report.achieved_value = event.value;
        report.achieved_depth = event.depth;
        report.f1 = std::abs(event.value - targets.stock_value) / targets.stock_value;
        report.f2 = std::abs(event.depth - targets.stock_depth);
        report.insufficient_catalogue = event.insufficient;
        report.group_achieved = std::move(event.group_achieved);
        report.depth_trajectory.push_back(event.depth);
        report.value_trajectory.push_back(event.value);
        report.band_history.push_back(mapping);
        out.assignment = std::move(event.assignment);

        if (report.f1 < targets.f1_tol && report.f2 < targets.f2_tol) {
            report.converged = true;
            return out;
        }
        if (i == targets.max_iterations) break;

        try {
            if (event.depth > targets.stock_depth) {
                std::tie(mapping, bx) = adjust_overshoot(mapping, mapping.highest());
            } else {
                std::tie(mapping, bx) =
                    adjust_undershoot(mapping, bx, event.depth, previous_depth, i, targets.stagnation_tol);
            }
        } catch (BottomedOut& e) {
            e.attach(report);
            throw;
        }
        previous_depth = event.depth;
    }
    if (report.insufficient_catalogue)
        report.warnings.push_back("insufficient catalogue: stock value target not reachable with eligible products");
    return out;
}

BandMapping default_initial_mapping(const Catalogue& catalogue, const DepthSet& depths,
                                    const IthaxTargets& targets, const Levers& levers, double min_width) {
    std::vector<double> positive;
    for (double d : depths)
        if (d > 0.0) positive.push_back(d);
    if (positive.empty()) throw InvalidArgument("depth set has no positive depth");
    if (!(positive.back() > targets.stock_depth))
        throw InvalidArgument("stock depth target must be below the deepest depth in the depth set");

    struct Entry {
        double cover;
        double value;
        std::string group;
        bool operator<(const Entry& o) const { return cover < o.cover; }
    };
    std::vector<Entry> covers;  // finite-cover candidates
    for (const auto& p : catalogue) {
        if (p.stock_units <= 0 || p.sold_units <= 0) continue;
        if (levers.exclusions.count(p.id) || levers.inclusions.contains(p.id)) continue;
        covers.push_back({cover(p), p.stock_value(), p.group});
    }
    if (covers.empty()) throw InvalidArgument("catalogue has no product with finite cover");
    std::stable_sort(covers.begin(), covers.end());

    // Value still to be found per pool: the whole event, or each prioritized group.
    std::map<std::string, double> budgets;
    if (targets.group_values.empty()) {
        budgets[""] = targets.stock_value;
    } else {
        budgets = targets.group_values;
    }
    for (const auto& [id, d] : levers.inclusions) {
        const Product& p = catalogue.at(id);
        auto it = budgets.find(targets.group_values.empty() ? std::string() : p.group);
        if (it != budgets.end()) it->second -= p.stock_value();
    }
    double budget = 0.0;
    for (auto& [g, v] : budgets) {
        v = std::max(v, 0.05 * (targets.group_values.empty() ? targets.stock_value : targets.group_values.at(g)));
        budget += v;
    }
    auto pool_of = [&](const Entry& e) { return targets.group_values.empty() ? std::string() : e.group; };
    const double min_band = 4.5 * min_width;

    auto finish = [&](std::vector<double> cuts, const std::vector<double>& grid) {
        // cuts: descending upper bounds, one more than the grid.
        std::vector<CoverBand> bands{{0.0, cuts.back(), 0.0}};
        for (std::size_t j = 0; j < grid.size(); ++j)
            bands.push_back({cuts[grid.size() - j], cuts[grid.size() - j - 1], grid[j]});
        bands.push_back({cuts.front(), kInf, 0.0});
        return BandMapping(std::move(bands), min_width);
    };

    // Equal-width bands reaching down far enough that every pool holds `ratio` times its budget.
    auto by_width = [&](const std::vector<double>& grid, double ceiling, double ratio) -> std::optional<BandMapping> {
        const double k = static_cast<double>(grid.size());
        double floor_cover = ceiling;
        std::map<std::string, double> acc;
        std::size_t short_pools = budgets.size();
        for (auto it = covers.rbegin(); it != covers.rend() && short_pools > 0; ++it) {
            if (it->cover > ceiling) continue;
            auto b = budgets.find(pool_of(*it));
            if (b == budgets.end()) continue;
            double& a = acc[b->first];
            const bool was_short = a < ratio * b->second;
            a += it->value;
            floor_cover = it->cover;
            if (was_short && a >= ratio * b->second) --short_pools;
        }
        const double width = std::max((ceiling - floor_cover) / k, min_band);
        if (ceiling - k * width < min_width) return std::nullopt;
        std::vector<double> cuts;
        for (std::size_t j = 0; j <= grid.size(); ++j) cuts.push_back(ceiling - width * static_cast<double>(j));
        return finish(std::move(cuts), grid);
    };

    // Bands holding equal shares of `ratio * budget`, walking down from the ceiling.
    auto by_value = [&](const std::vector<double>& grid, double ceiling, double ratio) -> std::optional<BandMapping> {
        const double share = ratio * budget / static_cast<double>(grid.size());
        std::vector<double> cuts{ceiling};
        double acc = 0.0;
        for (auto it = covers.rbegin(); it != covers.rend() && cuts.size() <= grid.size(); ++it) {
            if (it->cover > ceiling) continue;
            acc += it->value;
            if (acc >= share && cuts.back() - it->cover >= min_band) {
                cuts.push_back(it->cover);
                acc = 0.0;
            }
        }
        while (cuts.size() <= grid.size()) cuts.push_back(cuts.back() - min_band);
        if (cuts.back() < min_width) return std::nullopt;
        return finish(std::move(cuts), grid);
    };

    // Candidates: positive depths up to a cap above the target, a cover ceiling (products above
    // it are left out as slow movers), and a pool size. Keep the candidate whose first
    // allocation lands closest to the depth target.
    std::size_t first_cap = 0;
    while (positive[first_cap] <= targets.stock_depth) ++first_cap;
    const EventAllocator allocator(catalogue, targets, levers);
    std::optional<BandMapping> chosen;
    double best = kInf;
    auto consider = [&](std::optional<BandMapping> candidate) {
        if (!candidate) return;
        const double gap = std::abs(allocator.run(*candidate).depth - targets.stock_depth);
        if (gap < best) {
            best = gap;
            chosen = std::move(candidate);
        }
    };
    for (double q : {0.95, 0.99, 0.999}) {
        const double ceiling = covers[static_cast<std::size_t>(q * static_cast<double>(covers.size() - 1))].cover;
        for (std::size_t cap = first_cap; cap < positive.size(); ++cap) {
            const std::vector<double> grid(positive.begin(), positive.begin() + static_cast<std::ptrdiff_t>(cap + 1));
            for (double ratio : {1.1, 1.35, 1.75, 2.5, 4.0}) {
                consider(by_width(grid, ceiling, ratio));
                consider(by_value(grid, ceiling, ratio));
            }
        }
    }
    if (!chosen) throw InvalidArgument("catalogue cover range too narrow for the minimum band width");
    return *chosen;
}

}  // namespace markdown
