#pragma once

#include "markdown/domain.hpp"
#include "markdown/error.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace markdown {

/// Cover interval (lower, upper] mapped onto one discount depth.
struct CoverBand {
    double lower = 0.0;
    double upper = 0.0;
    double depth = 0.0;

    double width() const noexcept { return upper - lower; }
    bool contains(double cover) const noexcept { return cover > lower && cover <= upper; }

    friend bool operator==(const CoverBand&, const CoverBand&) = default;
};

/// Ordered, gap-free partition of (0, inf] into cover bands, lowest cover first.
///
/// The first and last bands carry depth 0 (fast sellers and zero-sellers stay at
/// full price); every interior band carries a positive depth, non-decreasing with
/// cover. That ordering is how the solver encodes "higher cover, deeper discount".
class BandMapping {
public:
    static constexpr double kDefaultMinWidth = 3.0;

    BandMapping() = default;
    explicit BandMapping(std::vector<CoverBand> bands, double min_width = kDefaultMinWidth);

    const std::vector<CoverBand>& bands() const noexcept { return bands_; }
    std::size_t size() const noexcept { return bands_.size(); }
    const CoverBand& operator[](std::size_t i) const { return bands_[i]; }
    double min_width() const noexcept { return min_width_; }

    /// Index of the band with the highest depth (the last depth > 0 band).
    std::size_t highest() const noexcept { return bands_.size() - 2; }
    /// Index of the band with the lowest positive depth.
    std::size_t lowest() const noexcept { return 1; }
    double max_depth() const noexcept { return bands_[highest()].depth; }

    std::optional<std::size_t> band_of(double cover) const noexcept;
    /// Distinct positive depths carried by the mapping.
    DepthSet depths() const;

    friend bool operator==(const BandMapping&, const BandMapping&) = default;

private:
    std::vector<CoverBand> bands_;
    double min_width_ = kDefaultMinWidth;
};

/// Solver targets. Group targets, when present, must sum to stock_value.
struct IthaxTargets {
    double stock_value = 0.0;
    double stock_depth = 0.0;
    std::map<std::string, double> group_values;
    double f1_tol = 0.05;
    double f2_tol = 0.005;
    int max_iterations = 200;
    /// |M_i - M_{i-1}| below this counts as no progress when widening the top band.
    double stagnation_tol = 1e-4;

    void validate(const BandMapping& initial) const;
};

/// Operator controls: products forced in at fixed depths, products removed outright.
struct Levers {
    Assignment inclusions;
    std::set<std::string> exclusions;
    std::uint64_t seed = 0;
};

struct SolveReport {
    int iterations = 0;
    double achieved_value = 0.0;
    double achieved_depth = 0.0;
    double f1 = 0.0;
    double f2 = 0.0;
    bool converged = false;
    bool insufficient_catalogue = false;
    std::vector<double> depth_trajectory;
    std::vector<double> value_trajectory;
    std::vector<BandMapping> band_history;
    std::map<std::string, double> group_achieved;
    std::vector<std::string> warnings;
};

struct Solution {
    Assignment assignment;
    SolveReport report;
};

/// No band left to adjust. Widen the bands of the initial mapping and retry.
class BottomedOut : public Error {
public:
    BottomedOut(const std::string& what, BandMapping mapping)
        : Error(what), mapping_(std::move(mapping)) {}

    const BandMapping& mapping() const noexcept { return mapping_; }
    const std::shared_ptr<const SolveReport>& report() const noexcept { return report_; }
    void attach(SolveReport report) { report_ = std::make_shared<const SolveReport>(std::move(report)); }

private:
    BandMapping mapping_;
    std::shared_ptr<const SolveReport> report_;
};

bool is_adjustable(const CoverBand& band, double min_width) noexcept;

struct Allocation {
    Assignment assignment;
    double value = 0.0;
    /// Every eligible product was taken and the target was still missed by more than f1_tol.
    bool insufficient_catalogue = false;
};

/// Fills the event from the deepest band downwards without exceeding `value_target`.
/// When a band does not fit whole, a seeded shuffle of it is added greedily.
Allocation depth_allocation(const BandMapping& mapping, double value_target, const Catalogue& catalogue,
                            const Levers& levers, double f1_tol = 0.05);

/// One binary-search step when the event is too deep: halves the first adjustable band at or
/// below `target` and slides the deeper bands down to keep their widths.
std::pair<BandMapping, std::size_t> adjust_overshoot(const BandMapping& mapping, std::size_t target);

/// One step when the event is too shallow. Widens the deepest band, or, once widening stops
/// moving the stock depth, hands half of a lower band's range to the deepest band.
std::pair<BandMapping, std::size_t> adjust_undershoot(const BandMapping& mapping, std::size_t target,
                                                      double depth_now, std::optional<double> depth_before,
                                                      int iteration, double stagnation_tol = 1e-4);

/// Runs allocation and boundary adjustment until both targets are met or the iteration cap hits.
/// Throws BottomedOut (with the partial report attached) when no band can be adjusted.
Solution solve(const Catalogue& catalogue, const IthaxTargets& targets, const BandMapping& initial,
               const Levers& levers);

/// Starting mapping built from the catalogue's finite covers. Candidates vary the cover ceiling
/// (a high quantile; slower products fall in the top zero band), how many of the shallow depths
/// are used, and whether bands have equal width or hold equal value. Every band is wider than
/// 4 * min_width. The candidate whose first allocation lands closest to the depth target wins.
BandMapping default_initial_mapping(const Catalogue& catalogue, const DepthSet& depths,
                                    const IthaxTargets& targets, const Levers& levers = {},
                                    double min_width = BandMapping::kDefaultMinWidth);

}  // namespace markdown
