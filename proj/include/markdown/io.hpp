#pragma once

// File formats. Delimited text is comma separated with a header row; money columns hold
// integer minor units. Structured documents are JSON objects carrying "schema_version".

#include "markdown/demand.hpp"
#include "markdown/domain.hpp"
#include "markdown/experiment.hpp"
#include "markdown/ithax.hpp"
#include "markdown/optimizer.hpp"
#include "markdown/synthetic.hpp"
#include "markdown/validation.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace markdown::io {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// Catalogue: id,full_price,stock_units,sold_units,group,unit_cost[,covariate...]
Catalogue read_catalogue_csv(std::istream& in, int period = 0);
void write_catalogue_csv(std::ostream& out, const Catalogue& catalogue);
Catalogue catalogue_from_json(const json& doc);
json to_json(const Catalogue& catalogue);
/// Picks the format from the extension: .json is structured, anything else delimited.
Catalogue load_catalogue(const std::filesystem::path& path, int period = 0);

// History: product_id,week,depth,sales
std::vector<TrainingRecord> read_history_csv(std::istream& in);
void write_history_csv(std::ostream& out, std::span<const TrainingRecord> records);

/// Everything a run can be configured with. Absent sections keep their defaults.
struct RunConfig {
    std::uint64_t seed = 0;
    IthaxTargets targets;
    std::optional<BandMapping> bands;
    DepthSet depths = DepthSet::range(0.0, 0.7, 0.1);
    double min_band_width = BandMapping::kDefaultMinWidth;
    Levers levers;
    PipelineOptions pipeline;
    RegionOptions validation;
    DepthSet validation_grid = DepthSet::range(0.1, 0.8, 0.1);
    double winsorize = 0.005;  // upper tail share; 0 disables
    FitOptions model;
    WorldConfig world;

    struct Experiment {
        double stock_value_fraction = 0.35;  // V* as a share of the finite-cover stock value
        double stock_depth = 0.3;
        OnlineTestOptions options;
        std::string model = "baseline";      // baseline | ground_truth
        std::string region = "backtest";     // backtest | everywhere
    } experiment;
};

RunConfig config_from_json(const json& doc);
json to_json(const RunConfig& config);
RunConfig load_config(const std::filesystem::path& path);
SimulationSetup simulation_setup(const RunConfig& config);

json to_json(const BandMapping& mapping);
BandMapping bands_from_json(const json& doc, double min_width = BandMapping::kDefaultMinWidth);
json to_json(const IthaxTargets& targets);
json to_json(const SolveReport& report);

// Solution: product_id,depth,discounted_price
void write_solution_csv(std::ostream& out, const Assignment& assignment, const Catalogue& catalogue);
Assignment read_solution_csv(std::istream& in);

// Event: product_id,arm,ithax_depth,final_depth,expected_sales,expected_profit
void write_event_csv(std::ostream& out, const OptimizedEvent& event);
json event_summary(const OptimizedEvent& event);

json to_json(const FeasibleRegion& region);
FeasibleRegion region_from_json(const json& doc);
/// depth,<group>... with one row per grid depth; empty cells have no support.
void write_wape_table(std::ostream& out, const FeasibleRegion& region);
json to_json(const MonotonicityAudit& audit);

json to_json(const BaselineModel& model);
BaselineModel baseline_from_json(const json& doc);
/// Expected weekly sales of every catalogue product over `grid`, in the prediction table layout.
void write_prediction_table(std::ostream& out, const DemandModel& model, const Catalogue& catalogue,
                            const DepthSet& grid);

json to_json(const WorldConfig& config);
WorldConfig world_from_json(const json& doc);

json to_json(const TestReport& report);
json to_json(const AggregateReport& report);
/// seed,arm,product_id,depth,profit
void write_profit_dump(std::ostream& out, std::span<const TestReport> reports);

json read_json(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);
/// Writes via a temporary file and a rename so readers never see a partial file.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace markdown::io
