// markdown: command-line front end to the engine.
//
// Exit status: 0 success, 1 domain error (message on stderr), 2 usage error.

#include "markdown/demand.hpp"
#include "markdown/error.hpp"
#include "markdown/experiment.hpp"
#include "markdown/io.hpp"
#include "markdown/ithax.hpp"
#include "markdown/optimizer.hpp"
#include "markdown/service.hpp"
#include "markdown/synthetic.hpp"
#include "markdown/validation.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace markdown;
using io::json;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, "Overrides the configured seed");
}

io::RunConfig load(const Common& c) {
    io::RunConfig config = c.config.empty() ? io::RunConfig{} : io::load_config(c.config);
    if (c.seed) {
        config.seed = *c.seed;
        config.levers.seed = *c.seed;
        config.pipeline.seed = *c.seed;
        config.experiment.options.seed = *c.seed;
    }
    return config;
}

/// Writes to `path`, or stdout when it is empty or "-".
void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-")
        std::cout << text;
    else
        io::write_text(path, text);
}

template <class F>
std::string render(F&& write) {
    std::ostringstream out;
    write(out);
    return out.str();
}

std::vector<TrainingRecord> load_history(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    try {
        return io::read_history_csv(in);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what(), 0);
    }
}

/// Period defaults to the week after the last history week.
Catalogue load_catalogue(const std::string& path, int period, const std::vector<TrainingRecord>& history) {
    if (period == 0 && !history.empty())
        period = std::max_element(history.begin(), history.end(), [](const auto& a, const auto& b) {
                     return a.week < b.week;
                 })->week + 1;
    try {
        return io::load_catalogue(path, period);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what(), 0);
    }
}

void check_history(const std::vector<TrainingRecord>& history, const Catalogue& catalogue) {
    for (const auto& r : history)
        if (!catalogue.find(r.product_id)) throw InvalidArgument("history names unknown product " + r.product_id);
}

ModelFitter fitter(const Catalogue& catalogue, const io::RunConfig& config) {
    return [&catalogue, &config](std::span<const TrainingRecord> r) {
        return std::make_unique<BaselineModel>(fit_winsorized(r, catalogue, config.model, config.winsorize));
    };
}

BandMapping initial_bands(const Catalogue& catalogue, const io::RunConfig& config) {
    return config.bands ? *config.bands
                        : default_initial_mapping(catalogue, config.depths, config.targets, config.levers,
                                                  config.min_band_width);
}

/// Exported form of a run that `solve --config` replays.
json replay_config(const io::RunConfig& config, const BandMapping& initial) {
    json doc = io::to_json(config);
    doc["bands"] = io::to_json(initial);
    for (const char* k : {"world", "experiment", "validation", "model"}) doc.erase(k);
    return doc;
}

Solution run_solve(const Catalogue& catalogue, const io::RunConfig& config, const BandMapping& initial) {
    config.levers.inclusions.validate(catalogue);
    for (const auto& x : config.levers.exclusions) catalogue.at(x);
    config.targets.validate(initial);
    try {
        return solve(catalogue, config.targets, initial, config.levers);
    } catch (const BottomedOut& e) {
        if (e.report()) std::cerr << io::to_json(*e.report()).dump(2) << '\n';
        throw;
    }
}

// ---- subcommands ---------------------------------------------------------------------------

struct GenerateArgs {
    Common common;
    std::string out_dir;
    std::optional<std::size_t> products;
    std::optional<int> history_weeks;
};

int cmd_generate(const GenerateArgs& a) {
    io::RunConfig config = load(a.common);
    if (a.products) config.world.products = *a.products;
    if (a.history_weeks) config.world.history_weeks = *a.history_weeks;
    const GeneratedData data = generate_catalogue(config.world, config.seed);
    fs::create_directories(a.out_dir);
    const fs::path dir(a.out_dir);
    io::write_text(dir / "catalogue.csv", render([&](std::ostream& o) { io::write_catalogue_csv(o, data.catalogue); }));
    io::write_text(dir / "history.csv", render([&](std::ostream& o) { io::write_history_csv(o, data.history); }));
    io::write_text(dir / "world.json",
                   json({{"schema_version", io::kSchemaVersion}, {"seed", config.seed}, {"world", io::to_json(config.world)}})
                           .dump(2) +
                       "\n");
    std::cout << "products " << data.catalogue.size() << ", history records " << data.history.size() << ", period "
              << data.catalogue.period() << '\n';
    return 0;
}

struct IngestArgs {
    Common common;
    std::string catalogue, history, out;
    int period = 0;
};

int cmd_ingest(const IngestArgs& a) {
    load(a.common);
    const auto history = a.history.empty() ? std::vector<TrainingRecord>{} : load_history(a.history);
    const Catalogue catalogue = load_catalogue(a.catalogue, a.period, history);
    check_history(history, catalogue);
    if (!a.out.empty()) io::write_text(a.out, io::to_json(catalogue).dump() + "\n");
    json doc = {{"version", kEngineVersion},
                {"catalogue_id", catalogue_id(catalogue, history)},
                {"summary", catalogue_summary(catalogue)},
                {"history_records", history.size()}};
    std::cout << doc.dump(2) << '\n';
    return 0;
}

struct SolveArgs {
    Common common;
    std::string catalogue, out, report, history;
    int period = 0;
};

int cmd_solve(const SolveArgs& a) {
    const io::RunConfig config = load(a.common);
    const auto history = a.history.empty() ? std::vector<TrainingRecord>{} : load_history(a.history);
    const Catalogue catalogue = load_catalogue(a.catalogue, a.period, history);
    const BandMapping initial = initial_bands(catalogue, config);
    const Solution solution = run_solve(catalogue, config, initial);

    io::write_text(a.out, render([&](std::ostream& o) { io::write_solution_csv(o, solution.assignment, catalogue); }));
    json doc = {{"version", kEngineVersion},
                {"seed", config.seed},
                {"products", solution.assignment.size()},
                {"targets", io::to_json(config.targets)},
                {"solution", io::to_json(solution.report)},
                {"initial_bands", io::to_json(initial)},
                {"config", replay_config(config, initial)}};
    emit(a.report, doc.dump(2) + "\n");
    if (!solution.report.converged) throw Error("solve did not converge; see the report for the trajectory");
    return 0;
}

struct FitArgs {
    Common common;
    std::string catalogue, history, out, predictions;
    std::vector<double> grid;
    int period = 0;
};

int cmd_fit(const FitArgs& a) {
    const io::RunConfig config = load(a.common);
    const auto history = load_history(a.history);
    const Catalogue catalogue = load_catalogue(a.catalogue, a.period, history);
    check_history(history, catalogue);
    const BaselineModel model = fit_winsorized(history, catalogue, config.model, config.winsorize);
    for (const auto& w : model.warnings()) std::cerr << "warning: " << w << '\n';
    emit(a.out, io::to_json(model).dump(2) + "\n");
    if (!a.predictions.empty()) {
        const DepthSet grid = a.grid.empty() ? DepthSet::range(0.0, 0.8, 0.1) : DepthSet(a.grid);
        io::write_text(a.predictions,
                       render([&](std::ostream& o) { io::write_prediction_table(o, model, catalogue, grid); }));
    }
    return 0;
}

struct ValidateArgs {
    Common common;
    std::string catalogue, history, out, wape_table, audit;
    std::optional<int> folds, horizon;
    std::optional<double> threshold;
    int period = 0;
};

int cmd_validate(const ValidateArgs& a) {
    io::RunConfig config = load(a.common);
    if (a.folds) config.validation.folds = *a.folds;
    if (a.horizon) config.validation.horizon = *a.horizon;
    if (a.threshold) config.validation.threshold = *a.threshold;
    const auto history = load_history(a.history);
    const Catalogue catalogue = load_catalogue(a.catalogue, a.period, history);
    check_history(history, catalogue);
    const FeasibleRegion region =
        build_feasible_region(history, catalogue, fitter(catalogue, config), config.validation_grid, config.validation);
    if (!a.out.empty()) io::write_text(a.out, io::to_json(region).dump(2) + "\n");
    emit(a.wape_table, render([&](std::ostream& o) { io::write_wape_table(o, region); }));
    if (!a.audit.empty()) {
        const BaselineModel model = fit_winsorized(history, catalogue, config.model, config.winsorize);
        const MonotonicityAudit audit = audit_monotonicity(model, catalogue, config.validation_grid, region);
        io::write_text(a.audit, io::to_json(audit).dump(2) + "\n");
    }
    return 0;
}

struct OptimizeArgs {
    Common common;
    std::string catalogue, history, model, predictions, region, out, report;
    int period = 0;
};

int cmd_optimize(const OptimizeArgs& a) {
    const io::RunConfig config = load(a.common);
    const auto history = a.history.empty() ? std::vector<TrainingRecord>{} : load_history(a.history);
    const Catalogue catalogue = load_catalogue(a.catalogue, a.period, history);
    check_history(history, catalogue);

    std::unique_ptr<DemandModel> model;
    if (!a.model.empty()) {
        model = std::make_unique<BaselineModel>(io::baseline_from_json(io::read_json(a.model)));
    } else if (!a.predictions.empty()) {
        std::ifstream in(a.predictions);
        if (!in) throw Error("cannot open " + a.predictions);
        model = std::make_unique<TableModel>(TableModel::read_csv(in));
    } else if (!history.empty()) {
        model = std::make_unique<BaselineModel>(fit_winsorized(history, catalogue, config.model, config.winsorize));
    } else {
        throw InvalidArgument("optimize needs --model, --predictions or --history");
    }
    FeasibleRegion region;
    if (!a.region.empty())
        region = io::region_from_json(io::read_json(a.region));
    else if (!history.empty())
        region = build_feasible_region(history, catalogue, fitter(catalogue, config), config.validation_grid,
                                       config.validation);
    else
        throw InvalidArgument("optimize needs --region or --history");

    const BandMapping initial = initial_bands(catalogue, config);
    Solution solution = run_solve(catalogue, config, initial);
    if (!solution.report.converged) {
        emit(a.report, json({{"version", kEngineVersion}, {"seed", config.seed}, {"solution", io::to_json(solution.report)}})
                               .dump(2) +
                           "\n");
        throw Error("solve did not converge; see the report for the trajectory");
    }
    std::vector<double> positive;
    for (double d : initial.depths())
        if (d > 0.0) positive.push_back(d);
    const OptimizedEvent event = optimize_event(catalogue, std::move(solution), DepthSet(std::move(positive)),
                                                config.levers, *model, region, config.pipeline);
    io::write_text(a.out, render([&](std::ostream& o) { io::write_event_csv(o, event); }));
    json doc = io::event_summary(event);
    doc["version"] = kEngineVersion;
    doc["seed"] = config.seed;
    doc["model"] = model->kind();
    doc["config"] = replay_config(config, initial);
    emit(a.report, doc.dump(2) + "\n");
    return 0;
}

struct ExperimentArgs {
    Common common;
    std::size_t seeds = 1;
    unsigned jobs = 1;
    std::string out, profits;
};

int cmd_experiment(const ExperimentArgs& a) {
    const io::RunConfig config = load(a.common);
    const SimulationSetup setup = io::simulation_setup(config);
    std::vector<TestReport> reports(a.seeds);
    std::vector<std::exception_ptr> errors(a.seeds);
    // Each seed is independent; results land in seed order so output does not depend on scheduling.
    const unsigned jobs = std::max(1u, std::min<unsigned>(a.jobs, static_cast<unsigned>(a.seeds)));
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < jobs; ++t)
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < a.seeds; i += jobs) {
                try {
                    reports[i] = simulate_online_test(setup, config.seed + i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    json runs = json::array();
    for (const TestReport& r : reports) runs.push_back(io::to_json(r));
    const AggregateReport agg = aggregate_reports(reports, {kFullArm, kSupplyArm, kManualArm});
    json doc = {{"version", kEngineVersion},
                {"seed", config.seed},
                {"config", io::to_json(config)},
                {"aggregate", io::to_json(agg)},
                {"runs", std::move(runs)}};
    emit(a.out, doc.dump(2) + "\n");
    if (!a.profits.empty())
        io::write_text(a.profits, render([&](std::ostream& o) { io::write_profit_dump(o, reports); }));
    return 0;
}

struct ServeArgs {
    Common common;
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string data_dir = "data";
    std::string catalogue, history, region;
    int period = 0;
};

int cmd_serve(const ServeArgs& a) {
    ServiceOptions options;
    options.defaults = load(a.common);
    options.data_dir = a.data_dir;
    if (!a.region.empty()) options.region = io::region_from_json(io::read_json(a.region));
    Service service(options);
    if (!a.catalogue.empty()) {
        auto history = a.history.empty() ? std::vector<TrainingRecord>{} : load_history(a.history);
        Catalogue catalogue = load_catalogue(a.catalogue, a.period, history);
        check_history(history, catalogue);
        const std::string id = service.ingest(std::move(catalogue), std::move(history));
        std::cout << "catalogue " << id << '\n';
    }
    std::cout << "listening on " << a.host << ':' << a.port << std::endl;
    serve(service, a.host, a.port);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Markdown event planning: supply-side solving, demand models, validation and simulation."};
    app.require_subcommand(1);
    app.set_version_flag("--version", kEngineVersion);

    GenerateArgs gen;
    auto* generate = app.add_subcommand("generate", "Write a synthetic catalogue and sales history");
    add_common(generate, gen.common);
    generate->add_option("--out-dir", gen.out_dir, "Directory for catalogue.csv, history.csv, world.json")->required();
    generate->add_option("--products", gen.products, "Overrides world.products");
    generate->add_option("--history-weeks", gen.history_weeks, "Overrides world.history_weeks");

    IngestArgs ing;
    auto* ingest = app.add_subcommand("ingest", "Check a catalogue (and history) and print its summary");
    add_common(ingest, ing.common);
    ingest->add_option("--catalogue", ing.catalogue)->required()->check(CLI::ExistingFile);
    ingest->add_option("--history", ing.history)->check(CLI::ExistingFile);
    ingest->add_option("--period", ing.period, "Catalogue week; defaults to the week after the history");
    ingest->add_option("--out", ing.out, "Write the catalogue as JSON");

    SolveArgs sol;
    auto* solve_cmd = app.add_subcommand("solve", "Supply-side solve of stock value and depth targets");
    add_common(solve_cmd, sol.common);
    solve_cmd->add_option("--catalogue", sol.catalogue)->required()->check(CLI::ExistingFile);
    solve_cmd->add_option("--history", sol.history, "Only used to default --period")->check(CLI::ExistingFile);
    solve_cmd->add_option("--period", sol.period);
    solve_cmd->add_option("--out", sol.out, "Event file: product_id,depth,discounted_price")->required();
    solve_cmd->add_option("--report", sol.report, "Solve report (JSON); stdout by default");

    FitArgs fit;
    auto* fit_cmd = app.add_subcommand("fit", "Fit the baseline demand model");
    add_common(fit_cmd, fit.common);
    fit_cmd->add_option("--catalogue", fit.catalogue)->required()->check(CLI::ExistingFile);
    fit_cmd->add_option("--history", fit.history)->required()->check(CLI::ExistingFile);
    fit_cmd->add_option("--period", fit.period);
    fit_cmd->add_option("--out", fit.out, "Model (JSON); stdout by default");
    fit_cmd->add_option("--predictions", fit.predictions, "Prediction table: product_id,depth,expected_sales");
    fit_cmd->add_option("--grid", fit.grid, "Depths for the prediction table")->delimiter(',');

    ValidateArgs val;
    auto* validate = app.add_subcommand("validate", "Backtest the model and derive the feasible region");
    add_common(validate, val.common);
    validate->add_option("--catalogue", val.catalogue)->required()->check(CLI::ExistingFile);
    validate->add_option("--history", val.history)->required()->check(CLI::ExistingFile);
    validate->add_option("--period", val.period);
    validate->add_option("--out", val.out, "Feasible region (JSON)");
    validate->add_option("--wape-table", val.wape_table, "Group x depth WAPE table; stdout by default");
    validate->add_option("--audit", val.audit, "Monotonicity audit (JSON)");
    validate->add_option("--folds", val.folds);
    validate->add_option("--horizon", val.horizon);
    validate->add_option("--threshold", val.threshold);

    OptimizeArgs opt;
    auto* optimize = app.add_subcommand("optimize", "Full pipeline: solve, holdout split, depth optimization");
    add_common(optimize, opt.common);
    optimize->add_option("--catalogue", opt.catalogue)->required()->check(CLI::ExistingFile);
    optimize->add_option("--history", opt.history, "Fits the model and region when they are not given")
        ->check(CLI::ExistingFile);
    optimize->add_option("--period", opt.period);
    optimize->add_option("--model", opt.model, "Fitted model (JSON)")->check(CLI::ExistingFile);
    optimize->add_option("--predictions", opt.predictions, "Prediction table")->check(CLI::ExistingFile);
    optimize->add_option("--region", opt.region, "Feasible region (JSON)")->check(CLI::ExistingFile);
    optimize->add_option("--out", opt.out, "Event lines")->required();
    optimize->add_option("--report", opt.report, "Summary (JSON); stdout by default");

    ExperimentArgs exp;
    auto* experiment = app.add_subcommand("experiment", "Simulated online tests");
    experiment->require_subcommand(1);
    auto* run = experiment->add_subcommand("run", "Three-arm test over consecutive seeds");
    add_common(run, exp.common);
    run->add_option("--seeds", exp.seeds, "Number of seeds, starting at the configured seed")
        ->check(CLI::PositiveNumber);
    run->add_option("--jobs", exp.jobs, "Worker threads")->check(CLI::PositiveNumber);
    run->add_option("--out", exp.out, "Report (JSON); stdout by default");
    run->add_option("--profits", exp.profits, "Per-product profit dump");

    ServeArgs srv;
    auto* serve_cmd = app.add_subcommand("serve", "HTTP service for the planner");
    add_common(serve_cmd, srv.common);
    serve_cmd->add_option("--host", srv.host);
    serve_cmd->add_option("--port", srv.port)->check(CLI::Range(0, 65535));
    serve_cmd->add_option("--data-dir", srv.data_dir, "Where accepted events are stored");
    serve_cmd->add_option("--catalogue", srv.catalogue, "Catalogue to ingest at start")->check(CLI::ExistingFile);
    serve_cmd->add_option("--history", srv.history)->check(CLI::ExistingFile);
    serve_cmd->add_option("--period", srv.period);
    serve_cmd->add_option("--region", srv.region, "Region served when no catalogue is named")
        ->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*generate) return cmd_generate(gen);
        if (*ingest) return cmd_ingest(ing);
        if (*solve_cmd) return cmd_solve(sol);
        if (*fit_cmd) return cmd_fit(fit);
        if (*validate) return cmd_validate(val);
        if (*optimize) return cmd_optimize(opt);
        if (*run) return cmd_experiment(exp);
        if (*serve_cmd) return cmd_serve(srv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
