#include "markdown/io.hpp"

#include "csv.hpp"
#include "markdown/error.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace markdown::io {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void only_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
    if (!j.is_object()) throw ParseError(where + ": expected an object", 0);
    for (const auto& [k, v] : j.items()) {
        bool known = false;
        for (const char* key : keys) known = known || k == key;
        if (!known) throw ParseError(where + ": unknown key '" + k + "'", 0);
    }
}

template <class T>
void get(const json& j, const char* key, T& out, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return;
    try {
        out = it->template get<T>();
    } catch (const json::exception& e) {
        throw ParseError(where + "." + key + ": " + e.what(), 0);
    }
}

template <class T>
T need(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ParseError(where + ": missing '" + key + "'", 0);
    T out{};
    get(j, key, out, where);
    return out;
}

void check_version(const json& doc, const std::string& where, bool required) {
    if (!doc.is_object()) throw ParseError(where + ": expected an object", 0);
    auto it = doc.find("schema_version");
    if (it == doc.end()) {
        if (required) throw ParseError(where + ": missing schema_version", 0);
        return;
    }
    if (!it->is_number_integer() || it->get<int>() != kSchemaVersion)
        throw ParseError(where + ": unsupported schema_version " + it->dump(), 0);
}

/// Infinite and NaN values become null.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

DepthSet depths_from(const json& j, const std::string& where) {
    try {
        return DepthSet(j.get<std::vector<double>>());
    } catch (const json::exception& e) {
        throw ParseError(where + ": " + e.what(), 0);
    }
}

Product product_from_json(const json& j, std::size_t index) {
    const std::string where = "products[" + std::to_string(index) + "]";
    only_keys(j, {"id", "full_price", "stock_units", "sold_units", "group", "unit_cost", "covariates"}, where);
    Product p;
    p.id = need<std::string>(j, "id", where);
    p.full_price.minor = need<std::int64_t>(j, "full_price", where);
    p.stock_units = need<std::int64_t>(j, "stock_units", where);
    p.sold_units = need<std::int64_t>(j, "sold_units", where);
    p.group = need<std::string>(j, "group", where);
    p.unit_cost.minor = need<std::int64_t>(j, "unit_cost", where);
    get(j, "covariates", p.covariates, where);
    return p;
}

}  // namespace

Catalogue read_catalogue_csv(std::istream& in, int period) {
    const auto cols =
        csv::header(in, {"id", "full_price", "stock_units", "sold_units", "group", "unit_cost"});
    std::vector<std::string> covariates(cols.begin() + 6, cols.end());
    std::vector<Product> products;
    std::set<std::string> seen;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto f = csv::split(line);
        if (f.size() != cols.size())
            throw ParseError("expected " + std::to_string(cols.size()) + " fields, got " + std::to_string(f.size()),
                             line_no);
        Product p;
        p.id = f[0];
        if (p.id.empty()) throw ParseError("empty id", line_no);
        if (!seen.insert(p.id).second) throw ParseError("duplicate product id " + p.id, line_no);
        p.full_price.minor = csv::to_int(f[1], "full_price", line_no);
        p.stock_units = csv::to_int(f[2], "stock_units", line_no);
        p.sold_units = csv::to_int(f[3], "sold_units", line_no);
        p.group = f[4];
        p.unit_cost.minor = csv::to_int(f[5], "unit_cost", line_no);
        if (p.full_price.minor <= 0) throw ParseError("full_price must be > 0", line_no);
        if (p.stock_units < 0 || p.sold_units < 0) throw ParseError("unit counts must be >= 0", line_no);
        if (p.unit_cost.minor < 0) throw ParseError("unit_cost must be >= 0", line_no);
        for (std::size_t c = 0; c < covariates.size(); ++c)
            p.covariates[covariates[c]] = csv::to_double(f[6 + c], covariates[c].c_str(), line_no);
        products.push_back(std::move(p));
    }
    return Catalogue(period, std::move(products));
}

void write_catalogue_csv(std::ostream& out, const Catalogue& catalogue) {
    std::set<std::string> names;
    for (const Product& p : catalogue)
        for (const auto& [k, v] : p.covariates) names.insert(k);
    out << "id,full_price,stock_units,sold_units,group,unit_cost";
    for (const auto& n : names) out << ',' << csv::quote(n);
    out << '\n';
    for (const Product& p : catalogue) {
        out << csv::quote(p.id) << ',' << p.full_price.minor << ',' << p.stock_units << ',' << p.sold_units << ','
            << csv::quote(p.group) << ',' << p.unit_cost.minor;
        for (const auto& n : names) {
            auto it = p.covariates.find(n);
            if (it == p.covariates.end())
                throw InvalidArgument("product " + p.id + " lacks covariate " + n + "; cannot write a rectangular file");
            out << ',' << csv::number(it->second);
        }
        out << '\n';
    }
}

Catalogue catalogue_from_json(const json& doc) {
    check_version(doc, "catalogue", false);
    only_keys(doc, {"schema_version", "period", "products"}, "catalogue");
    int period = 0;
    get(doc, "period", period, "catalogue");
    const json& rows = doc.at("products");
    if (!rows.is_array()) throw ParseError("catalogue.products: expected an array", 0);
    std::vector<Product> products;
    products.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) products.push_back(product_from_json(rows[i], i));
    return Catalogue(period, std::move(products));
}

json to_json(const Catalogue& catalogue) {
    json rows = json::array();
    for (const Product& p : catalogue)
        rows.push_back({{"id", p.id},
                        {"full_price", p.full_price.minor},
                        {"stock_units", p.stock_units},
                        {"sold_units", p.sold_units},
                        {"group", p.group},
                        {"unit_cost", p.unit_cost.minor},
                        {"covariates", p.covariates}});
    return {{"schema_version", kSchemaVersion}, {"period", catalogue.period()}, {"products", std::move(rows)}};
}

Catalogue load_catalogue(const std::filesystem::path& path, int period) {
    if (path.extension() == ".json") {
        Catalogue c = catalogue_from_json(read_json(path));
        return period ? Catalogue(period, c.products()) : c;
    }
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    return read_catalogue_csv(in, period);
}

std::vector<TrainingRecord> read_history_csv(std::istream& in) {
    csv::header(in, {"product_id", "week", "depth", "sales"});
    std::vector<TrainingRecord> out;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto f = csv::split(line);
        if (f.size() != 4) throw ParseError("expected 4 fields", line_no);
        TrainingRecord r;
        r.product_id = f[0];
        r.week = static_cast<int>(csv::to_int(f[1], "week", line_no));
        r.depth = csv::to_double(f[2], "depth", line_no);
        r.sales = csv::to_double(f[3], "sales", line_no);
        if (r.depth < 0.0 || r.depth > 1.0) throw ParseError("depth must lie in [0, 1]", line_no);
        if (r.sales < 0.0) throw ParseError("sales must be >= 0", line_no);
        out.push_back(std::move(r));
    }
    return out;
}

void write_history_csv(std::ostream& out, std::span<const TrainingRecord> records) {
    out << "product_id,week,depth,sales\n";
    for (const auto& r : records)
        out << csv::quote(r.product_id) << ',' << r.week << ',' << csv::number(r.depth) << ','
            << csv::number(r.sales) << '\n';
}

// ---- configuration -------------------------------------------------------------------------

json to_json(const BandMapping& mapping) {
    json bands = json::array();
    for (const CoverBand& b : mapping.bands())
        bands.push_back({{"lower", b.lower}, {"upper", num(b.upper)}, {"depth", b.depth}});
    return bands;
}

BandMapping bands_from_json(const json& doc, double min_width) {
    if (!doc.is_array()) throw ParseError("bands: expected an array", 0);
    std::vector<CoverBand> bands;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const std::string where = "bands[" + std::to_string(i) + "]";
        only_keys(doc[i], {"lower", "upper", "depth"}, where);
        CoverBand b;
        b.lower = need<double>(doc[i], "lower", where);
        b.upper = doc[i].contains("upper") && doc[i]["upper"].is_null() ? kInf : need<double>(doc[i], "upper", where);
        b.depth = need<double>(doc[i], "depth", where);
        bands.push_back(b);
    }
    return BandMapping(std::move(bands), min_width);
}

json to_json(const IthaxTargets& targets) {
    json groups = json::array();
    for (const auto& [g, v] : targets.group_values) groups.push_back({{"group", g}, {"value", v}});
    return {{"stock_value", targets.stock_value}, {"stock_depth", targets.stock_depth}, {"groups", groups}};
}

namespace {

WorldConfig world_section(const json& j) {
    only_keys(j,
              {"products", "groups", "history_weeks", "cover_median", "cover_sigma", "stock_median", "stock_sigma",
               "price_median", "price_sigma", "zero_seller_share", "cost_ratio_min", "cost_ratio_max",
               "elasticity_min", "elasticity_max", "elasticity_jitter", "fixed_elasticity", "season_amplitude",
               "age_decay", "noise_shape", "markdown_share", "history_depth_min", "history_depth_max",
               "history_depth_step", "history_depth_noise"},
              "world");
    WorldConfig w;
    const std::string at = "world";
    get(j, "products", w.products, at);
    get(j, "groups", w.groups, at);
    get(j, "history_weeks", w.history_weeks, at);
    get(j, "cover_median", w.cover_median, at);
    get(j, "cover_sigma", w.cover_sigma, at);
    get(j, "stock_median", w.stock_median, at);
    get(j, "stock_sigma", w.stock_sigma, at);
    get(j, "price_median", w.price_median, at);
    get(j, "price_sigma", w.price_sigma, at);
    get(j, "zero_seller_share", w.zero_seller_share, at);
    get(j, "cost_ratio_min", w.cost_ratio_min, at);
    get(j, "cost_ratio_max", w.cost_ratio_max, at);
    get(j, "elasticity_min", w.elasticity_min, at);
    get(j, "elasticity_max", w.elasticity_max, at);
    get(j, "elasticity_jitter", w.elasticity_jitter, at);
    if (j.contains("fixed_elasticity") && !j["fixed_elasticity"].is_null())
        w.fixed_elasticity = need<double>(j, "fixed_elasticity", at);
    get(j, "season_amplitude", w.season_amplitude, at);
    get(j, "age_decay", w.age_decay, at);
    get(j, "noise_shape", w.noise_shape, at);
    get(j, "markdown_share", w.markdown_share, at);
    get(j, "history_depth_min", w.history_depth_min, at);
    get(j, "history_depth_max", w.history_depth_max, at);
    get(j, "history_depth_step", w.history_depth_step, at);
    get(j, "history_depth_noise", w.history_depth_noise, at);
    w.validate();
    return w;
}

}  // namespace

json to_json(const WorldConfig& w) {
    return {{"products", w.products},
            {"groups", w.groups},
            {"history_weeks", w.history_weeks},
            {"cover_median", w.cover_median},
            {"cover_sigma", w.cover_sigma},
            {"stock_median", w.stock_median},
            {"stock_sigma", w.stock_sigma},
            {"price_median", w.price_median},
            {"price_sigma", w.price_sigma},
            {"zero_seller_share", w.zero_seller_share},
            {"cost_ratio_min", w.cost_ratio_min},
            {"cost_ratio_max", w.cost_ratio_max},
            {"elasticity_min", w.elasticity_min},
            {"elasticity_max", w.elasticity_max},
            {"elasticity_jitter", w.elasticity_jitter},
            {"fixed_elasticity", w.fixed_elasticity ? json(*w.fixed_elasticity) : json(nullptr)},
            {"season_amplitude", w.season_amplitude},
            {"age_decay", w.age_decay},
            {"noise_shape", w.noise_shape},
            {"markdown_share", w.markdown_share},
            {"history_depth_min", w.history_depth_min},
            {"history_depth_max", w.history_depth_max},
            {"history_depth_step", w.history_depth_step},
            {"history_depth_noise", w.history_depth_noise}};
}

WorldConfig world_from_json(const json& doc) { return world_section(doc); }

RunConfig config_from_json(const json& doc) {
    check_version(doc, "config", true);
    only_keys(doc,
              {"schema_version", "seed", "targets", "tolerances", "depths", "bands", "min_band_width", "levers",
               "pipeline", "validation", "model", "world", "experiment"},
              "config");
    RunConfig c;
    get(doc, "seed", c.seed, "config");
    c.levers.seed = c.seed;
    c.pipeline.seed = c.seed;
    c.experiment.options.seed = c.seed;

    if (doc.contains("targets")) {
        const json& t = doc["targets"];
        only_keys(t, {"stock_value", "stock_depth", "groups"}, "targets");
        c.targets.stock_value = need<double>(t, "stock_value", "targets");
        c.targets.stock_depth = need<double>(t, "stock_depth", "targets");
        if (t.contains("groups")) {
            if (!t["groups"].is_array()) throw ParseError("targets.groups: expected an array", 0);
            for (std::size_t i = 0; i < t["groups"].size(); ++i) {
                const std::string where = "targets.groups[" + std::to_string(i) + "]";
                only_keys(t["groups"][i], {"group", "value"}, where);
                const auto g = need<std::string>(t["groups"][i], "group", where);
                if (!c.targets.group_values.emplace(g, need<double>(t["groups"][i], "value", where)).second)
                    throw ParseError(where + ": duplicate group " + g, 0);
            }
        }
    }
    if (doc.contains("tolerances")) {
        const json& t = doc["tolerances"];
        only_keys(t, {"f1", "f2", "max_iterations", "stagnation"}, "tolerances");
        get(t, "f1", c.targets.f1_tol, "tolerances");
        get(t, "f2", c.targets.f2_tol, "tolerances");
        get(t, "max_iterations", c.targets.max_iterations, "tolerances");
        get(t, "stagnation", c.targets.stagnation_tol, "tolerances");
    }
    if (doc.contains("depths")) c.depths = depths_from(doc["depths"], "depths");
    get(doc, "min_band_width", c.min_band_width, "config");
    if (doc.contains("bands")) c.bands = bands_from_json(doc["bands"], c.min_band_width);

    if (doc.contains("levers")) {
        const json& l = doc["levers"];
        only_keys(l, {"inclusions", "exclusions"}, "levers");
        if (l.contains("inclusions")) {
            if (!l["inclusions"].is_array()) throw ParseError("levers.inclusions: expected an array", 0);
            for (std::size_t i = 0; i < l["inclusions"].size(); ++i) {
                const std::string where = "levers.inclusions[" + std::to_string(i) + "]";
                only_keys(l["inclusions"][i], {"product_id", "depth"}, where);
                c.levers.inclusions.set(need<std::string>(l["inclusions"][i], "product_id", where),
                                        need<double>(l["inclusions"][i], "depth", where));
            }
        }
        std::vector<std::string> ex;
        get(l, "exclusions", ex, "levers");
        c.levers.exclusions.insert(ex.begin(), ex.end());
    }
    if (doc.contains("pipeline")) {
        only_keys(doc["pipeline"], {"holdout_fraction"}, "pipeline");
        get(doc["pipeline"], "holdout_fraction", c.pipeline.holdout_fraction, "pipeline");
    }
    if (doc.contains("validation")) {
        const json& v = doc["validation"];
        only_keys(v, {"folds", "horizon", "threshold", "min_support", "min_train_weeks", "grid", "winsorize"},
                  "validation");
        get(v, "folds", c.validation.folds, "validation");
        get(v, "horizon", c.validation.horizon, "validation");
        get(v, "threshold", c.validation.threshold, "validation");
        get(v, "min_support", c.validation.min_support, "validation");
        get(v, "min_train_weeks", c.validation.min_train_weeks, "validation");
        if (v.contains("grid")) c.validation_grid = depths_from(v["grid"], "validation.grid");
        get(v, "winsorize", c.winsorize, "validation");
        if (c.winsorize < 0.0 || c.winsorize >= 1.0) throw ParseError("validation.winsorize must lie in [0, 1)", 0);
    }
    if (doc.contains("model")) {
        const json& m = doc["model"];
        only_keys(m, {"features", "ridge", "per_group"}, "model");
        get(m, "features", c.model.features, "model");
        get(m, "ridge", c.model.ridge, "model");
        get(m, "per_group", c.model.per_group, "model");
    }
    if (doc.contains("world")) c.world = world_section(doc["world"]);
    if (doc.contains("experiment")) {
        const json& e = doc["experiment"];
        only_keys(e,
                  {"stock_value_fraction", "stock_depth", "event_weeks", "holdout_fraction", "manual_budget_share",
                   "event_depths", "model", "region"},
                  "experiment");
        auto& x = c.experiment;
        get(e, "stock_value_fraction", x.stock_value_fraction, "experiment");
        get(e, "stock_depth", x.stock_depth, "experiment");
        get(e, "event_weeks", x.options.event_weeks, "experiment");
        get(e, "holdout_fraction", x.options.holdout_fraction, "experiment");
        get(e, "manual_budget_share", x.options.manual_budget_share, "experiment");
        if (e.contains("event_depths")) x.options.event_depths = depths_from(e["event_depths"], "experiment.event_depths");
        get(e, "model", x.model, "experiment");
        get(e, "region", x.region, "experiment");
        if (x.model != "baseline" && x.model != "ground_truth")
            throw ParseError("experiment.model must be 'baseline' or 'ground_truth'", 0);
        if (x.region != "backtest" && x.region != "everywhere")
            throw ParseError("experiment.region must be 'backtest' or 'everywhere'", 0);
        if (!(x.stock_value_fraction > 0.0 && x.stock_value_fraction <= 1.0))
            throw ParseError("experiment.stock_value_fraction must lie in (0, 1]", 0);
    }
    return c;
}

json to_json(const RunConfig& c) {
    json doc = {{"schema_version", kSchemaVersion}, {"seed", c.seed}};
    json targets = to_json(c.targets);
    doc["targets"] = std::move(targets);
    doc["tolerances"] = {{"f1", c.targets.f1_tol},
                         {"f2", c.targets.f2_tol},
                         {"max_iterations", c.targets.max_iterations},
                         {"stagnation", c.targets.stagnation_tol}};
    doc["depths"] = c.depths.values();
    doc["min_band_width"] = c.min_band_width;
    if (c.bands) doc["bands"] = to_json(*c.bands);
    json inclusions = json::array();
    for (const auto& [id, d] : c.levers.inclusions) inclusions.push_back({{"product_id", id}, {"depth", d}});
    doc["levers"] = {{"inclusions", inclusions},
                     {"exclusions", std::vector<std::string>(c.levers.exclusions.begin(), c.levers.exclusions.end())}};
    doc["pipeline"] = {{"holdout_fraction", c.pipeline.holdout_fraction}};
    doc["validation"] = {{"folds", c.validation.folds},
                         {"horizon", c.validation.horizon},
                         {"threshold", c.validation.threshold},
                         {"min_support", c.validation.min_support},
                         {"min_train_weeks", c.validation.min_train_weeks},
                         {"grid", c.validation_grid.values()},
                         {"winsorize", c.winsorize}};
    doc["model"] = {{"features", c.model.features}, {"ridge", c.model.ridge}, {"per_group", c.model.per_group}};
    doc["world"] = to_json(c.world);
    const auto& x = c.experiment;
    doc["experiment"] = {{"stock_value_fraction", x.stock_value_fraction},
                         {"stock_depth", x.stock_depth},
                         {"event_weeks", x.options.event_weeks},
                         {"holdout_fraction", x.options.holdout_fraction},
                         {"manual_budget_share", x.options.manual_budget_share},
                         {"event_depths", x.options.event_depths.values()},
                         {"model", x.model},
                         {"region", x.region}};
    return doc;
}

RunConfig load_config(const std::filesystem::path& path) { return config_from_json(read_json(path)); }

SimulationSetup simulation_setup(const RunConfig& c) {
    SimulationSetup s;
    s.world = c.world;
    s.stock_value_fraction = c.experiment.stock_value_fraction;
    s.stock_depth = c.experiment.stock_depth;
    s.options = c.experiment.options;
    s.ground_truth_model = c.experiment.model == "ground_truth";
    s.region_everywhere = c.experiment.region == "everywhere";
    s.fit = c.model;
    s.winsorize = c.winsorize;
    s.validation = c.validation;
    s.validation_grid = c.validation_grid;
    return s;
}

json to_json(const SolveReport& r) {
    json trajectory = json::array();
    for (std::size_t i = 0; i < r.depth_trajectory.size(); ++i)
        trajectory.push_back({{"iteration", i}, {"stock_value", r.value_trajectory[i]}, {"stock_depth", r.depth_trajectory[i]}});
    json doc = {{"achieved_value", r.achieved_value},
                {"achieved_depth", r.achieved_depth},
                {"f1", r.f1},
                {"f2", r.f2},
                {"iterations", r.iterations},
                {"converged", r.converged},
                {"insufficient_catalogue", r.insufficient_catalogue},
                {"trajectory", std::move(trajectory)},
                {"group_achieved", r.group_achieved},
                {"warnings", r.warnings}};
    if (!r.band_history.empty()) doc["final_bands"] = to_json(r.band_history.back());
    return doc;
}

// ---- outputs -------------------------------------------------------------------------------

void write_solution_csv(std::ostream& out, const Assignment& assignment, const Catalogue& catalogue) {
    out << "product_id,depth,discounted_price\n";
    for (const auto& [id, d] : assignment) {
        const Product& p = catalogue.at(id);
        const auto price = std::llround(static_cast<double>(p.full_price.minor) * (1.0 - d));
        out << csv::quote(id) << ',' << csv::number(d) << ',' << price << '\n';
    }
}

Assignment read_solution_csv(std::istream& in) {
    csv::header(in, {"product_id", "depth"});
    Assignment a;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto f = csv::split(line);
        if (f.size() < 2) throw ParseError("expected at least 2 fields", line_no);
        try {
            a.set(f[0], csv::to_double(f[1], "depth", line_no));
        } catch (const InvalidArgument& e) {
            throw ParseError(e.what(), line_no);
        }
    }
    return a;
}

void write_event_csv(std::ostream& out, const OptimizedEvent& event) {
    out << "product_id,arm,ithax_depth,final_depth,expected_sales,expected_profit\n";
    for (const EventLine& l : event.lines)
        out << csv::quote(l.product_id) << ',' << to_string(l.arm) << ',' << csv::number(l.ithax_depth) << ','
            << csv::number(l.final_depth) << ',' << csv::number(l.expected_sales) << ','
            << csv::number(l.expected_profit) << '\n';
}

json event_summary(const OptimizedEvent& event) {
    std::size_t fallback = 0, unprofitable = 0, pinned = 0;
    for (const EventLine& l : event.lines) {
        fallback += l.fallback;
        unprofitable += l.no_profitable_depth;
        pinned += l.pinned;
    }
    return {{"arms",
             {{"control", {{"products", event.control.size()}, {"expected_profit", event.control_expected_profit}}},
              {"treatment",
               {{"products", event.treatment.size()}, {"expected_profit", event.treatment_expected_profit}}}}},
            {"final_stock_depth", event.final_stock_depth},
            {"fallback_products", fallback},
            {"no_profitable_depth_products", unprofitable},
            {"pinned_products", pinned},
            {"solve", to_json(event.solution.report)}};
}

json to_json(const FeasibleRegion& region) {
    json groups = json::object();
    for (const auto& [g, cells] : region.cells()) {
        json row = json::array();
        for (std::size_t i = 0; i < cells.size(); ++i)
            row.push_back({{"depth", region.grid().values()[i]},
                           {"wape", num(cells[i].wape)},
                           {"observations", cells[i].observations},
                           {"feasible", cells[i].feasible},
                           {"reason", cells[i].reason}});
        groups[g] = std::move(row);
    }
    return {{"schema_version", kSchemaVersion},
            {"threshold", region.threshold()},
            {"grid", region.grid().values()},
            {"groups", std::move(groups)}};
}

FeasibleRegion region_from_json(const json& doc) {
    check_version(doc, "region", false);
    only_keys(doc, {"schema_version", "threshold", "grid", "groups"}, "region");
    const DepthSet grid = depths_from(doc.at("grid"), "region.grid");
    const auto threshold = need<double>(doc, "threshold", "region");
    std::map<std::string, std::vector<RegionCell>> cells;
    if (!doc.contains("groups") || !doc["groups"].is_object()) throw ParseError("region.groups: expected an object", 0);
    for (const auto& [g, row] : doc["groups"].items()) {
        const std::string where = "region.groups." + g;
        if (!row.is_array() || row.size() != grid.size())
            throw ParseError(where + ": expected one cell per grid depth", 0);
        std::vector<RegionCell> out;
        for (std::size_t i = 0; i < row.size(); ++i) {
            only_keys(row[i], {"depth", "wape", "observations", "feasible", "reason"}, where);
            RegionCell c;
            c.wape = row[i].contains("wape") && row[i]["wape"].is_null() ? std::nan("")
                                                                         : need<double>(row[i], "wape", where);
            get(row[i], "observations", c.observations, where);
            c.feasible = need<bool>(row[i], "feasible", where);
            get(row[i], "reason", c.reason, where);
            if (row[i].contains("depth") && std::abs(need<double>(row[i], "depth", where) - grid.values()[i]) >
                                                DepthSet::kTolerance)
                throw ParseError(where + ": cell depth does not match the grid", 0);
            out.push_back(std::move(c));
        }
        cells.emplace(g, std::move(out));
    }
    return FeasibleRegion(grid, threshold, std::move(cells));
}

void write_wape_table(std::ostream& out, const FeasibleRegion& region) {
    out << "depth";
    for (const auto& [g, cells] : region.cells()) out << ',' << csv::quote(g);
    out << '\n';
    for (std::size_t i = 0; i < region.grid().size(); ++i) {
        out << csv::number(region.grid().values()[i]);
        for (const auto& [g, cells] : region.cells()) {
            out << ',';
            if (std::isfinite(cells[i].wape)) out << csv::number(cells[i].wape);
        }
        out << '\n';
    }
}

json to_json(const MonotonicityAudit& a) {
    return {{"products", a.products},
            {"non_decreasing", a.non_decreasing},
            {"strictly_in_region", a.strictly_in_region},
            {"decreasing", a.decreasing},
            {"not_strict", a.not_strict}};
}

namespace {

json fit_to_json(const BaselineModel::GroupFit& f) {
    auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    return {{"mean", vec(f.mean)},
            {"scale", vec(f.scale)},
            {"coef", vec(f.coef)},
            {"observations", f.observations},
            {"depth_clamped", f.depth_clamped}};
}

BaselineModel::GroupFit fit_from_json(const json& j, std::size_t features, const std::string& where) {
    only_keys(j, {"mean", "scale", "coef", "observations", "depth_clamped"}, where);
    auto vec = [&](const char* key, std::size_t n) {
        const auto v = need<std::vector<double>>(j, key, where);
        if (v.size() != n) throw ParseError(where + "." + key + ": wrong length", 0);
        return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
    };
    BaselineModel::GroupFit f;
    f.mean = vec("mean", features);
    f.scale = vec("scale", features);
    f.coef = vec("coef", features + 2);
    get(j, "observations", f.observations, where);
    get(j, "depth_clamped", f.depth_clamped, where);
    return f;
}

}  // namespace

json to_json(const BaselineModel& model) {
    json groups = json::object();
    for (const auto& [g, f] : model.group_fits()) groups[g] = fit_to_json(f);
    return {{"schema_version", kSchemaVersion},
            {"kind", model.kind()},
            {"features", model.feature_names()},
            {"first_week", model.first_week()},
            {"last_week", model.last_week()},
            {"groups", std::move(groups)},
            {"pooled", fit_to_json(model.pooled_fit())},
            {"product_groups", model.product_groups()},
            {"warnings", model.warnings()}};
}

BaselineModel baseline_from_json(const json& doc) {
    check_version(doc, "model", false);
    only_keys(doc,
              {"schema_version", "kind", "features", "first_week", "last_week", "groups", "pooled", "product_groups",
               "warnings"},
              "model");
    if (doc.value("kind", std::string("baseline")) != "baseline") throw ParseError("model: kind must be 'baseline'", 0);
    const auto features = need<std::vector<std::string>>(doc, "features", "model");
    std::map<std::string, BaselineModel::GroupFit> groups;
    if (doc.contains("groups"))
        for (const auto& [g, f] : doc["groups"].items())
            groups.emplace(g, fit_from_json(f, features.size(), "model.groups." + g));
    const auto pooled = fit_from_json(doc.at("pooled"), features.size(), "model.pooled");
    std::map<std::string, std::string> product_groups;
    get(doc, "product_groups", product_groups, "model");
    std::vector<std::string> warnings;
    get(doc, "warnings", warnings, "model");
    int first = 0, last = 0;
    get(doc, "first_week", first, "model");
    get(doc, "last_week", last, "model");
    return BaselineModel(features, std::move(groups), pooled, std::move(product_groups), std::move(warnings), first,
                         last);
}

void write_prediction_table(std::ostream& out, const DemandModel& model, const Catalogue& catalogue,
                            const DepthSet& grid) {
    out << "product_id,depth,expected_sales\n";
    for (const Product& p : catalogue)
        for (double d : grid) out << csv::quote(p.id) << ',' << csv::number(d) << ',' << csv::number(model.predict(p, d)) << '\n';
}

json to_json(const TestReport& r) {
    json arms = json::array();
    for (const ArmSummary& a : r.arms)
        arms.push_back({{"name", a.name},
                        {"n", a.n},
                        {"mean", a.mean},
                        {"median", a.median},
                        {"normality",
                         {{"jarque_bera", a.normality.jarque_bera},
                          {"p_value", a.normality.p_value},
                          {"skewness", a.normality.skewness},
                          {"excess_kurtosis", a.normality.excess_kurtosis}}}});
    for (std::size_t i = 0; i < r.samples.size() && i < arms.size(); ++i) {
        arms[i]["stock_value"] = r.samples[i].stock_value;
        arms[i]["stock_depth"] = r.samples[i].stock_depth;
    }
    json pairs = json::array();
    for (const PairComparison& p : r.pairs)
        pairs.push_back({{"a", p.a},
                         {"b", p.b},
                         {"u", p.u},
                         {"p_value", p.p_value},
                         {"exact", p.exact},
                         {"median_uplift_pct", p.median_uplift ? json(*p.median_uplift) : json(nullptr)},
                         {"mean_uplift_pct", p.mean_uplift ? json(*p.mean_uplift) : json(nullptr)}});
    return {{"seed", r.seed},
            {"arms", std::move(arms)},
            {"kruskal_wallis", {{"h", r.kruskal.statistic}, {"p_value", r.kruskal.p_value}}},
            {"pairs", std::move(pairs)},
            {"supply_side_solve", to_json(r.supply_report)}};
}

json to_json(const AggregateReport& r) {
    json arms = json::array();
    for (const auto& a : r.arms)
        arms.push_back({{"name", a.name}, {"median_of_medians", a.median_of_medians}, {"mean_of_medians", a.mean_of_medians}});
    json pairs = json::array();
    for (const auto& p : r.pairs) pairs.push_back({{"a", p.a}, {"b", p.b}, {"a_wins", p.a_wins}, {"b_wins", p.b_wins}});
    return {{"seeds", r.seeds},
            {"alpha", r.alpha},
            {"arms", std::move(arms)},
            {"pairs", std::move(pairs)},
            {"order", r.order},
            {"ordered_seeds", r.ordered_seeds}};
}

void write_profit_dump(std::ostream& out, std::span<const TestReport> reports) {
    out << "seed,arm,product_id,depth,profit\n";
    for (const TestReport& r : reports)
        for (const PolicyArm& a : r.samples)
            for (std::size_t i = 0; i < a.product_ids.size(); ++i)
                out << r.seed << ',' << a.name << ',' << csv::quote(a.product_ids[i]) << ','
                    << csv::number(*a.assignment.depth(a.product_ids[i])) << ',' << csv::number(a.profits[i]) << '\n';
}

// ---- files ---------------------------------------------------------------------------------

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json read_json(const std::filesystem::path& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what(), 0);
    }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << text;
        if (!out) throw Error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace markdown::io
