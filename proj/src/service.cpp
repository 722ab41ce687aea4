#include "markdown/service.hpp"

#include "markdown/error.hpp"
#include "markdown/ithax.hpp"
#include "markdown/optimizer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace markdown {

namespace {

using io::json;

struct HttpError : Error {
    HttpError(int status, const std::string& what, json extra = json::object())
        : Error(what), status(status), extra(std::move(extra)) {}
    int status;
    json extra;
};

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex_id(const char* prefix, const std::string& content) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(content)));
    return std::string(prefix) + buf;
}

json envelope(std::uint64_t seed) { return {{"version", kEngineVersion}, {"seed", seed}}; }

Response reply(int status, json doc) { return {status, doc.dump() + "\n"}; }

Response error_reply(int status, const std::string& message, std::uint64_t seed, json extra = json::object()) {
    json doc = envelope(seed);
    doc["error"] = {{"status", status}, {"message", message}};
    for (auto& [k, v] : extra.items()) doc[k] = v;
    return reply(status, std::move(doc));
}

void only_keys(const json& j, std::initializer_list<const char*> keys, const char* where) {
    if (!j.is_object()) throw InvalidArgument(std::string(where) + ": expected an object");
    for (const auto& [k, v] : j.items())
        if (std::none_of(keys.begin(), keys.end(), [&](const char* key) { return k == key; }))
            throw InvalidArgument(std::string(where) + ": unknown key '" + k + "'");
}

json parse_body(const std::string& body) {
    try {
        return json::parse(body);
    } catch (const json::parse_error& e) {
        throw InvalidArgument(std::string("request body is not valid JSON: ") + e.what());
    }
}

std::string url_decode(const std::string& s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '%' && i + 2 < s.size() && std::isxdigit(static_cast<unsigned char>(s[i + 1])) &&
            std::isxdigit(static_cast<unsigned char>(s[i + 2]))) {
            out.push_back(static_cast<char>(std::stoi(s.substr(i + 1, 2), nullptr, 16)));
            i += 2;
        } else {
            out.push_back(s[i] == '+' ? ' ' : s[i]);
        }
    }
    return out;
}

std::vector<std::string> segments(const std::string& path) {
    std::vector<std::string> out;
    std::stringstream ss(path);
    std::string part;
    while (std::getline(ss, part, '/'))
        if (!part.empty()) out.push_back(url_decode(part));
    return out;
}

bool safe_id(const std::string& id) {
    return !id.empty() && id.size() <= 64 &&
           std::all_of(id.begin(), id.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '-'; });
}

}  // namespace

json catalogue_summary(const Catalogue& catalogue) {
    std::map<std::string, std::pair<std::size_t, double>> groups;
    std::vector<double> covers;
    std::size_t zero_sellers = 0;
    double total = 0.0, finite = 0.0;
    for (const Product& p : catalogue) {
        auto& g = groups[p.group];
        ++g.first;
        g.second += p.stock_value();
        total += p.stock_value();
        const double c = cover(p);
        if (std::isfinite(c)) {
            covers.push_back(c);
            finite += p.stock_value();
        } else {
            ++zero_sellers;
        }
    }
    std::sort(covers.begin(), covers.end());
    auto quantile = [&](double q) -> json {
        if (covers.empty()) return nullptr;
        return covers[static_cast<std::size_t>(q * static_cast<double>(covers.size() - 1))];
    };
    json g = json::array();
    for (const auto& [name, v] : groups) g.push_back({{"group", name}, {"products", v.first}, {"stock_value", v.second}});
    return {{"products", catalogue.size()},
            {"period", catalogue.period()},
            {"stock_value", total},
            {"finite_cover_stock_value", finite},
            {"zero_sellers", zero_sellers},
            {"cover_quantiles", {{"p10", quantile(0.1)}, {"p50", quantile(0.5)}, {"p90", quantile(0.9)}, {"p99", quantile(0.99)}}},
            {"groups", std::move(g)},
            {"warnings", catalogue.warnings()}};
}

std::string catalogue_id(const Catalogue& catalogue, std::span<const TrainingRecord> history) {
    std::ostringstream canonical;
    canonical << io::to_json(catalogue).dump();
    io::write_history_csv(canonical, history);
    return hex_id("cat-", canonical.str());
}

namespace {

}  // namespace

Service::Service(ServiceOptions options) : options_(std::move(options)) {}

std::string Service::ingest(Catalogue catalogue, std::vector<TrainingRecord> history, bool* created) {
    const std::string id = catalogue_id(catalogue, history);
    if (created) *created = false;
    if (find(id)) return id;

    auto entry = std::make_shared<Entry>();
    entry->history_records = history.size();
    if (!history.empty()) {
        const io::RunConfig& d = options_.defaults;
        const auto train = [&](std::span<const TrainingRecord> r) {
            return fit_winsorized(r, catalogue, d.model, d.winsorize);
        };
        entry->model = train(history);
        entry->region = build_feasible_region(
            history, catalogue,
            [&](std::span<const TrainingRecord> r) { return std::make_unique<BaselineModel>(train(r)); },
            d.validation_grid, d.validation);
    }
    entry->catalogue = std::move(catalogue);
    std::unique_lock lock(catalogues_mutex_);
    const bool inserted = catalogues_.emplace(id, std::move(entry)).second;
    if (created) *created = inserted;
    return id;
}

std::shared_ptr<const Service::Entry> Service::find(const std::string& id) const {
    std::shared_lock lock(catalogues_mutex_);
    auto it = catalogues_.find(id);
    return it == catalogues_.end() ? nullptr : it->second;
}

Response Service::handle(const std::string& method, const std::string& target, const std::string& body) {
    std::uint64_t seed = 0;
    try {
        const auto q = target.find('?');
        const std::string path = target.substr(0, q);
        std::map<std::string, std::string> query;
        if (q != std::string::npos) {
            std::stringstream ss(target.substr(q + 1));
            std::string kv;
            while (std::getline(ss, kv, '&')) {
                const auto eq = kv.find('=');
                query[url_decode(kv.substr(0, eq))] = eq == std::string::npos ? "" : url_decode(kv.substr(eq + 1));
            }
        }
        const auto seg = segments(path);
        auto route = [&](const char* m, std::initializer_list<const char*> shape) {
            if (method != m || seg.size() != shape.size()) return false;
            std::size_t i = 0;
            for (const char* s : shape) {
                if (*s != '*' && seg[i] != s) return false;
                ++i;
            }
            return true;
        };
        if (route("GET", {"health"})) return reply(200, envelope(0));
        if (route("POST", {"catalogues"})) return post_catalogue(body);
        if (route("GET", {"catalogues", "*", "summary"})) return get_summary(seg[1]);
        if (route("GET", {"feasible-region"})) return get_region(query);
        if (route("POST", {"whatif"})) return post_whatif(body);
        if (route("POST", {"events"})) return post_event(body);
        if (route("GET", {"events", "*"})) return get_event(seg[1]);
        const bool known = !seg.empty() && (seg[0] == "catalogues" || seg[0] == "feasible-region" ||
                                            seg[0] == "whatif" || seg[0] == "events" || seg[0] == "health");
        if (known) return error_reply(405, "method " + method + " not allowed on " + path, seed);
        return error_reply(404, "no such endpoint " + path, seed);
    } catch (const HttpError& e) {
        return error_reply(e.status, e.what(), e.extra.value("seed", seed), e.extra);
    } catch (const InvalidArgument& e) {
        return error_reply(400, e.what(), seed);
    } catch (const ParseError& e) {
        return error_reply(400, e.what(), seed);
    } catch (const std::exception& e) {
        return error_reply(500, e.what(), seed);
    }
}

Response Service::post_catalogue(const std::string& body) {
    const json doc = parse_body(body);
    only_keys(doc, {"schema_version", "period", "products", "history", "catalogue_csv", "history_csv"}, "catalogue");
    Catalogue catalogue;
    if (doc.contains("catalogue_csv")) {
        if (doc.contains("products")) throw InvalidArgument("send either products or catalogue_csv, not both");
        std::istringstream in(doc["catalogue_csv"].get<std::string>());
        catalogue = io::read_catalogue_csv(in, doc.value("period", 0));
    } else {
        json cat = doc;
        cat.erase("history");
        cat.erase("history_csv");
        catalogue = io::catalogue_from_json(cat);
    }
    std::vector<TrainingRecord> history;
    if (doc.contains("history_csv")) {
        std::istringstream in(doc["history_csv"].get<std::string>());
        history = io::read_history_csv(in);
    } else if (doc.contains("history")) {
        std::ostringstream text;
        text << "product_id,week,depth,sales\n";
        for (const auto& r : doc["history"]) {
            only_keys(r, {"product_id", "week", "depth", "sales"}, "history");
            text << r.at("product_id").get<std::string>() << ',' << r.at("week").get<int>() << ','
                 << r.at("depth").dump() << ',' << r.at("sales").dump() << '\n';
        }
        std::istringstream in(text.str());
        history = io::read_history_csv(in);
    }
    for (const auto& r : history)
        if (!catalogue.find(r.product_id)) throw InvalidArgument("history names unknown product " + r.product_id);
    bool created = false;
    const std::string id = ingest(std::move(catalogue), std::move(history), &created);
    const auto entry = find(id);
    json out = envelope(0);
    out["catalogue_id"] = id;
    out["summary"] = catalogue_summary(entry->catalogue);
    out["history_records"] = entry->history_records;
    out["has_model"] = entry->model.has_value();
    return reply(created ? 201 : 200, std::move(out));
}

Response Service::get_summary(const std::string& id) {
    const auto entry = find(id);
    if (!entry) return error_reply(404, "unknown catalogue " + id, 0);
    json out = envelope(0);
    out["catalogue_id"] = id;
    out["summary"] = catalogue_summary(entry->catalogue);
    out["history_records"] = entry->history_records;
    out["has_model"] = entry->model.has_value();
    return reply(200, std::move(out));
}

Response Service::get_region(const std::map<std::string, std::string>& query) {
    json out = envelope(0);
    auto it = query.find("catalogue_id");
    if (it == query.end()) {
        if (!options_.region) return error_reply(404, "no feasible region configured; pass ?catalogue_id=", 0);
        out["region"] = io::to_json(*options_.region);
        return reply(200, std::move(out));
    }
    const auto entry = find(it->second);
    if (!entry) return error_reply(404, "unknown catalogue " + it->second, 0);
    if (!entry->region) return error_reply(404, "catalogue " + it->second + " was ingested without history", 0);
    out["catalogue_id"] = it->second;
    out["region"] = io::to_json(*entry->region);
    return reply(200, std::move(out));
}

Service::Outcome Service::evaluate(const json& request, std::uint64_t& seed) const {
    only_keys(request,
              {"catalogue_id", "targets", "tolerances", "bands", "depths", "min_band_width", "levers", "pipeline",
               "holdout_fraction", "seed", "label"},
              "whatif");
    if (request.contains("seed") && request["seed"].is_number_unsigned()) seed = request["seed"].get<std::uint64_t>();
    if (!request.contains("catalogue_id") || !request["catalogue_id"].is_string())
        throw InvalidArgument("whatif: catalogue_id is required");
    if (!request.contains("targets")) throw InvalidArgument("whatif: targets are required");
    const std::string id = request["catalogue_id"].get<std::string>();
    const auto entry = find(id);
    if (!entry) throw HttpError(404, "unknown catalogue " + id, {{"seed", seed}});
    const std::string pipeline = request.value("pipeline", std::string("ithax"));
    if (pipeline != "ithax" && pipeline != "full") throw InvalidArgument("pipeline must be 'ithax' or 'full'");

    json cfg = {{"schema_version", io::kSchemaVersion}};
    for (const char* k : {"seed", "targets", "tolerances", "bands", "depths", "min_band_width", "levers"})
        if (request.contains(k)) cfg[k] = request[k];
    if (request.contains("holdout_fraction")) cfg["pipeline"] = {{"holdout_fraction", request["holdout_fraction"]}};
    const io::RunConfig config = io::config_from_json(cfg);
    seed = config.seed;

    const Catalogue& catalogue = entry->catalogue;
    config.levers.inclusions.validate(catalogue);
    for (const auto& x : config.levers.exclusions) catalogue.at(x);
    const BandMapping initial = config.bands ? *config.bands
                                             : default_initial_mapping(catalogue, config.depths, config.targets,
                                                                       config.levers, config.min_band_width);
    config.targets.validate(initial);
    if (pipeline == "full" && !entry->model)
        throw InvalidArgument("the full pipeline needs a catalogue ingested with history");

    Solution solution;
    try {
        solution = solve(catalogue, config.targets, initial, config.levers);
    } catch (const BottomedOut& e) {
        json extra = {{"seed", seed}};
        if (e.report()) extra["solution"] = io::to_json(*e.report());
        extra["bands"] = io::to_json(e.mapping());
        throw HttpError(409, e.what(), extra);
    }

    json exported = io::to_json(config);
    exported["bands"] = io::to_json(initial);
    for (const char* k : {"world", "experiment", "validation", "model"}) exported.erase(k);
    const std::string token = hex_id("evt-", std::string(kEngineVersion) + "|" + id + "|" + pipeline + "|" + exported.dump());

    Outcome out;
    out.converged = solution.report.converged;
    json doc = envelope(seed);
    doc["catalogue_id"] = id;
    doc["pipeline"] = pipeline;
    doc["token"] = token;
    doc["targets"] = io::to_json(config.targets);
    json report = io::to_json(solution.report);
    json trajectory = report["trajectory"];
    report.erase("trajectory");
    report["products"] = solution.assignment.size();
    report["target_value"] = config.targets.stock_value;
    report["target_depth"] = config.targets.stock_depth;
    doc["solution"] = std::move(report);
    doc["trajectory"] = std::move(trajectory);
    doc["initial_bands"] = io::to_json(initial);

    json scatter = json::array();
    std::map<double, std::pair<std::size_t, double>> histogram;
    for (const auto& [pid, d] : solution.assignment) {
        const Product& p = catalogue.at(pid);
        const double c = cover(p);
        scatter.push_back({{"product_id", pid}, {"cover", std::isfinite(c) ? json(c) : json(nullptr)}, {"depth", d}});
        auto& h = histogram[d];
        ++h.first;
        h.second += p.stock_value();
    }
    json hist = json::array();
    for (const auto& [d, h] : histogram) hist.push_back({{"depth", d}, {"products", h.first}, {"stock_value", h.second}});
    doc["scatter"] = std::move(scatter);
    doc["histogram"] = std::move(hist);
    doc["config"] = std::move(exported);

    json lines = json::array();
    if (pipeline == "full" && out.converged) {
        std::vector<double> positive;
        for (double d : initial.depths())
            if (d > 0.0) positive.push_back(d);
        PipelineOptions options = config.pipeline;
        const OptimizedEvent event = optimize_event(catalogue, solution, DepthSet(std::move(positive)), config.levers,
                                                    *entry->model, *entry->region, options);
        json summary = io::event_summary(event);
        doc["arms"] = summary["arms"];
        doc["final_stock_depth"] = summary["final_stock_depth"];
        doc["fallback_products"] = summary["fallback_products"];
        doc["no_profitable_depth_products"] = summary["no_profitable_depth_products"];
        for (const EventLine& l : event.lines)
            lines.push_back({{"product_id", l.product_id},
                             {"arm", to_string(l.arm)},
                             {"ithax_depth", l.ithax_depth},
                             {"final_depth", l.final_depth},
                             {"expected_sales", l.expected_sales},
                             {"expected_profit", l.expected_profit}});
    } else {
        for (const auto& [pid, d] : solution.assignment)
            lines.push_back({{"product_id", pid},
                             {"depth", d},
                             {"discounted_price",
                              std::llround(static_cast<double>(catalogue.at(pid).full_price.minor) * (1.0 - d))}});
    }
    out.document = std::move(doc);
    out.lines = std::move(lines);
    return out;
}

Response Service::post_whatif(const std::string& body) {
    std::uint64_t seed = 0;
    const json request = parse_body(body);
    try {
        Outcome o = evaluate(request, seed);
        if (!o.converged) {
            o.document["error"] = {{"status", 409}, {"message", "solve did not converge"}};
            return reply(409, std::move(o.document));
        }
        return reply(200, std::move(o.document));
    } catch (const InvalidArgument& e) {
        return error_reply(400, e.what(), seed);
    } catch (const ParseError& e) {
        return error_reply(400, e.what(), seed);
    }
}

Response Service::post_event(const std::string& body) {
    std::uint64_t seed = 0;
    const json request = parse_body(body);
    Outcome o;
    try {
        o = evaluate(request, seed);
    } catch (const InvalidArgument& e) {
        return error_reply(400, e.what(), seed);
    } catch (const ParseError& e) {
        return error_reply(400, e.what(), seed);
    }
    if (!o.converged) {
        o.document["error"] = {{"status", 409}, {"message", "solve did not converge; nothing persisted"}};
        return reply(409, std::move(o.document));
    }
    const std::string id = o.document["token"].get<std::string>();
    json event = std::move(o.document);
    event["schema_version"] = io::kSchemaVersion;
    event["event_id"] = id;
    event["label"] = request.value("label", std::string());
    event["lines"] = std::move(o.lines);
    event.erase("scatter");

    const auto dir = options_.data_dir / "events";
    const auto file = dir / (id + ".json");
    std::lock_guard lock(events_mutex_);
    if (std::filesystem::exists(file)) return {200, io::read_text(file)};
    std::filesystem::create_directories(dir);
    const std::string text = event.dump() + "\n";
    io::write_text(file, text);
    return {201, text};
}

Response Service::get_event(const std::string& id) {
    if (!safe_id(id)) return error_reply(404, "unknown event " + id, 0);
    const auto file = options_.data_dir / "events" / (id + ".json");
    std::lock_guard lock(events_mutex_);
    if (!std::filesystem::exists(file)) return error_reply(404, "unknown event " + id, 0);
    return {200, io::read_text(file)};
}

}  // namespace markdown
