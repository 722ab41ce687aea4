#pragma once

#include "markdown/demand.hpp"
#include "markdown/domain.hpp"
#include "markdown/io.hpp"
#include "markdown/validation.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

namespace markdown {

inline constexpr const char* kEngineVersion = "0.1.0";

/// Content address of a catalogue and its history: "cat-" and 16 hex digits.
std::string catalogue_id(const Catalogue& catalogue, std::span<const TrainingRecord> history);
/// Product counts, stock value, cover quantiles and per-group totals.
io::json catalogue_summary(const Catalogue& catalogue);

struct ServiceOptions {
    /// Events are written to <data_dir>/events/<event id>.json.
    std::filesystem::path data_dir = "data";
    /// Fitting and backtest settings used when a catalogue arrives with history.
    io::RunConfig defaults;
    /// Served by GET /feasible-region when no catalogue is named.
    std::optional<FeasibleRegion> region;
};

struct Response {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
};

/// Request handling without the transport. Safe to call from several threads.
class Service {
public:
    explicit Service(ServiceOptions options);

    /// `target` is the request path, optionally with a query string.
    Response handle(const std::string& method, const std::string& target, const std::string& body);

    /// Registers a catalogue (and optional history) and returns its content id.
    std::string ingest(Catalogue catalogue, std::vector<TrainingRecord> history = {}, bool* created = nullptr);

private:
    struct Entry {
        Catalogue catalogue;
        std::size_t history_records = 0;
        std::optional<BaselineModel> model;
        std::optional<FeasibleRegion> region;
    };

    struct Outcome {
        io::json document;
        bool converged = false;
        io::json lines;
    };

    Response post_catalogue(const std::string& body);
    Response get_summary(const std::string& id);
    Response get_region(const std::map<std::string, std::string>& query);
    Response post_whatif(const std::string& body);
    Response post_event(const std::string& body);
    Response get_event(const std::string& id);

    std::shared_ptr<const Entry> find(const std::string& id) const;
    Outcome evaluate(const io::json& request, std::uint64_t& seed) const;

    ServiceOptions options_;
    mutable std::shared_mutex catalogues_mutex_;
    std::map<std::string, std::shared_ptr<const Entry>> catalogues_;
    std::mutex events_mutex_;
};

/// Binds the service to host:port and blocks until the process is stopped.
void serve(Service& service, const std::string& host, int port);

}  // namespace markdown
