#include "markdown/demand.hpp"

#include "csv.hpp"
#include "markdown/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <unordered_map>

namespace markdown {

namespace {

constexpr double kWeeksPerYear = 52.0;

double season_sin(int week) { return std::sin(2.0 * std::numbers::pi * week / kWeeksPerYear); }
double season_cos(int week) { return std::cos(2.0 * std::numbers::pi * week / kWeeksPerYear); }

/// Dense feature rows for records, built from each product's static covariates.
class FeatureLayout {
public:
    FeatureLayout(std::vector<std::string> names, const Catalogue& catalogue)
        : names_(std::move(names)), period_(catalogue.period()) {
        for (std::size_t j = 0; j < names_.size(); ++j) {
            if (names_[j] == features::kSeasonSin) sin_ = static_cast<int>(j);
            if (names_[j] == features::kSeasonCos) cos_ = static_cast<int>(j);
            if (names_[j] == features::kWeeksOnSite) age_ = static_cast<int>(j);
        }
        rows_.reserve(catalogue.size());
        for (std::size_t i = 0; i < catalogue.size(); ++i) {
            const Product& p = catalogue[i];
            Eigen::VectorXd row(names_.size());
            for (std::size_t j = 0; j < names_.size(); ++j) {
                auto it = p.covariates.find(names_[j]);
                if (it == p.covariates.end())
                    throw InvalidArgument("product " + p.id + " lacks covariate " + names_[j]);
                row[static_cast<Eigen::Index>(j)] = it->second;
            }
            rows_.emplace(p.id, std::move(row));
        }
    }

    std::size_t size() const noexcept { return names_.size(); }

    void fill(const std::string& product_id, int week, Eigen::Ref<Eigen::VectorXd> out) const {
        auto it = rows_.find(product_id);
        if (it == rows_.end()) throw InvalidArgument("training record for unknown product " + product_id);
        out = it->second;
        if (sin_ >= 0) out[sin_] = season_sin(week);
        if (cos_ >= 0) out[cos_] = season_cos(week);
        if (age_ >= 0) out[age_] -= static_cast<double>(period_ - week);
    }

private:
    std::vector<std::string> names_;
    int period_;
    int sin_ = -1, cos_ = -1, age_ = -1;
    std::unordered_map<std::string, Eigen::VectorXd> rows_;
};

/// Ridge least squares on log(1 + sales) over standardized features, depth constrained >= 0.
BaselineModel::GroupFit fit_group(const std::vector<const TrainingRecord*>& records, const FeatureLayout& layout,
                                  double ridge, bool& degenerate) {
    const auto p = static_cast<Eigen::Index>(layout.size());
    const auto n = static_cast<double>(records.size());
    BaselineModel::GroupFit fit;
    fit.observations = records.size();

    Eigen::VectorXd x(p);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(p);
    std::set<double> depths;
    for (const TrainingRecord* r : records) {
        layout.fill(r->product_id, r->week, x);
        sum += x;
        sumsq += x.cwiseProduct(x);
        if (depths.size() < 2) depths.insert(r->depth);
    }
    fit.mean = sum / n;
    fit.scale = (sumsq / n - fit.mean.cwiseProduct(fit.mean)).cwiseMax(0.0).cwiseSqrt();
    for (Eigen::Index j = 0; j < p; ++j)
        if (!(fit.scale[j] > 1e-12)) fit.scale[j] = 1.0;
    degenerate = depths.size() < 2;

    // Design columns: intercept, standardized features, depth.
    const Eigen::Index dim = p + 2;
    Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd xty = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd z(dim);
    for (const TrainingRecord* r : records) {
        layout.fill(r->product_id, r->week, x);
        z[0] = 1.0;
        z.segment(1, p) = (x - fit.mean).cwiseQuotient(fit.scale);
        z[dim - 1] = r->depth;
        const double y = std::log1p(r->sales);
        xtx.selfadjointView<Eigen::Lower>().rankUpdate(z);
        xty += y * z;
    }
    xtx = xtx.selfadjointView<Eigen::Lower>();

    auto solve_with = [&](Eigen::Index cols) {
        Eigen::MatrixXd a = xtx.topLeftCorner(cols, cols);
        for (Eigen::Index j = 1; j < cols; ++j) a(j, j) += ridge * n;
        return Eigen::VectorXd(a.ldlt().solve(xty.head(cols)));
    };

    fit.coef = Eigen::VectorXd::Zero(dim);
    if (!degenerate) {
        Eigen::VectorXd full = solve_with(dim);
        if (full[dim - 1] >= 0.0) {
            fit.coef = full;
            return fit;
        }
        fit.depth_clamped = true;
    }
    fit.coef.head(dim - 1) = solve_with(dim - 1);
    return fit;
}

}  // namespace

Covariates covariates_at(const Product& product, int period, int week) {
    Covariates x = product.covariates;
    if (auto it = x.find(features::kSeasonSin); it != x.end()) it->second = season_sin(week);
    if (auto it = x.find(features::kSeasonCos); it != x.end()) it->second = season_cos(week);
    if (auto it = x.find(features::kWeeksOnSite); it != x.end()) it->second -= static_cast<double>(period - week);
    return x;
}

BaselineModel::BaselineModel(std::vector<std::string> features, std::map<std::string, GroupFit> groups, GroupFit pooled,
                             std::map<std::string, std::string> product_groups, std::vector<std::string> warnings,
                             int first_week, int last_week)
    : features_(std::move(features)), groups_(std::move(groups)), pooled_(std::move(pooled)),
      product_groups_(std::move(product_groups)), warnings_(std::move(warnings)), first_week_(first_week),
      last_week_(last_week) {}

const BaselineModel::GroupFit& BaselineModel::fit_for(const std::string& product_id) const {
    auto pg = product_groups_.find(product_id);
    if (pg != product_groups_.end()) {
        auto g = groups_.find(pg->second);
        if (g != groups_.end()) return g->second;
    }
    return pooled_;
}

double BaselineModel::predict(const std::string& product_id, const Covariates& x, double depth) const {
    const GroupFit& fit = fit_for(product_id);
    const auto p = static_cast<Eigen::Index>(features_.size());
    double eta = fit.coef[0] + fit.coef[p + 1] * depth;
    for (Eigen::Index j = 0; j < p; ++j) {
        auto it = x.find(features_[static_cast<std::size_t>(j)]);
        if (it == x.end()) throw InvalidArgument("missing covariate " + features_[static_cast<std::size_t>(j)]);
        eta += fit.coef[j + 1] * (it->second - fit.mean[j]) / fit.scale[j];
    }
    return std::max(0.0, std::expm1(eta));
}

double BaselineModel::depth_coefficient(const std::string& group) const {
    auto g = groups_.find(group);
    const GroupFit& fit = g == groups_.end() ? pooled_ : g->second;
    return fit.coef[fit.coef.size() - 1];
}

BaselineModel fit_baseline(std::span<const TrainingRecord> records, const Catalogue& catalogue,
                           const FitOptions& options) {
    if (records.empty()) throw InvalidArgument("cannot fit a demand model without training records");

    std::vector<std::string> names = options.features;
    if (names.empty()) {
        std::set<std::string> seen;
        for (const auto& p : catalogue)
            for (const auto& [k, v] : p.covariates) seen.insert(k);
        names.assign(seen.begin(), seen.end());
    }
    const FeatureLayout layout(names, catalogue);

    std::map<std::string, std::vector<const TrainingRecord*>> by_group;
    std::vector<const TrainingRecord*> all;
    all.reserve(records.size());
    int first = records.front().week, last = records.front().week;
    for (const auto& r : records) {
        if (!(r.sales >= 0.0)) throw InvalidArgument("training record with negative sales for " + r.product_id);
        if (!(r.depth >= 0.0 && r.depth <= 1.0)) throw InvalidArgument("training record depth outside [0,1]");
        all.push_back(&r);
        if (options.per_group) by_group[catalogue.at(r.product_id).group].push_back(&r);
        first = std::min(first, r.week);
        last = std::max(last, r.week);
    }

    std::vector<std::string> warnings;
    bool degenerate = false;
    BaselineModel::GroupFit pooled = fit_group(all, layout, options.ridge, degenerate);
    if (degenerate && !options.per_group)
        warnings.push_back("single depth in training data: depth coefficient fixed at 0");

    std::map<std::string, BaselineModel::GroupFit> groups;
    for (const auto& [g, recs] : by_group) {
        groups.emplace(g, fit_group(recs, layout, options.ridge, degenerate));
        if (degenerate) warnings.push_back("group " + g + " has a single depth: depth coefficient fixed at 0");
    }

    std::map<std::string, std::string> product_groups;
    for (const auto& p : catalogue) product_groups.emplace(p.id, p.group);
    return BaselineModel(std::move(names), std::move(groups), std::move(pooled), std::move(product_groups),
                         std::move(warnings), first, last);
}

std::vector<TrainingRecord> winsorize_targets(std::span<const TrainingRecord> records, double upper_percentile) {
    if (records.empty()) throw InvalidArgument("winsorize_targets needs at least one record");
    if (!(upper_percentile > 0.0 && upper_percentile < 1.0))
        throw InvalidArgument("upper_percentile must lie in (0, 1)");

    // log1p is monotone, so the order statistic of sales is the order statistic of log-sales.
    std::vector<double> sales;
    sales.reserve(records.size());
    for (const auto& r : records) sales.push_back(r.sales);
    const auto n = static_cast<double>(sales.size());
    auto rank = static_cast<std::size_t>(std::ceil((1.0 - upper_percentile) * n - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, sales.size());
    std::nth_element(sales.begin(), sales.begin() + static_cast<std::ptrdiff_t>(rank - 1), sales.end());
    const double cap = sales[rank - 1];

    std::vector<TrainingRecord> out(records.begin(), records.end());
    for (auto& r : out) r.sales = std::min(r.sales, cap);
    return out;
}

BaselineModel fit_winsorized(std::span<const TrainingRecord> records, const Catalogue& catalogue,
                             const FitOptions& options, double upper_percentile) {
    if (upper_percentile <= 0.0) return fit_baseline(records, catalogue, options);
    return fit_baseline(winsorize_targets(records, upper_percentile), catalogue, options);
}

std::vector<std::pair<double, double>> predict_curve(const DemandModel& model, const Product& product,
                                                     const DepthSet& grid) {
    std::vector<std::pair<double, double>> curve;
    curve.reserve(grid.size());
    for (double d : grid) curve.emplace_back(d, model.predict(product, d));
    return curve;
}

TableModel::TableModel(std::map<std::string, std::vector<std::pair<double, double>>> table) : table_(std::move(table)) {
    for (auto& [id, rows] : table_) {
        std::sort(rows.begin(), rows.end());
        for (const auto& [d, s] : rows)
            if (!std::isfinite(s) || s < 0.0)
                throw InvalidArgument("prediction for " + id + " must be finite and >= 0");
    }
}

TableModel TableModel::read_csv(std::istream& in) {
    csv::header(in, {"product_id", "depth", "expected_sales"});
    std::map<std::string, std::vector<std::pair<double, double>>> table;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto f = csv::split(line);
        if (f.size() != 3) throw ParseError("expected 3 fields", line_no);
        const double depth = csv::to_double(f[1], "depth", line_no);
        const double sales = csv::to_double(f[2], "expected_sales", line_no);
        if (sales < 0.0) throw ParseError("expected_sales must be >= 0", line_no);
        table[f[0]].emplace_back(depth, sales);
    }
    return TableModel(std::move(table));
}

double TableModel::predict(const std::string& product_id, const Covariates&, double depth) const {
    auto it = table_.find(product_id);
    if (it != table_.end())
        for (const auto& [d, s] : it->second)
            if (std::abs(d - depth) <= DepthSet::kTolerance) return s;
    throw InvalidArgument("no prediction for product " + product_id + " at depth " + std::to_string(depth));
}

}  // namespace markdown
