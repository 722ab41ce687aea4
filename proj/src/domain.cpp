#include "markdown/domain.hpp"

#include "markdown/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace markdown {

Money Money::from_major(double amount) {
    return Money{static_cast<std::int64_t>(std::llround(amount * 100.0))};
}

Catalogue::Catalogue(int period, std::vector<Product> products)
    : period_(period), products_(std::move(products)) {
    index_.reserve(products_.size());
    for (std::size_t i = 0; i < products_.size(); ++i) {
        const Product& p = products_[i];
        if (p.id.empty()) throw InvalidArgument("product with empty id");
        if (p.full_price.minor <= 0)
            throw InvalidArgument("product " + p.id + ": full_price must be > 0");
        if (p.stock_units < 0) throw InvalidArgument("product " + p.id + ": stock_units must be >= 0");
        if (p.sold_units < 0) throw InvalidArgument("product " + p.id + ": sold_units must be >= 0");
        if (p.unit_cost.minor < 0) throw InvalidArgument("product " + p.id + ": unit_cost must be >= 0");
        if (!index_.emplace(p.id, i).second) throw InvalidArgument("duplicate product id " + p.id);
        if (p.unit_cost > p.full_price)
            warnings_.push_back("product " + p.id + ": unit_cost exceeds full_price");
    }
}

const Product* Catalogue::find(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &products_[it->second];
}

const Product& Catalogue::at(const std::string& id) const {
    if (const Product* p = find(id)) return *p;
    throw InvalidArgument("unknown product id " + id);
}

std::optional<std::size_t> Catalogue::index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::string> Catalogue::groups() const {
    std::set<std::string> seen;
    for (const auto& p : products_) seen.insert(p.group);
    return {seen.begin(), seen.end()};
}

Catalogue Catalogue::without(const std::set<std::string>& ids) const {
    std::vector<Product> kept;
    kept.reserve(products_.size());
    for (const auto& p : products_)
        if (!ids.count(p.id)) kept.push_back(p);
    return Catalogue(period_, std::move(kept));
}

Catalogue Catalogue::only(const std::set<std::string>& ids) const {
    std::vector<Product> kept;
    for (const auto& p : products_)
        if (ids.count(p.id)) kept.push_back(p);
    return Catalogue(period_, std::move(kept));
}

DepthSet::DepthSet(std::vector<double> depths) : depths_(std::move(depths)) {
    for (std::size_t i = 0; i < depths_.size(); ++i) {
        double d = depths_[i];
        if (!(d >= 0.0 && d <= 1.0)) throw InvalidArgument("depth outside [0,1]: " + std::to_string(d));
        if (i > 0 && !(d > depths_[i - 1])) throw InvalidArgument("depth set must be strictly increasing");
    }
}

DepthSet DepthSet::range(double start, double stop, double step) {
    if (!(step > 0.0)) throw InvalidArgument("depth grid step must be > 0");
    std::vector<double> v;
    for (int i = 0;; ++i) {
        // Built from the index so repeated addition does not drift off the grid.
        double d = start + step * i;
        if (d > stop + kTolerance) break;
        v.push_back(std::round(d * 1e9) / 1e9);
    }
    return DepthSet(std::move(v));
}

bool DepthSet::contains(double depth) const { return match(depth).has_value(); }

std::optional<double> DepthSet::match(double depth) const {
    for (double d : depths_)
        if (std::abs(d - depth) <= kTolerance) return d;
    return std::nullopt;
}

double DepthSet::nearest(double depth) const {
    if (depths_.empty()) throw InvalidArgument("nearest() on empty depth set");
    double best = depths_.front();
    for (double d : depths_)
        if (std::abs(d - depth) < std::abs(best - depth) - kTolerance) best = d;
    return best;
}

DepthSet DepthSet::intersect(const DepthSet& other) const {
    std::vector<double> v;
    for (double d : depths_)
        if (other.contains(d)) v.push_back(d);
    return DepthSet(std::move(v));
}

Assignment::Assignment(Map entries) {
    for (const auto& [id, d] : entries) set(id, d);
}

void Assignment::set(const std::string& id, double depth) {
    if (!(depth > 0.0 && depth <= 1.0))
        throw InvalidArgument("assigned depth must be in (0,1], got " + std::to_string(depth) + " for " + id);
    entries_[id] = depth;
}

std::optional<double> Assignment::depth(const std::string& id) const {
    auto it = entries_.find(id);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void Assignment::validate(const Catalogue& catalogue) const {
    for (const auto& [id, d] : entries_)
        if (!catalogue.find(id)) throw InvalidArgument("assignment references unknown product " + id);
}

double cover(const Product& product) noexcept {
    if (product.stock_units == 0) return 0.0;
    if (product.sold_units == 0) return std::numeric_limits<double>::infinity();
    return static_cast<double>(product.stock_units) / static_cast<double>(product.sold_units);
}

double stock_value(std::span<const Product> products) noexcept {
    double total = 0.0;
    for (const auto& p : products) total += p.stock_value();
    return total;
}

double stock_value(const Assignment& assignment, const Catalogue& catalogue) {
    double total = 0.0;
    for (const auto& [id, d] : assignment) total += catalogue.at(id).stock_value();
    return total;
}

double stock_depth(const Assignment& assignment, const Catalogue& catalogue) {
    double value = 0.0;
    double discounted = 0.0;
    for (const auto& [id, d] : assignment) {
        double v = catalogue.at(id).stock_value();
        value += v;
        discounted += (1.0 - d) * v;
    }
    if (!(value > 0.0)) throw InvalidArgument("undefined stock depth");
    return 1.0 - discounted / value;
}

}  // namespace markdown
