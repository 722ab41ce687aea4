#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace markdown {

/// Currency amount held exactly in minor units (pence, cents).
struct Money {
    std::int64_t minor = 0;

    static Money from_major(double amount);
    double major() const noexcept { return static_cast<double>(minor) / 100.0; }

    friend auto operator<=>(const Money&, const Money&) = default;
};

using Covariates = std::map<std::string, double>;

struct Product {
    std::string id;
    Money full_price;
    std::int64_t stock_units = 0;
    std::int64_t sold_units = 0;
    std::string group;
    Money unit_cost;
    Covariates covariates;

    double price() const noexcept { return full_price.major(); }
    double cost() const noexcept { return unit_cost.major(); }
    /// Full-price value of the stock on hand, f_p * k_p.
    double stock_value() const noexcept { return price() * static_cast<double>(stock_units); }
};

/// Products offered in one period. Ids are unique; immutable once built.
class Catalogue {
public:
    Catalogue() = default;
    Catalogue(int period, std::vector<Product> products);

    int period() const noexcept { return period_; }
    std::size_t size() const noexcept { return products_.size(); }
    bool empty() const noexcept { return products_.empty(); }

    const std::vector<Product>& products() const noexcept { return products_; }
    auto begin() const noexcept { return products_.begin(); }
    auto end() const noexcept { return products_.end(); }
    const Product& operator[](std::size_t i) const { return products_[i]; }

    const Product* find(const std::string& id) const;
    const Product& at(const std::string& id) const;
    std::optional<std::size_t> index_of(const std::string& id) const;

    /// Sorted list of distinct group identifiers.
    std::vector<std::string> groups() const;

    /// Copy with the given ids removed. Unknown ids are ignored.
    Catalogue without(const std::set<std::string>& ids) const;
    Catalogue only(const std::set<std::string>& ids) const;

    /// Non-fatal data quality notes produced at construction (e.g. cost above price).
    const std::vector<std::string>& warnings() const noexcept { return warnings_; }

private:
    int period_ = 0;
    std::vector<Product> products_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::string> warnings_;
};

/// Discretized, strictly increasing discount depths in [0, 1].
class DepthSet {
public:
    static constexpr double kTolerance = 1e-9;

    DepthSet() = default;
    explicit DepthSet(std::vector<double> depths);
    /// Grid start, start+step, ... up to and including stop (within tolerance).
    static DepthSet range(double start, double stop, double step);

    const std::vector<double>& values() const noexcept { return depths_; }
    std::size_t size() const noexcept { return depths_.size(); }
    bool empty() const noexcept { return depths_.empty(); }
    auto begin() const noexcept { return depths_.begin(); }
    auto end() const noexcept { return depths_.end(); }

    bool contains(double depth) const;
    /// Grid value within kTolerance of `depth`, if any.
    std::optional<double> match(double depth) const;
    /// Grid value closest to `depth`; ties resolve to the shallower value.
    double nearest(double depth) const;

    DepthSet intersect(const DepthSet& other) const;

    friend bool operator==(const DepthSet&, const DepthSet&) = default;

private:
    std::vector<double> depths_;
};

/// Product id -> depth in (0, 1]. A product is in the event iff it has an entry.
class Assignment {
public:
    using Map = std::map<std::string, double>;

    Assignment() = default;
    explicit Assignment(Map entries);

    void set(const std::string& id, double depth);
    bool erase(const std::string& id) { return entries_.erase(id) > 0; }
    bool contains(const std::string& id) const { return entries_.count(id) > 0; }
    std::optional<double> depth(const std::string& id) const;

    const Map& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    auto begin() const noexcept { return entries_.begin(); }
    auto end() const noexcept { return entries_.end(); }

    /// Throws InvalidArgument naming the first id not present in `catalogue`.
    void validate(const Catalogue& catalogue) const;

    friend bool operator==(const Assignment&, const Assignment&) = default;

private:
    Map entries_;
};

/// Weeks of stock at the current sell rate. +inf for zero-sellers, 0 with no stock.
double cover(const Product& product) noexcept;

double stock_value(std::span<const Product> products) noexcept;
double stock_value(const Assignment& assignment, const Catalogue& catalogue);

/// Stock-weighted mean depth of the assigned products.
/// Throws InvalidArgument("undefined stock depth") when the assignment carries no stock value.
double stock_depth(const Assignment& assignment, const Catalogue& catalogue);

}  // namespace markdown
