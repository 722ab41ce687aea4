#pragma once

#include "markdown/domain.hpp"

#include <Eigen/Dense>

#include <istream>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace markdown {

/// Names of the covariates the engine derives from the week number.
namespace features {
inline constexpr const char* kSeasonSin = "season_sin";
inline constexpr const char* kSeasonCos = "season_cos";
inline constexpr const char* kWeeksOnSite = "weeks_on_site";
inline constexpr const char* kPriceBand = "price_band";
inline constexpr const char* kVelocity = "velocity";
}  // namespace features

/// One observed product-week.
struct TrainingRecord {
    std::string product_id;
    int week = 0;
    double depth = 0.0;
    double sales = 0.0;

    friend bool operator==(const TrainingRecord&, const TrainingRecord&) = default;
};

/// Covariates of `product` at `week`, given a catalogue snapshot taken at `period`.
/// Season terms are recomputed from the week and weeks_on_site is shifted back; every
/// other covariate is treated as static.
Covariates covariates_at(const Product& product, int period, int week);

/// Expected weekly sales as a function of depth.
class DemandModel {
public:
    virtual ~DemandModel() = default;

    /// Expected units for one week. Finite and >= 0.
    virtual double predict(const std::string& product_id, const Covariates& x, double depth) const = 0;
    double predict(const Product& product, double depth) const { return predict(product.id, product.covariates, depth); }

    virtual std::string kind() const = 0;
    virtual std::vector<std::string> feature_names() const { return {}; }
};

/// Log-linear model fitted per group: log(1 + s) = b0 + b.x + beta_depth * d, beta_depth >= 0.
class BaselineModel : public DemandModel {
public:
    struct GroupFit {
        Eigen::VectorXd mean;   // feature centring
        Eigen::VectorXd scale;  // feature scaling
        Eigen::VectorXd coef;   // intercept, standardized features, depth (raw units)
        std::size_t observations = 0;
        bool depth_clamped = false;
    };

    BaselineModel(std::vector<std::string> features, std::map<std::string, GroupFit> groups, GroupFit pooled,
                  std::map<std::string, std::string> product_groups, std::vector<std::string> warnings,
                  int first_week, int last_week);

    using DemandModel::predict;
    double predict(const std::string& product_id, const Covariates& x, double depth) const override;
    std::string kind() const override { return "baseline"; }
    std::vector<std::string> feature_names() const override { return features_; }

    /// Fitted depth coefficient for a group (pooled fit when the group is unknown).
    double depth_coefficient(const std::string& group) const;
    const std::vector<std::string>& warnings() const noexcept { return warnings_; }
    int first_week() const noexcept { return first_week_; }
    int last_week() const noexcept { return last_week_; }
    const std::map<std::string, GroupFit>& group_fits() const noexcept { return groups_; }
    const GroupFit& pooled_fit() const noexcept { return pooled_; }
    const std::map<std::string, std::string>& product_groups() const noexcept { return product_groups_; }

private:
    const GroupFit& fit_for(const std::string& product_id) const;

    std::vector<std::string> features_;
    std::map<std::string, GroupFit> groups_;
    GroupFit pooled_;
    std::map<std::string, std::string> product_groups_;
    std::vector<std::string> warnings_;
    int first_week_ = 0;
    int last_week_ = 0;
};

struct FitOptions {
    /// Covariate names to use; empty means every covariate in the catalogue.
    std::vector<std::string> features;
    double ridge = 1e-4;
    bool per_group = true;
};

/// Fits the baseline learner. Record covariates are reconstructed from `catalogue` via covariates_at.
/// A group with fewer than two distinct depths gets a zero depth coefficient and a warning.
BaselineModel fit_baseline(std::span<const TrainingRecord> records, const Catalogue& catalogue,
                           const FitOptions& options = {});

/// Clamps log-sales above the (1 - upper_percentile) order statistic down to it. Order and count kept.
std::vector<TrainingRecord> winsorize_targets(std::span<const TrainingRecord> records,
                                              double upper_percentile = 0.005);

/// winsorize_targets then fit_baseline; `upper_percentile` 0 skips the clamp.
BaselineModel fit_winsorized(std::span<const TrainingRecord> records, const Catalogue& catalogue,
                             const FitOptions& options, double upper_percentile);

std::vector<std::pair<double, double>> predict_curve(const DemandModel& model, const Product& product,
                                                     const DepthSet& grid);

/// Externally produced predictions keyed by (product_id, depth). Lookups outside the table throw.
class TableModel : public DemandModel {
public:
    explicit TableModel(std::map<std::string, std::vector<std::pair<double, double>>> table);

    /// Delimited text with header product_id,depth,expected_sales.
    static TableModel read_csv(std::istream& in);

    using DemandModel::predict;
    double predict(const std::string& product_id, const Covariates& x, double depth) const override;
    std::string kind() const override { return "table"; }

private:
    std::map<std::string, std::vector<std::pair<double, double>>> table_;
};

}  // namespace markdown
