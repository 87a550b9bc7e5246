#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "rodd/coefficient_model.hpp"
#include "rodd/cube.hpp"
#include "rodd/errors.hpp"
#include "rodd/forest.hpp"
#include "rodd/stats.hpp"

namespace rodd {

/// The five cell-value estimators. S75/S60/S90 are trimmed-mean coefficient
/// models keeping the middle 75/60/90 percent of each view; Median uses the
/// view median; Rf is the bagged regression forest.
enum class EstimatorKind { S75, S60, S90, Median, Rf };

inline constexpr std::array<EstimatorKind, 5> kAllEstimators = {
    EstimatorKind::S75, EstimatorKind::S60, EstimatorKind::S90,
    EstimatorKind::Median, EstimatorKind::Rf};

inline std::string_view estimator_name(EstimatorKind kind) {
    switch (kind) {
        case EstimatorKind::S75: return "s75";
        case EstimatorKind::S60: return "s60";
        case EstimatorKind::S90: return "s90";
        case EstimatorKind::Median: return "median";
        case EstimatorKind::Rf: return "rf";
    }
    throw ConfigError("unknown estimator kind");
}

inline std::optional<EstimatorKind> parse_estimator(std::string_view name) {
    if (name == "s75") return EstimatorKind::S75;
    if (name == "s60") return EstimatorKind::S60;
    if (name == "s90") return EstimatorKind::S90;
    if (name == "median") return EstimatorKind::Median;
    if (name == "rf") return EstimatorKind::Rf;
    return std::nullopt;
}

/// Fraction trimmed from each tail so that a 1 - 2f core remains: keeping
/// 75% trims 0.125 per side, 90% trims 0.05, 60% trims 0.20.
inline double trim_fraction_for(EstimatorKind kind) {
    switch (kind) {
        case EstimatorKind::S75: return 0.125;
        case EstimatorKind::S60: return 0.20;
        case EstimatorKind::S90: return 0.05;
        default: throw ConfigError("estimator has no trim fraction");
    }
}

inline Aggregator aggregator_for(EstimatorKind kind) {
    if (kind == EstimatorKind::Median) return Aggregator::median_of();
    return Aggregator::trimmed(trim_fraction_for(kind));
}

/// A trained estimator of either family behind one predict interface.
class FittedEstimator {
public:
    FittedEstimator(EstimatorKind kind, CoefficientTable table)
        : kind_(kind), model_(std::move(table)) {}
    FittedEstimator(EstimatorKind kind, Forest forest)
        : kind_(kind), model_(std::move(forest)) {}

    EstimatorKind kind() const noexcept { return kind_; }

    double predict_log(const Coordinate& coord) const {
        return std::visit([&](const auto& m) { return m.predict_log(coord); }, model_);
    }

    double predict(const Coordinate& coord) const {
        return std::visit([&](const auto& m) { return m.predict(coord); }, model_);
    }

    const CoefficientTable* coefficients() const noexcept {
        return std::get_if<CoefficientTable>(&model_);
    }
    const Forest* forest() const noexcept { return std::get_if<Forest>(&model_); }

private:
    EstimatorKind kind_;
    std::variant<CoefficientTable, Forest> model_;
};

/// Fits the requested estimator. forest_params only matters for Rf; the
/// other kinds are closed-form given the cube.
inline FittedEstimator fit_estimator(const DataCube& cube, EstimatorKind kind,
                                     const ForestParams& forest_params,
                                     unsigned threads = 1) {
    if (kind == EstimatorKind::Rf)
        return FittedEstimator(kind, fit_forest(cube, forest_params, threads));
    return FittedEstimator(kind, fit_coefficients(cube, aggregator_for(kind)));
}

inline FittedEstimator fit_estimator(const DataCube& cube, EstimatorKind kind) {
    return fit_estimator(cube, kind, ForestParams::desk_defaults(0), 1);
}

}  // namespace rodd
