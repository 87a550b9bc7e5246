#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "rodd/csv.hpp"
#include "rodd/cube.hpp"
#include "rodd/errors.hpp"
#include "rodd/estimators.hpp"

namespace rodd {

inline constexpr double kDefaultTau = 2.5;

inline constexpr double kRhoBracketLo = 0.0;
inline constexpr double kRhoBracketHi = 4.0;
inline constexpr double kRhoMin = -16.0;
inline constexpr double kRhoMax = 16.0;
inline constexpr double kRhoIntervalTol = 1e-10;
inline constexpr double kRhoResidualRelTol = 1e-8;

struct RhoPair {
    double y = 0.0;
    double y_hat = 0.0;
};

struct RhoEstimate {
    double rho = 0.0;
    double residual = 0.0;  // objective value at rho
    double bracket_lo = 0.0;
    double bracket_hi = 0.0;
    bool converged = false;
};

/// The maximum-likelihood condition for the variance exponent, read in
/// factored form: F(rho) = sum log(y_hat) * [ (y - y_hat)^2 / y_hat^rho - 1 ].
/// Pairs with y_hat = 1 contribute nothing and are skipped.
inline double rho_objective(std::span<const RhoPair> pairs, double rho) {
    double f = 0.0;
    for (const auto& [y, y_hat] : pairs) {
        if (!(y_hat > 0.0))
            throw NonPositiveEstimate("rho objective requires strictly positive estimates");
        const double log_hat = std::log(y_hat);
        if (log_hat == 0.0) continue;
        const double r = y - y_hat;
        f += log_hat * (r * r / std::pow(y_hat, rho) - 1.0);
    }
    return f;
}

/// Solves F(rho) = 0 by bracketing and bisection. The bracket starts at
/// [0, 4] and doubles outward, clamped to [-16, 16]; bisection stops once
/// the interval is narrower than 1e-10. Without a sign change the estimate
/// clamps to the endpoint with the smaller |F| and reports converged=false.
inline RhoEstimate solve_rho(std::span<const RhoPair> pairs) {
    if (pairs.empty()) throw EmptyInput("rho fit received no pairs");

    double scale = 0.0;
    std::size_t contributing = 0;
    for (const auto& [y, y_hat] : pairs) {
        if (!(y_hat > 0.0))
            throw NonPositiveEstimate("rho fit requires strictly positive estimates");
        const double log_hat = std::log(y_hat);
        if (log_hat == 0.0) continue;
        scale += std::abs(log_hat);
        ++contributing;
    }
    if (contributing == 0)
        throw NoValidPairs("every estimate equals 1, so the variance exponent is unconstrained");

    const auto objective = [&](double rho) { return rho_objective(pairs, rho); };
    const double tol = kRhoResidualRelTol * scale;

    double lo = kRhoBracketLo, hi = kRhoBracketHi;
    double flo = objective(lo), fhi = objective(hi);
    while (flo * fhi > 0.0 && (lo > kRhoMin || hi < kRhoMax)) {
        const double width = hi - lo;
        lo = std::max(kRhoMin, lo - width);
        hi = std::min(kRhoMax, hi + width);
        flo = objective(lo);
        fhi = objective(hi);
    }

    RhoEstimate est;
    est.bracket_lo = lo;
    est.bracket_hi = hi;

    if (flo == 0.0) {
        est.rho = lo;
        est.residual = 0.0;
        est.converged = true;
        return est;
    }
    if (fhi == 0.0) {
        est.rho = hi;
        est.residual = 0.0;
        est.converged = true;
        return est;
    }
    if (std::signbit(flo) == std::signbit(fhi)) {
        const bool pick_lo = std::abs(flo) <= std::abs(fhi);
        est.rho = pick_lo ? lo : hi;
        est.residual = pick_lo ? flo : fhi;
        est.converged = false;
        return est;
    }

    double a = lo, fa = flo, b = hi;
    while (b - a > kRhoIntervalTol) {
        const double mid = 0.5 * (a + b);
        const double fm = objective(mid);
        if (fm == 0.0) {
            a = b = mid;
            break;
        }
        if (std::signbit(fm) == std::signbit(fa)) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    est.rho = 0.5 * (a + b);
    est.residual = objective(est.rho);
    est.converged = std::abs(est.residual) <= tol;
    return est;
}

inline RhoEstimate solve_rho(std::span<const double> y, std::span<const double> y_hat) {
    if (y.size() != y_hat.size())
        throw ConfigError("rho fit needs matching y and y_hat lengths");
    std::vector<RhoPair> pairs(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) pairs[i] = {y[i], y_hat[i]};
    return solve_rho(pairs);
}

/// Dispersion under the power model sigma^2 = y_hat^rho, floored so raw
/// scores stay finite when y_hat^rho underflows.
inline double sigma(double y_hat, double rho) {
    if (!(y_hat > 0.0))
        throw NonPositiveEstimate("sigma requires a strictly positive estimate");
    return std::max(std::pow(y_hat, 0.5 * rho), 1e-12);
}

/// Normalized residual and its thresholded excess.
inline std::pair<double, double> selfexp(double y, double y_hat, double sig, double tau) {
    if (!(sig > 0.0)) throw ConfigError("selfexp requires sigma > 0");
    if (tau < 0.0) throw ConfigError("selfexp requires tau >= 0");
    const double raw = std::abs(y - y_hat) / sig;
    return {raw, std::max(raw - tau, 0.0)};
}

struct ScoreRecord {
    Coordinate coord;
    double y = 0.0;
    double y_hat = 0.0;
    double sigma = 0.0;
    double raw_score = 0.0;
    double selfexp = 0.0;
    bool is_outlier = false;
};

struct DetectionResult {
    EstimatorKind estimator = EstimatorKind::S75;
    double tau = kDefaultTau;
    RhoEstimate rho;
    std::vector<Dimension> dimensions;
    std::vector<ScoreRecord> records;
};

/// End-to-end scoring: in-sample predictions for every cell, one global
/// rho fit, then one record per cell in coordinate order.
inline DetectionResult detect(const DataCube& cube, const FittedEstimator& estimator,
                              double tau = kDefaultTau) {
    if (tau < 0.0) throw ConfigError("tau must be non-negative");
    if (cube.empty()) throw EmptyCube("cannot score an empty cube");

    DetectionResult result;
    result.estimator = estimator.kind();
    result.tau = tau;
    result.dimensions = cube.dimensions();

    std::vector<RhoPair> pairs;
    pairs.reserve(cube.size());
    for (const auto& cell : cube.cells())
        pairs.push_back({cell.measure, estimator.predict(cell.coord)});

    result.rho = solve_rho(pairs);

    result.records.reserve(cube.size());
    for (std::size_t i = 0; i < cube.size(); ++i) {
        const auto& cell = cube.cells()[i];
        ScoreRecord rec;
        rec.coord = cell.coord;
        rec.y = cell.measure;
        rec.y_hat = pairs[i].y_hat;
        rec.sigma = sigma(rec.y_hat, result.rho.rho);
        const auto [raw, value] = selfexp(rec.y, rec.y_hat, rec.sigma, tau);
        rec.raw_score = raw;
        rec.selfexp = value;
        rec.is_outlier = raw > tau;
        result.records.push_back(rec);
    }
    return result;
}

/// Columns: one per dimension (by name), then y, y_hat, sigma, raw_score,
/// selfexp, is_outlier (0/1). Rows follow the cube's coordinate order.
inline void write_scores_csv(std::ostream& out, const DetectionResult& result) {
    const auto& dims = result.dimensions;
    for (const auto& d : dims) out << csv_escape(d.name, ',') << ',';
    out << "y,y_hat,sigma,raw_score,selfexp,is_outlier\n";
    for (const auto& rec : result.records) {
        for (std::size_t d = 0; d < dims.size(); ++d)
            out << csv_escape(dims[d].categories[rec.coord.indices[d]], ',') << ',';
        out << format_double(rec.y) << ',' << format_double(rec.y_hat) << ','
            << format_double(rec.sigma) << ',' << format_double(rec.raw_score) << ','
            << format_double(rec.selfexp) << ',' << (rec.is_outlier ? '1' : '0') << '\n';
    }
}

/// JSON form carries run metadata alongside the records; seed is included
/// when the caller used one (the forest estimator).
inline nlohmann::json scores_to_json(const DetectionResult& result,
                                     std::optional<std::uint64_t> seed = std::nullopt) {
    nlohmann::json meta{
        {"estimator", std::string(estimator_name(result.estimator))},
        {"tau", result.tau},
        {"rho",
         {{"value", result.rho.rho},
          {"residual", result.rho.residual},
          {"bracket", {result.rho.bracket_lo, result.rho.bracket_hi}},
          {"converged", result.rho.converged}}},
    };
    if (seed) meta["seed"] = *seed;

    nlohmann::json records = nlohmann::json::array();
    for (const auto& rec : result.records) {
        nlohmann::json coord = nlohmann::json::object();
        for (std::size_t d = 0; d < result.dimensions.size(); ++d)
            coord[result.dimensions[d].name] =
                result.dimensions[d].categories[rec.coord.indices[d]];
        records.push_back({{"coord", std::move(coord)},
                           {"y", rec.y},
                           {"y_hat", rec.y_hat},
                           {"sigma", rec.sigma},
                           {"raw_score", rec.raw_score},
                           {"selfexp", rec.selfexp},
                           {"is_outlier", rec.is_outlier}});
    }
    return nlohmann::json{{"meta", std::move(meta)}, {"records", std::move(records)}};
}

}  // namespace rodd
