#pragma once

#include <cmath>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rodd/csv.hpp"
#include "rodd/cube.hpp"
#include "rodd/errors.hpp"
#include "rodd/stats.hpp"

namespace rodd {

/// Robust location estimate used for the model coefficients: a trimmed mean
/// or the median.
struct Aggregator {
    enum class Kind { TrimmedMean, Median };

    Kind kind = Kind::TrimmedMean;
    TrimSpec trim{};

    static Aggregator trimmed(double trim_fraction) {
        return Aggregator{Kind::TrimmedMean, TrimSpec{trim_fraction}};
    }
    static Aggregator median_of() { return Aggregator{Kind::Median, TrimSpec{}}; }

    double operator()(std::span<const double> values) const {
        if (kind == Kind::Median) return median(values);
        return trimmed_mean(values, trim);
    }
};

/// The fitted log-scale effect gamma(p') for every projection with a
/// non-empty view. Summing the effects over all projections of a coordinate
/// gives the log estimate for that cell.
class CoefficientTable {
public:
    CoefficientTable(std::vector<Dimension> dims,
                     std::unordered_map<Projection, double, ProjectionHash> gamma)
        : dims_(std::move(dims)), gamma_(std::move(gamma)) {}

    const std::vector<Dimension>& dimensions() const noexcept { return dims_; }
    std::size_t size() const noexcept { return gamma_.size(); }

    std::optional<double> gamma(const Projection& proj) const {
        auto it = gamma_.find(proj);
        if (it == gamma_.end()) return std::nullopt;
        return it->second;
    }

    /// Sum of effects over all projections of the coordinate; projections
    /// never seen during fitting contribute 0.
    double predict_log(const Coordinate& coord) const {
        double total = 0.0;
        for (const auto& proj : enumerate_projections(coord)) {
            auto it = gamma_.find(proj);
            if (it != gamma_.end()) total += it->second;
        }
        return total;
    }

    double predict(const Coordinate& coord) const { return std::exp(predict_log(coord)); }

    /// False when no projection of the coordinate has an entry, in which
    /// case predict() degenerates to exp(0) = 1.
    bool covers(const Coordinate& coord) const {
        for (const auto& proj : enumerate_projections(coord))
            if (gamma_.contains(proj)) return true;
        return false;
    }

    /// Entries in canonical order: cardinality ascending, then fixed
    /// positions, then category indices.
    std::vector<std::pair<Projection, double>> sorted_entries() const {
        std::vector<std::pair<Projection, double>> out(gamma_.begin(), gamma_.end());
        std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
            if (a.first.cardinality() != b.first.cardinality())
                return a.first.cardinality() < b.first.cardinality();
            return a.first < b.first;
        });
        return out;
    }

    std::string describe(const Projection& proj) const {
        if (proj.empty()) return "()";
        std::string out;
        for (const auto& [pos, idx] : proj.fixed()) {
            if (!out.empty()) out += '|';
            out += dims_[pos].name + "=" + dims_[pos].categories[idx];
        }
        return out;
    }

    void write_csv(std::ostream& out) const {
        out << "projection,gamma\n";
        for (const auto& [proj, value] : sorted_entries())
            out << csv_escape(describe(proj), ',') << ',' << format_double(value) << '\n';
    }

private:
    std::vector<Dimension> dims_;
    std::unordered_map<Projection, double, ProjectionHash> gamma_;
};

/// Fits the effect table level by level: for each projection, the aggregated
/// log measure over its view minus all coarser effects already fitted.
/// Requires strictly positive measures.
inline CoefficientTable fit_coefficients(const DataCube& cube, const Aggregator& aggregator) {
    if (cube.empty()) throw EmptyCube("cannot fit coefficients on an empty cube");
    for (const auto& cell : cube.cells())
        if (!(cell.measure > 0.0))
            throw NonPositiveMeasure("measure " + format_double(cell.measure) + " at " +
                                     cube.describe(cell.coord) +
                                     " is not strictly positive; the model works on log values");

    const std::size_t n = cube.dim_count();
    std::vector<double> logs;
    logs.reserve(cube.size());
    for (const auto& cell : cube.cells()) logs.push_back(std::log(cell.measure));

    std::unordered_map<Projection, double, ProjectionHash> gamma;
    // Subsets arrive in ascending cardinality, so all strict sub-projections
    // of the current level are already in the table.
    for (const auto& positions : enumerate_position_subsets(n)) {
        std::unordered_map<Projection, std::vector<double>, ProjectionHash> views;
        for (std::size_t i = 0; i < cube.size(); ++i) {
            Projection key = Projection::of(cube.cells()[i].coord, positions);
            views[std::move(key)].push_back(logs[i]);
        }
        for (auto& [proj, members] : views) {
            double effect = aggregator(members);
            const auto& pairs = proj.fixed();
            // strict sub-projections = restrictions to strict subsets of the
            // fixed pairs, the empty projection included
            for (const auto& sub : enumerate_position_subsets(pairs.size())) {
                Projection::Fixed fixed;
                fixed.reserve(sub.size());
                for (std::uint32_t si : sub) fixed.push_back(pairs[si]);
                auto it = gamma.find(Projection(std::move(fixed)));
                if (it != gamma.end()) effect -= it->second;
            }
            gamma.emplace(proj, effect);
        }
    }
    return CoefficientTable(std::vector<Dimension>(cube.dimensions()), std::move(gamma));
}

}  // namespace rodd
