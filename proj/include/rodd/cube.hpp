#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rodd/errors.hpp"

namespace rodd {

using CategoryIndex = std::uint32_t;

/// One categorical axis of a cube: a name plus an ordered list of distinct
/// category labels.
struct Dimension {
    std::string name;
    std::vector<std::string> categories;

    void validate() const {
        if (categories.empty())
            throw ConfigError("dimension '" + name + "' has no categories");
        std::vector<std::string> sorted = categories;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw ConfigError("dimension '" + name + "' has duplicate category labels");
    }

    std::optional<CategoryIndex> index_of(const std::string& label) const {
        for (std::size_t i = 0; i < categories.size(); ++i)
            if (categories[i] == label) return static_cast<CategoryIndex>(i);
        return std::nullopt;
    }
};

/// Position of a cell: one category index per dimension of the owning cube.
struct Coordinate {
    std::vector<CategoryIndex> indices;

    auto operator<=>(const Coordinate&) const = default;
};

struct CoordinateHash {
    std::size_t operator()(const Coordinate& c) const noexcept {
        std::size_t h = 0xcbf29ce484222325ULL;
        for (CategoryIndex i : c.indices) {
            h ^= i;
            h *= 0x100000001b3ULL;
        }
        return h;
    }
};

struct Cell {
    Coordinate coord;
    double measure = 0.0;
};

/// A coordinate restricted to a strict subset of the dimensions. The empty
/// projection (nothing fixed) is valid and matches every cell.
class Projection {
public:
    using Fixed = std::vector<std::pair<std::uint32_t, CategoryIndex>>;

    Projection() = default;

    explicit Projection(Fixed fixed) : fixed_(std::move(fixed)) {
        std::sort(fixed_.begin(), fixed_.end());
        for (std::size_t i = 1; i < fixed_.size(); ++i)
            if (fixed_[i].first == fixed_[i - 1].first)
                throw ConfigError("projection fixes dimension " +
                                  std::to_string(fixed_[i].first) + " twice");
    }

    /// Restriction of `coord` to the given dimension positions.
    static Projection of(const Coordinate& coord, std::span<const std::uint32_t> positions) {
        Fixed fixed;
        fixed.reserve(positions.size());
        for (std::uint32_t pos : positions)
            fixed.emplace_back(pos, coord.indices.at(pos));
        return Projection(std::move(fixed));
    }

    const Fixed& fixed() const noexcept { return fixed_; }
    std::size_t cardinality() const noexcept { return fixed_.size(); }
    bool empty() const noexcept { return fixed_.empty(); }

    bool matches(const Coordinate& coord) const {
        for (const auto& [pos, idx] : fixed_)
            if (coord.indices[pos] != idx) return false;
        return true;
    }

    auto operator<=>(const Projection&) const = default;

private:
    Fixed fixed_;
};

struct ProjectionHash {
    std::size_t operator()(const Projection& p) const noexcept {
        std::size_t h = 0x811c9dc5u;
        for (const auto& [pos, idx] : p.fixed()) {
            h = (h ^ (pos + 1)) * 0x01000193u;
            h = (h ^ (idx + 0x9e3779b9u)) * 0x01000193u;
        }
        return h;
    }
};

/// A record as it appears in a CSV row: one label per dimension plus the
/// measure.
struct Record {
    std::vector<std::string> labels;
    double measure = 0.0;
};

/// Immutable sparse map from coordinates to a numeric measure. Cells are
/// held sorted by coordinate, so every traversal is deterministic. Safe for
/// unrestricted concurrent reads once constructed.
class DataCube {
public:
    DataCube(std::vector<Dimension> dimensions, std::vector<Cell> cells)
        : dims_(std::move(dimensions)), cells_(std::move(cells)) {
        for (const auto& d : dims_) d.validate();
        for (const auto& cell : cells_) validate_coordinate(cell.coord);
        std::sort(cells_.begin(), cells_.end(),
                  [](const Cell& a, const Cell& b) { return a.coord < b.coord; });
        for (std::size_t i = 1; i < cells_.size(); ++i)
            if (cells_[i].coord == cells_[i - 1].coord)
                throw DuplicateCell("duplicate cell at " + describe(cells_[i].coord));
    }

    const std::vector<Dimension>& dimensions() const noexcept { return dims_; }
    std::size_t dim_count() const noexcept { return dims_.size(); }
    const std::vector<Cell>& cells() const noexcept { return cells_; }
    std::size_t size() const noexcept { return cells_.size(); }
    bool empty() const noexcept { return cells_.empty(); }

    std::optional<double> value_at(const Coordinate& coord) const {
        auto it = std::lower_bound(cells_.begin(), cells_.end(), coord,
                                   [](const Cell& c, const Coordinate& k) { return c.coord < k; });
        if (it != cells_.end() && it->coord == coord) return it->measure;
        return std::nullopt;
    }

    void validate_coordinate(const Coordinate& coord) const {
        if (coord.indices.size() != dims_.size())
            throw ArityMismatch("coordinate has " + std::to_string(coord.indices.size()) +
                                " indices, cube has " + std::to_string(dims_.size()) +
                                " dimensions");
        for (std::size_t d = 0; d < dims_.size(); ++d)
            if (coord.indices[d] >= dims_[d].categories.size())
                throw UnknownCategory("index " + std::to_string(coord.indices[d]) +
                                      " out of range for dimension '" + dims_[d].name + "'");
    }

    std::string describe(const Coordinate& coord) const {
        std::string out = "(";
        for (std::size_t d = 0; d < coord.indices.size(); ++d) {
            if (d > 0) out += ", ";
            out += dims_[d].categories[coord.indices[d]];
        }
        return out + ")";
    }

    /// Label-level export; build_cube(records(), dimensions()) reproduces the
    /// cube exactly.
    std::vector<Record> records() const {
        std::vector<Record> out;
        out.reserve(cells_.size());
        for (const auto& cell : cells_) {
            Record rec;
            rec.labels.reserve(dims_.size());
            for (std::size_t d = 0; d < dims_.size(); ++d)
                rec.labels.push_back(dims_[d].categories[cell.coord.indices[d]]);
            rec.measure = cell.measure;
            out.push_back(std::move(rec));
        }
        return out;
    }

private:
    std::vector<Dimension> dims_;
    std::vector<Cell> cells_;
};

/// Builds a cube from label-level records against declared dimensions.
inline DataCube build_cube(const std::vector<Record>& records, std::vector<Dimension> dims) {
    std::vector<Cell> cells;
    cells.reserve(records.size());
    for (const auto& rec : records) {
        if (rec.labels.size() != dims.size())
            throw ArityMismatch("record has " + std::to_string(rec.labels.size()) +
                                " labels, expected " + std::to_string(dims.size()));
        Coordinate coord;
        coord.indices.reserve(dims.size());
        for (std::size_t d = 0; d < dims.size(); ++d) {
            auto idx = dims[d].index_of(rec.labels[d]);
            if (!idx)
                throw UnknownCategory("label '" + rec.labels[d] +
                                      "' not declared in dimension '" + dims[d].name + "'");
            coord.indices.push_back(*idx);
        }
        cells.push_back(Cell{std::move(coord), rec.measure});
    }
    return DataCube(std::move(dims), std::move(cells));
}

/// All subsets of {0..n-1} of size < n, ordered by cardinality ascending and
/// lexicographically within a cardinality. The empty subset comes first.
inline std::vector<std::vector<std::uint32_t>> enumerate_position_subsets(std::size_t n) {
    std::vector<std::vector<std::uint32_t>> out;
    out.push_back({});
    for (std::size_t card = 1; card < n; ++card) {
        std::vector<std::uint32_t> combo(card);
        for (std::size_t i = 0; i < card; ++i) combo[i] = static_cast<std::uint32_t>(i);
        while (true) {
            out.push_back(combo);
            // advance to the next combination in lexicographic order
            std::size_t i = card;
            while (i > 0 && combo[i - 1] == n - card + i - 1) --i;
            if (i == 0) break;
            ++combo[i - 1];
            for (std::size_t j = i; j < card; ++j) combo[j] = combo[j - 1] + 1;
        }
    }
    return out;
}

/// The 2^n - 1 strict-subset projections of a coordinate, empty projection
/// included, full coordinate excluded. Deterministic order: cardinality
/// ascending, then lexicographic on fixed dimension positions.
inline std::vector<Projection> enumerate_projections(const Coordinate& coord) {
    const std::size_t n = coord.indices.size();
    std::vector<Projection> out;
    out.reserve((std::size_t{1} << n) - 1);
    for (const auto& positions : enumerate_position_subsets(n))
        out.push_back(Projection::of(coord, positions));
    return out;
}

/// Every stored cell whose coordinate agrees with all fixed positions of the
/// projection, in the cube's canonical order.
inline std::vector<Cell> view_cells(const DataCube& cube, const Projection& proj) {
    const std::size_t n = cube.dim_count();
    if (proj.cardinality() >= n && n > 0)
        throw ConfigError("projection must fix a strict subset of dimensions");
    for (const auto& [pos, idx] : proj.fixed()) {
        if (pos >= n)
            throw ConfigError("projection fixes position " + std::to_string(pos) +
                              " outside the cube's " + std::to_string(n) + " dimensions");
        if (idx >= cube.dimensions()[pos].categories.size())
            throw UnknownCategory("projection index " + std::to_string(idx) +
                                  " out of range for dimension '" +
                                  cube.dimensions()[pos].name + "'");
    }
    std::vector<Cell> out;
    for (const auto& cell : cube.cells())
        if (proj.matches(cell.coord)) out.push_back(cell);
    return out;
}

}  // namespace rodd
