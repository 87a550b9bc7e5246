#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "rodd/csv.hpp"
#include "rodd/cube.hpp"
#include "rodd/errors.hpp"
#include "rodd/rng.hpp"
#include "rodd/stats.hpp"

namespace rodd {

/// Recipe for one labeled benchmark cube.
struct SynthConfig {
    struct DimSpec {
        std::string name;
        std::uint32_t categories = 0;
        std::int64_t value_lo = 1;  // inclusive integer bounds for expected values
        std::int64_t value_hi = 1;
    };

    std::vector<DimSpec> dims;
    std::int64_t interaction_lo = 0;  // zero-centered integer interaction bounds
    std::int64_t interaction_hi = 0;
    double outlier_rate = 0.01;
    double noise_divisor = 5.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (dims.empty()) throw ConfigError("config needs at least one dimension");
        for (const auto& d : dims) {
            if (d.name.empty()) throw ConfigError("dimension name must not be empty");
            if (d.categories == 0)
                throw ConfigError("dimension '" + d.name + "' needs at least one category");
            if (d.value_lo < 1)
                throw ConfigError("dimension '" + d.name +
                                  "' value range must start at 1 or above so expected values "
                                  "stay strictly positive");
            if (d.value_lo > d.value_hi)
                throw ConfigError("dimension '" + d.name + "' has an empty value range");
        }
        if (interaction_lo > interaction_hi) throw ConfigError("empty interaction range");
        if (!(outlier_rate > 0.0 && outlier_rate < 0.5))
            throw ConfigError("outlier_rate must lie in (0, 0.5)");
        if (!(noise_divisor > 0.0)) throw ConfigError("noise_divisor must be positive");
    }

    std::size_t cell_count() const {
        std::size_t m = 1;
        for (const auto& d : dims) m *= d.categories;
        return m;
    }

    nlohmann::json to_json() const {
        nlohmann::json jd = nlohmann::json::array();
        for (const auto& d : dims)
            jd.push_back({{"name", d.name},
                          {"categories", d.categories},
                          {"value_range", {d.value_lo, d.value_hi}}});
        return nlohmann::json{{"dims", std::move(jd)},
                              {"interaction_range", {interaction_lo, interaction_hi}},
                              {"outlier_rate", outlier_rate},
                              {"noise_divisor", noise_divisor},
                              {"seed", seed}};
    }

    static SynthConfig from_json(const nlohmann::json& j) {
        SynthConfig cfg;
        try {
            for (const auto& jd : j.at("dims")) {
                DimSpec d;
                d.name = jd.at("name").get<std::string>();
                d.categories = jd.at("categories").get<std::uint32_t>();
                d.value_lo = jd.at("value_range").at(0).get<std::int64_t>();
                d.value_hi = jd.at("value_range").at(1).get<std::int64_t>();
                cfg.dims.push_back(std::move(d));
            }
            cfg.interaction_lo = j.at("interaction_range").at(0).get<std::int64_t>();
            cfg.interaction_hi = j.at("interaction_range").at(1).get<std::int64_t>();
            cfg.outlier_rate = j.at("outlier_rate").get<double>();
            cfg.noise_divisor = j.at("noise_divisor").get<double>();
            cfg.seed = j.at("seed").get<std::uint64_t>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("bad synth config: ") + e.what());
        }
        cfg.validate();
        return cfg;
    }
};

/// Category labels are zero-padded indices so lexicographic order matches
/// numeric order and CSV round-trips reconstruct the same cube.
inline std::vector<Dimension> make_dimensions(const SynthConfig& config) {
    std::vector<Dimension> dims;
    dims.reserve(config.dims.size());
    for (const auto& spec : config.dims) {
        std::size_t width = 1;
        for (std::uint32_t v = spec.categories - 1; v >= 10; v /= 10) ++width;
        std::vector<std::string> labels;
        labels.reserve(spec.categories);
        for (std::uint32_t c = 0; c < spec.categories; ++c) {
            std::string digits = std::to_string(c);
            labels.push_back("c" + std::string(width - digits.size(), '0') + digits);
        }
        dims.push_back(Dimension{spec.name, std::move(labels)});
    }
    return dims;
}

/// Integer expected values per category plus one integer interaction per
/// unordered pair of categories from different dimensions.
struct Effects {
    std::vector<std::vector<std::int64_t>> expected;  // [dim][category]
    // [pair slot][category of lower dim][category of higher dim], with pair
    // slots enumerating (d1, d2), d1 < d2, in lexicographic order
    std::vector<std::vector<std::vector<std::int64_t>>> interactions;

    static std::size_t pair_slot(std::size_t d1, std::size_t d2, std::size_t n) {
        return d1 * n - d1 * (d1 + 1) / 2 + (d2 - d1 - 1);
    }

    std::int64_t interaction(std::size_t d1, std::uint32_t c1, std::size_t d2,
                             std::uint32_t c2) const {
        if (d1 > d2) {
            std::swap(d1, d2);
            std::swap(c1, c2);
        }
        return interactions[pair_slot(d1, d2, expected.size())][c1][c2];
    }
};

/// Draw order is fixed: expected values dimension by dimension, category by
/// category, then interactions pair slot by pair slot, row-major.
inline Effects gen_effects(const SynthConfig& config, Rng& rng) {
    config.validate();
    Effects eff;
    eff.expected.reserve(config.dims.size());
    for (const auto& spec : config.dims) {
        std::vector<std::int64_t> values;
        values.reserve(spec.categories);
        for (std::uint32_t c = 0; c < spec.categories; ++c)
            values.push_back(rng.uniform_int(spec.value_lo, spec.value_hi));
        eff.expected.push_back(std::move(values));
    }
    const std::size_t n = config.dims.size();
    eff.interactions.resize(n * (n - 1) / 2);
    for (std::size_t d1 = 0; d1 < n; ++d1)
        for (std::size_t d2 = d1 + 1; d2 < n; ++d2) {
            auto& table = eff.interactions[Effects::pair_slot(d1, d2, n)];
            table.assign(config.dims[d1].categories,
                         std::vector<std::int64_t>(config.dims[d2].categories));
            for (std::uint32_t c1 = 0; c1 < config.dims[d1].categories; ++c1)
                for (std::uint32_t c2 = 0; c2 < config.dims[d2].categories; ++c2)
                    table[c1][c2] = rng.uniform_int(config.interaction_lo, config.interaction_hi);
        }
    return eff;
}

/// Dense noiseless assembly: each pairwise combination value is the rounded
/// mean of the two expected values and their interaction, and the cell is
/// the rounded mean of all expected and combination values. All rounding is
/// half away from zero in integer arithmetic, so results are bit-exact.
inline DataCube assemble_noiseless(const Effects& effects, const SynthConfig& config) {
    auto dims = make_dimensions(config);
    const std::size_t n = dims.size();
    const std::int64_t parts = static_cast<std::int64_t>(n + n * (n - 1) / 2);

    std::vector<Cell> cells;
    cells.reserve(config.cell_count());
    Coordinate coord;
    coord.indices.assign(n, 0);
    while (true) {
        std::int64_t sum = 0;
        for (std::size_t d = 0; d < n; ++d) sum += effects.expected[d][coord.indices[d]];
        for (std::size_t d1 = 0; d1 < n; ++d1)
            for (std::size_t d2 = d1 + 1; d2 < n; ++d2) {
                const std::int64_t a = effects.expected[d1][coord.indices[d1]];
                const std::int64_t b = effects.expected[d2][coord.indices[d2]];
                const std::int64_t i =
                    effects.interaction(d1, coord.indices[d1], d2, coord.indices[d2]);
                sum += round_half_away(a + b + i, 2);
            }
        cells.push_back(Cell{coord, static_cast<double>(round_half_away(sum, parts))});

        std::size_t d = n;
        while (d > 0) {
            --d;
            if (++coord.indices[d] < dims[d].categories.size()) break;
            coord.indices[d] = 0;
            if (d == 0) {
                d = n;  // odometer wrapped; all coordinates emitted
                break;
            }
        }
        if (d == n) break;
    }
    return DataCube(std::move(dims), std::move(cells));
}

/// Per-slice outlier boundaries: for every category value, mean and IQR of
/// the cells that were NOT sampled, then rounded mean +/- 1.5 IQR.
struct SliceBoundaries {
    // [dim][category] -> rounded lower/upper boundary
    std::vector<std::vector<double>> lower;
    std::vector<std::vector<double>> upper;
};

inline SliceBoundaries slice_boundaries(const DataCube& cube,
                                        const std::vector<char>& sampled) {
    const auto& dims = cube.dimensions();
    SliceBoundaries bounds;
    bounds.lower.resize(dims.size());
    bounds.upper.resize(dims.size());
    std::vector<double> slice;
    for (std::size_t d = 0; d < dims.size(); ++d) {
        const std::size_t cats = dims[d].categories.size();
        bounds.lower[d].resize(cats);
        bounds.upper[d].resize(cats);
        for (std::size_t v = 0; v < cats; ++v) {
            slice.clear();
            for (std::size_t i = 0; i < cube.size(); ++i)
                if (!sampled[i] && cube.cells()[i].coord.indices[d] == v)
                    slice.push_back(cube.cells()[i].measure);
            if (slice.size() < 4)
                throw InsufficientData("slice " + dims[d].name + "=" + dims[d].categories[v] +
                                       " has " + std::to_string(slice.size()) +
                                       " remaining cells; quartiles need at least 4");
            std::sort(slice.begin(), slice.end());
            const double mu = mean(slice);
            const double iqr = interquartile_range_of_sorted(slice);
            bounds.lower[d][v] = static_cast<double>(round_half_away(mu - 1.5 * iqr));
            bounds.upper[d][v] = static_cast<double>(round_half_away(mu + 1.5 * iqr));
        }
    }
    return bounds;
}

/// Samples round(rate * m) cells (at least one) without replacement and
/// moves each to the slice boundary closest to its original value; ties
/// between candidate boundaries go to the lower value.
inline std::pair<DataCube, std::vector<Coordinate>> inject_outliers(const DataCube& noiseless,
                                                                    double rate, Rng& rng) {
    if (!(rate > 0.0 && rate < 0.5)) throw ConfigError("outlier rate must lie in (0, 0.5)");
    if (noiseless.empty()) throw EmptyCube("cannot inject outliers into an empty cube");

    const std::size_t m = noiseless.size();
    const auto k = static_cast<std::size_t>(
        std::max<std::int64_t>(1, round_half_away(rate * static_cast<double>(m))));

    const auto picks = rng.sample_indices(m, k);
    std::vector<char> sampled(m, 0);
    for (auto i : picks) sampled[i] = 1;

    const SliceBoundaries bounds = slice_boundaries(noiseless, sampled);

    std::vector<Cell> cells(noiseless.cells());
    std::vector<Coordinate> mask;
    mask.reserve(k);
    for (std::size_t i = 0; i < m; ++i) {
        if (!sampled[i]) continue;
        auto& cell = cells[i];
        const double original = cell.measure;
        double best = 0.0;
        double best_dist = std::numeric_limits<double>::infinity();
        for (std::size_t d = 0; d < cell.coord.indices.size(); ++d) {
            const auto v = cell.coord.indices[d];
            for (double candidate : {bounds.lower[d][v], bounds.upper[d][v]}) {
                const double dist = std::abs(candidate - original);
                if (dist < best_dist || (dist == best_dist && candidate < best)) {
                    best = candidate;
                    best_dist = dist;
                }
            }
        }
        cell.measure = best;
        mask.push_back(cell.coord);
    }
    std::sort(mask.begin(), mask.end());
    return {DataCube(std::vector<Dimension>(noiseless.dimensions()), std::move(cells)),
            std::move(mask)};
}

/// Adds round(s / divisor) * u per cell, u uniform on the integers
/// [-10, 10], where s is the population standard deviation of the current
/// values. Outputs are floored at 1 so measures stay strictly positive.
inline DataCube add_noise(const DataCube& cube, double divisor, Rng& rng) {
    if (!(divisor > 0.0)) throw ConfigError("noise divisor must be positive");
    if (cube.empty()) throw EmptyCube("cannot add noise to an empty cube");

    std::vector<double> values;
    values.reserve(cube.size());
    for (const auto& cell : cube.cells()) values.push_back(cell.measure);
    const double s = population_stddev(values);
    const auto step = static_cast<double>(round_half_away(s / divisor));

    std::vector<Cell> cells(cube.cells());
    for (auto& cell : cells) {
        const auto u = static_cast<double>(rng.uniform_int(-10, 10));
        cell.measure = std::max(cell.measure + step * u, 1.0);
    }
    return DataCube(std::vector<Dimension>(cube.dimensions()), std::move(cells));
}

struct LabeledCube {
    DataCube cube;       // final values: outliers injected, noise added
    DataCube noiseless;  // pre-injection ground truth
    std::vector<Coordinate> outlier_mask;  // sorted
    SynthConfig config;

    bool is_outlier(const Coordinate& coord) const {
        return std::binary_search(outlier_mask.begin(), outlier_mask.end(), coord);
    }
};

/// Full pipeline: effects -> noiseless -> injection -> noise, each stage on
/// its own stream derived from config.seed, so any stage can be replayed.
inline LabeledCube synthesize(const SynthConfig& config) {
    config.validate();
    Rng effects_rng(derive_seed(config.seed, "effects"));
    const Effects effects = gen_effects(config, effects_rng);
    DataCube noiseless = assemble_noiseless(effects, config);

    Rng sampling_rng(derive_seed(config.seed, "sampling"));
    auto [with_outliers, mask] = inject_outliers(noiseless, config.outlier_rate, sampling_rng);

    Rng noise_rng(derive_seed(config.seed, "noise"));
    DataCube final_cube = add_noise(with_outliers, config.noise_divisor, noise_rng);

    return LabeledCube{std::move(final_cube), std::move(noiseless), std::move(mask), config};
}

/// Directory layout: cube.csv, noiseless.csv, mask.csv, config.json.
inline void save_labeled_cube(const std::filesystem::path& dir, const LabeledCube& lc) {
    std::filesystem::create_directories(dir);
    write_cube_csv((dir / "cube.csv").string(), lc.cube, "y");
    write_cube_csv((dir / "noiseless.csv").string(), lc.noiseless, "y");

    std::ofstream mask_out(dir / "mask.csv", std::ios::binary);
    if (!mask_out) throw ParseError("cannot write '" + (dir / "mask.csv").string() + "'");
    const auto& dims = lc.cube.dimensions();
    for (std::size_t d = 0; d < dims.size(); ++d)
        mask_out << csv_escape(dims[d].name, ',') << (d + 1 < dims.size() ? "," : "\n");
    for (const auto& coord : lc.outlier_mask)
        for (std::size_t d = 0; d < dims.size(); ++d)
            mask_out << csv_escape(dims[d].categories[coord.indices[d]], ',')
                     << (d + 1 < dims.size() ? "," : "\n");

    std::ofstream cfg_out(dir / "config.json", std::ios::binary);
    if (!cfg_out) throw ParseError("cannot write '" + (dir / "config.json").string() + "'");
    cfg_out << lc.config.to_json().dump(2) << '\n';
}

inline LabeledCube load_labeled_cube(const std::filesystem::path& dir) {
    std::ifstream cfg_in(dir / "config.json");
    if (!cfg_in) throw ParseError("cannot open '" + (dir / "config.json").string() + "'");
    nlohmann::json j;
    try {
        cfg_in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("bad JSON in '" + (dir / "config.json").string() + "': " + e.what());
    }
    const SynthConfig config = SynthConfig::from_json(j);

    std::vector<std::string> dim_names;
    for (const auto& d : config.dims) dim_names.push_back(d.name);
    DataCube cube = read_cube_csv((dir / "cube.csv").string(), dim_names, "y");
    DataCube noiseless = read_cube_csv((dir / "noiseless.csv").string(), dim_names, "y");

    std::ifstream mask_in(dir / "mask.csv");
    if (!mask_in) throw ParseError("cannot open '" + (dir / "mask.csv").string() + "'");
    auto rows = read_csv_rows(mask_in, ',');
    if (rows.empty()) throw ParseError("'" + (dir / "mask.csv").string() + "' has no header");
    std::vector<Coordinate> mask;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != cube.dim_count())
            throw ParseError("mask row " + std::to_string(r + 1) + " has " +
                             std::to_string(row.size()) + " fields, expected " +
                             std::to_string(cube.dim_count()));
        Coordinate coord;
        coord.indices.reserve(row.size());
        for (std::size_t d = 0; d < row.size(); ++d) {
            const auto idx = cube.dimensions()[d].index_of(row[d]);
            if (!idx)
                throw UnknownCategory("mask row " + std::to_string(r + 1) + " names '" + row[d] +
                                      "', which is not a category of dimension '" +
                                      cube.dimensions()[d].name + "'");
            coord.indices.push_back(*idx);
        }
        mask.push_back(std::move(coord));
    }
    std::sort(mask.begin(), mask.end());
    return LabeledCube{std::move(cube), std::move(noiseless), std::move(mask), config};
}

}  // namespace rodd
