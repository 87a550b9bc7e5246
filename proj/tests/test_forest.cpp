#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "rodd/forest.hpp"
#include "rodd/rng.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

rodd::DataCube random_dense_cube(rodd::Rng& rng, const std::vector<std::size_t>& cats) {
    std::vector<rodd::Dimension> dims;
    for (std::size_t d = 0; d < cats.size(); ++d) {
        std::vector<std::string> labels;
        for (std::size_t c = 0; c < cats[d]; ++c) labels.push_back("c" + std::to_string(c));
        dims.push_back(rodd::Dimension{"dim" + std::to_string(d), std::move(labels)});
    }
    std::vector<rodd::Cell> cells;
    std::vector<rodd::CategoryIndex> idx(cats.size(), 0);
    while (true) {
        cells.push_back({rodd::Coordinate{idx}, rng.uniform_real(5.0, 500.0)});
        bool wrapped = true;
        for (std::size_t d = cats.size(); d > 0;) {
            --d;
            if (++idx[d] < cats[d]) {
                wrapped = false;
                break;
            }
            idx[d] = 0;
        }
        if (wrapped) break;
    }
    return rodd::DataCube(std::move(dims), std::move(cells));
}

rodd::ForestParams interpolating_params(std::uint64_t seed) {
    rodd::ForestParams p;
    p.n_trees = 1;
    p.max_depth = 60;
    p.min_samples_split = 2;
    p.min_samples_leaf = 1;
    p.max_features = rodd::MaxFeatures::all();
    p.bootstrap = false;
    p.seed = seed;
    return p;
}

double tree_mse(const rodd::RegressionTree& tree, const rodd::TrainingData& data) {
    double acc = 0.0;
    for (std::size_t r = 0; r < data.row_count(); ++r) {
        std::span<const double> row(data.features.data() + r * data.feature_count,
                                    data.feature_count);
        const double err = tree.predict(row) - data.targets[r];
        acc += err * err;
    }
    return acc / static_cast<double>(data.row_count());
}

/// Exhaustive best single axis-aligned split, children predicting their
/// means; returns its training MSE.
double best_single_split_mse(const rodd::TrainingData& data) {
    const std::size_t m = data.row_count();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t f = 0; f < data.feature_count; ++f) {
        std::vector<double> values;
        for (std::size_t r = 0; r < m; ++r) values.push_back(data.at(r, f));
        std::sort(values.begin(), values.end());
        values.erase(std::unique(values.begin(), values.end()), values.end());
        for (std::size_t i = 0; i + 1 < values.size(); ++i) {
            const double threshold = 0.5 * (values[i] + values[i + 1]);
            double sl = 0.0, nl = 0.0, sr = 0.0, nr = 0.0;
            for (std::size_t r = 0; r < m; ++r)
                if (data.at(r, f) <= threshold) {
                    sl += data.targets[r];
                    nl += 1.0;
                } else {
                    sr += data.targets[r];
                    nr += 1.0;
                }
            double sse = 0.0;
            for (std::size_t r = 0; r < m; ++r) {
                const double mu = data.at(r, f) <= threshold ? sl / nl : sr / nr;
                sse += (data.targets[r] - mu) * (data.targets[r] - mu);
            }
            best = std::min(best, sse / static_cast<double>(m));
        }
    }
    return best;
}

}  // namespace

TEST_CASE("max_features rules resolve against the feature count") {
    CHECK(rodd::MaxFeatures::sqrt_rule().resolve(9) == 3);
    CHECK(rodd::MaxFeatures::sqrt_rule().resolve(10) == 3);
    CHECK(rodd::MaxFeatures::sqrt_rule().resolve(1) == 1);
    CHECK(rodd::MaxFeatures::all().resolve(17) == 17);
    CHECK(rodd::MaxFeatures::fixed(4).resolve(17) == 4);
    CHECK(rodd::MaxFeatures::fixed(40).resolve(17) == 17);  // clamped
    CHECK(rodd::MaxFeatures::fixed(0).resolve(17) == 1);
}

TEST_CASE("forest params validation") {
    auto p = rodd::ForestParams::desk_defaults(0);
    CHECK(p.n_trees == 200);
    CHECK(rodd::ForestParams::paper_defaults(0).n_trees == 1500);
    CHECK_NOTHROW(p.validate());

    p.n_trees = 0;
    CHECK_THROWS_AS(p.validate(), rodd::ConfigError);
    p = rodd::ForestParams::desk_defaults(0);
    p.max_depth = 0;
    CHECK_THROWS_AS(p.validate(), rodd::ConfigError);
    p = rodd::ForestParams::desk_defaults(0);
    p.min_samples_split = 1;
    CHECK_THROWS_AS(p.validate(), rodd::ConfigError);
    p = rodd::ForestParams::desk_defaults(0);
    p.min_samples_leaf = 0;
    CHECK_THROWS_AS(p.validate(), rodd::ConfigError);
    p.min_samples_leaf = 9;  // exceeds min_samples_split = 5
    CHECK_THROWS_AS(p.validate(), rodd::ConfigError);
}

TEST_CASE("identical targets collapse to a single leaf") {
    rodd::TrainingData data;
    data.feature_count = 3;
    for (int r = 0; r < 6; ++r) {
        data.features.insert(data.features.end(),
                             {double(r % 2), double(r % 3), double(r)});
        data.targets.push_back(4.25);
    }
    rodd::Rng rng(1);
    const auto tree = rodd::build_tree(data, interpolating_params(0), rng);
    CHECK(tree.nodes().size() == 1);
    CHECK(tree.leaf_count() == 1);
    const std::vector<double> any_row{0.0, 0.0, 0.0};
    CHECK(tree.predict(any_row) == 4.25);
}

TEST_CASE("distinct one-hot rows are interpolated exactly") {
    rodd::TrainingData data;
    data.feature_count = 4;
    const std::vector<double> targets{3.0, -1.0, 7.5, 2.0};
    for (std::size_t r = 0; r < 4; ++r) {
        for (std::size_t f = 0; f < 4; ++f)
            data.features.push_back(f == r ? 1.0 : 0.0);
        data.targets.push_back(targets[r]);
    }
    rodd::Rng rng(2);
    const auto tree = rodd::build_tree(data, interpolating_params(0), rng);
    for (std::size_t r = 0; r < 4; ++r) {
        std::span<const double> row(data.features.data() + r * 4, 4);
        CHECK(tree.predict(row) == targets[r]);
    }
}

TEST_CASE("a grown tree never does worse than the best single split") {
    rodd::Rng rng(3);
    for (int it = 0; it < 5; ++it) {
        rodd::TrainingData data;
        data.feature_count = 4;
        for (int r = 0; r < 50; ++r) {
            for (int f = 0; f < 4; ++f)
                data.features.push_back(rng.uniform_real(0.0, 10.0));
            data.targets.push_back(rng.uniform_real(-5.0, 5.0));
        }
        auto params = interpolating_params(0);
        params.max_depth = 12;
        rodd::Rng tree_rng(100 + it);
        const auto tree = rodd::build_tree(data, params, tree_rng);
        CHECK(tree_mse(tree, data) <= best_single_split_mse(data) + 1e-12);
    }
}

TEST_CASE("leaves partition the training rows and hold their target means") {
    rodd::Rng rng(4);
    const auto cube = random_dense_cube(rng, {4, 3, 3});
    const auto data = rodd::encode_cube(cube);

    auto params = interpolating_params(0);
    params.min_samples_split = 5;
    params.min_samples_leaf = 2;
    rodd::Rng tree_rng(5);
    const auto tree = rodd::build_tree(data, params, tree_rng);

    std::map<std::size_t, std::pair<std::uint32_t, double>> routed;  // leaf -> (count, sum)
    for (std::size_t r = 0; r < data.row_count(); ++r) {
        std::span<const double> row(data.features.data() + r * data.feature_count,
                                    data.feature_count);
        std::size_t node = 0;
        while (!tree.nodes()[node].is_leaf()) {
            const auto& nd = tree.nodes()[node];
            node = row[nd.feature] <= nd.threshold ? static_cast<std::size_t>(nd.left)
                                                   : static_cast<std::size_t>(nd.right);
        }
        routed[node].first += 1;
        routed[node].second += data.targets[r];
    }

    std::size_t total = 0;
    for (std::size_t i = 0; i < tree.nodes().size(); ++i) {
        const auto& nd = tree.nodes()[i];
        if (!nd.is_leaf()) continue;
        REQUIRE(routed.count(i) == 1);
        CHECK(routed[i].first == nd.count);
        CHECK(nd.count >= params.min_samples_leaf);
        CHECK_THAT(nd.value, WithinAbs(routed[i].second / nd.count, 1e-12));
        total += nd.count;
    }
    CHECK(total == data.row_count());
    CHECK(routed.size() == tree.leaf_count());
}

TEST_CASE("build_tree rejects empty input") {
    rodd::TrainingData data;
    data.feature_count = 1;
    rodd::Rng rng(6);
    CHECK_THROWS_AS(rodd::build_tree(data, std::vector<std::uint32_t>{},
                                     interpolating_params(0), rng),
                    rodd::EmptyInput);
}

TEST_CASE("single-cell cube always predicts that cell's value") {
    std::vector<rodd::Dimension> dims{{"a", {"x"}}, {"b", {"p"}}};
    const rodd::DataCube cube(dims, {{rodd::Coordinate{{0, 0}}, 450.0}});
    for (auto params : {rodd::ForestParams::desk_defaults(7), interpolating_params(7)}) {
        params.n_trees = std::min<std::uint32_t>(params.n_trees, 25);
        const auto forest = rodd::fit_forest(cube, params, 1);
        CHECK_THAT(forest.predict(rodd::Coordinate{{0, 0}}), WithinRel(450.0, 1e-12));
    }
}

TEST_CASE("the interpolating configuration reproduces every training value") {
    rodd::Rng rng(8);
    for (int it = 0; it < 5; ++it) {
        const auto cube = random_dense_cube(rng, {3, 4, 2});
        const auto forest = rodd::fit_forest(cube, interpolating_params(42), 1);
        for (const auto& cell : cube.cells())
            CHECK_THAT(forest.predict(cell.coord), WithinRel(cell.measure, 1e-9));
    }
}

TEST_CASE("forest predictions are identical at any thread count") {
    rodd::Rng rng(9);
    const auto cube = random_dense_cube(rng, {4, 4, 3});
    auto params = rodd::ForestParams::desk_defaults(31);
    params.n_trees = 32;

    const auto alone = rodd::fit_forest(cube, params, 1);
    const auto pooled = rodd::fit_forest(cube, params, 5);

    REQUIRE(alone.trees().size() == pooled.trees().size());
    for (std::size_t t = 0; t < alone.trees().size(); ++t) {
        const auto& a = alone.trees()[t].nodes();
        const auto& b = pooled.trees()[t].nodes();
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].feature == b[i].feature);
            CHECK(a[i].threshold == b[i].threshold);
            CHECK(a[i].value == b[i].value);
            CHECK(a[i].count == b[i].count);
        }
    }
    for (const auto& cell : cube.cells())
        CHECK(alone.predict_log(cell.coord) == pooled.predict_log(cell.coord));
}

TEST_CASE("log predictions stay inside the training target range") {
    rodd::Rng rng(10);
    const auto cube = random_dense_cube(rng, {5, 4});
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& cell : cube.cells()) {
        lo = std::min(lo, std::log(cell.measure));
        hi = std::max(hi, std::log(cell.measure));
    }
    auto params = rodd::ForestParams::desk_defaults(12);
    params.n_trees = 40;
    const auto forest = rodd::fit_forest(cube, params, 1);
    for (const auto& cell : cube.cells()) {
        const double p = forest.predict_log(cell.coord);
        CHECK(p >= lo - 1e-12);
        CHECK(p <= hi + 1e-12);
    }
}

TEST_CASE("forest prediction is the mean of its trees") {
    rodd::Rng rng(11);
    const auto cube = random_dense_cube(rng, {3, 3, 2});
    auto params = rodd::ForestParams::desk_defaults(13);
    params.n_trees = 10;
    const auto forest = rodd::fit_forest(cube, params, 1);
    REQUIRE(forest.trees().size() == 10);

    for (const auto& cell : cube.cells()) {
        const auto features = forest.encoding().encode(cell.coord);
        double sum = 0.0;
        for (const auto& tree : forest.trees()) sum += tree.predict(features);
        CHECK_THAT(forest.predict_log(cell.coord), WithinAbs(sum / 10.0, 1e-12));
        CHECK_THAT(rodd::predict_forest(forest, cell.coord),
                   WithinRel(std::exp(forest.predict_log(cell.coord)), 1e-15));
    }
}

TEST_CASE("prediction does not depend on tree order") {
    rodd::Rng rng(14);
    const auto cube = random_dense_cube(rng, {4, 3});
    auto params = rodd::ForestParams::desk_defaults(15);
    params.n_trees = 16;
    const auto forest = rodd::fit_forest(cube, params, 1);

    auto reversed_trees = forest.trees();
    std::reverse(reversed_trees.begin(), reversed_trees.end());
    const rodd::Forest reversed(cube.dimensions(), std::move(reversed_trees));

    for (const auto& cell : cube.cells())
        CHECK(forest.predict_log(cell.coord) == reversed.predict_log(cell.coord));
}

TEST_CASE("fit_forest rejects empty cubes and non-positive measures") {
    std::vector<rodd::Dimension> dims{{"a", {"x"}}};
    const rodd::DataCube empty(dims, {});
    CHECK_THROWS_AS(rodd::fit_forest(empty, rodd::ForestParams::desk_defaults(0), 1),
                    rodd::EmptyCube);
    const rodd::DataCube zero(dims, {{rodd::Coordinate{{0}}, 0.0}});
    CHECK_THROWS_AS(rodd::fit_forest(zero, rodd::ForestParams::desk_defaults(0), 1),
                    rodd::NonPositiveMeasure);
}
