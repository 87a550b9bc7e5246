#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "rodd/cube.hpp"
#include "rodd/errors.hpp"
#include "rodd/rng.hpp"

namespace rodd {

/// How many candidate features each split draws.
struct MaxFeatures {
    enum class Rule { Sqrt, All, Fixed };

    Rule rule = Rule::Sqrt;
    std::uint32_t fixed_k = 0;

    std::size_t resolve(std::size_t total) const {
        switch (rule) {
            case Rule::All: return total;
            case Rule::Fixed: return std::min<std::size_t>(std::max<std::uint32_t>(fixed_k, 1), total);
            case Rule::Sqrt:
            default: {
                auto k = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(total))));
                return std::min(std::max<std::size_t>(k, 1), total);
            }
        }
    }

    static MaxFeatures sqrt_rule() { return MaxFeatures{Rule::Sqrt, 0}; }
    static MaxFeatures all() { return MaxFeatures{Rule::All, 0}; }
    static MaxFeatures fixed(std::uint32_t k) { return MaxFeatures{Rule::Fixed, k}; }
};

struct ForestParams {
    std::uint32_t n_trees = 200;
    std::uint32_t max_depth = 60;
    std::uint32_t min_samples_split = 5;
    std::uint32_t min_samples_leaf = 1;
    MaxFeatures max_features{};
    bool bootstrap = true;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_trees == 0) throw ConfigError("n_trees must be positive");
        if (max_depth == 0) throw ConfigError("max_depth must be positive");
        if (min_samples_split < 2) throw ConfigError("min_samples_split must be at least 2");
        if (min_samples_leaf == 0) throw ConfigError("min_samples_leaf must be positive");
        if (min_samples_leaf > min_samples_split)
            throw ConfigError("min_samples_leaf must not exceed min_samples_split");
    }

    /// Tuned parameters scaled to desk runtimes: 200 trees instead of 1500.
    static ForestParams desk_defaults(std::uint64_t seed) {
        ForestParams p;
        p.n_trees = 200;
        p.seed = seed;
        return p;
    }

    /// The full tuned parameter set: 1500 trees, depth 60, split 5, leaf 1,
    /// sqrt features, bootstrap resampling.
    static ForestParams paper_defaults(std::uint64_t seed) {
        ForestParams p;
        p.n_trees = 1500;
        p.seed = seed;
        return p;
    }
};

/// Row-major training matrix plus targets.
struct TrainingData {
    std::size_t feature_count = 0;
    std::vector<double> features;  // m x feature_count
    std::vector<double> targets;   // m

    std::size_t row_count() const noexcept { return targets.size(); }
    double at(std::size_t row, std::size_t feature) const {
        return features[row * feature_count + feature];
    }
};

namespace detail {

struct TreeNode {
    static constexpr std::uint32_t kLeaf = std::numeric_limits<std::uint32_t>::max();

    std::uint32_t feature = kLeaf;
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;       // leaf: mean of training targets reaching it
    std::uint32_t count = 0;  // leaf: number of training rows

    bool is_leaf() const noexcept { return feature == kLeaf; }
};

struct SplitChoice {
    bool found = false;
    std::uint32_t feature = 0;
    double threshold = 0.0;
    double children_sse = std::numeric_limits<double>::infinity();
};

}  // namespace detail

class RegressionTree {
public:
    RegressionTree() = default;
    explicit RegressionTree(std::vector<detail::TreeNode> nodes) : nodes_(std::move(nodes)) {}

    double predict(std::span<const double> features) const {
        std::size_t node = 0;
        while (!nodes_[node].is_leaf()) {
            const auto& nd = nodes_[node];
            node = features[nd.feature] <= nd.threshold ? static_cast<std::size_t>(nd.left)
                                                        : static_cast<std::size_t>(nd.right);
        }
        return nodes_[node].value;
    }

    const std::vector<detail::TreeNode>& nodes() const noexcept { return nodes_; }

    std::size_t leaf_count() const {
        std::size_t k = 0;
        for (const auto& nd : nodes_)
            if (nd.is_leaf()) ++k;
        return k;
    }

private:
    std::vector<detail::TreeNode> nodes_;
};

namespace detail {

class TreeBuilder {
public:
    TreeBuilder(const TrainingData& data, const ForestParams& params, Rng& rng)
        : data_(data), params_(params), rng_(rng) {}

    RegressionTree build(std::vector<std::uint32_t> rows) {
        nodes_.clear();
        grow(std::move(rows), 0);
        return RegressionTree(std::move(nodes_));
    }

private:
    // Preorder growth; the rng is consumed in deterministic node order.
    std::int32_t grow(std::vector<std::uint32_t> rows, std::uint32_t depth) {
        double sum = 0.0, sumsq = 0.0;
        for (auto r : rows) {
            sum += data_.targets[r];
            sumsq += data_.targets[r] * data_.targets[r];
        }
        const auto m = static_cast<double>(rows.size());
        const double sse = std::max(0.0, sumsq - sum * sum / m);

        const bool splittable = depth < params_.max_depth &&
                                rows.size() >= params_.min_samples_split && sse > 0.0;
        SplitChoice choice;
        if (splittable) choice = choose_split(rows);

        const auto index = static_cast<std::int32_t>(nodes_.size());
        nodes_.emplace_back();
        if (!choice.found) {
            nodes_[index].value = sum / m;
            nodes_[index].count = static_cast<std::uint32_t>(rows.size());
            return index;
        }

        std::vector<std::uint32_t> left, right;
        left.reserve(rows.size());
        for (auto r : rows)
            (data_.at(r, choice.feature) <= choice.threshold ? left : right).push_back(r);
        rows.clear();
        rows.shrink_to_fit();

        nodes_[index].feature = choice.feature;
        nodes_[index].threshold = choice.threshold;
        const auto l = grow(std::move(left), depth + 1);
        const auto r = grow(std::move(right), depth + 1);
        nodes_[index].left = l;
        nodes_[index].right = r;
        return index;
    }

    /// Draws candidate features without replacement; constant features do
    /// not count toward the max_features budget, mirroring the usual RF
    /// splitter, so a valid split is found whenever one exists.
    SplitChoice choose_split(const std::vector<std::uint32_t>& rows) {
        const std::size_t total = data_.feature_count;
        const std::size_t budget = params_.max_features.resolve(total);

        perm_.resize(total);
        for (std::size_t i = 0; i < total; ++i) perm_[i] = static_cast<std::uint32_t>(i);
        rng_.shuffle(perm_);

        SplitChoice best;
        std::size_t inspected = 0;
        for (std::uint32_t feature : perm_) {
            if (inspected >= budget) break;
            SplitChoice cand = best_split_for_feature(rows, feature);
            if (!cand.found) continue;  // constant within this node
            ++inspected;
            if (cand.children_sse < best.children_sse ||
                (cand.children_sse == best.children_sse &&
                 (cand.feature < best.feature ||
                  (cand.feature == best.feature && cand.threshold < best.threshold))))
                best = cand;
        }
        return best;
    }

    SplitChoice best_split_for_feature(const std::vector<std::uint32_t>& rows,
                                       std::uint32_t feature) {
        scratch_.clear();
        scratch_.reserve(rows.size());
        for (auto r : rows) scratch_.emplace_back(data_.at(r, feature), data_.targets[r]);
        std::stable_sort(scratch_.begin(), scratch_.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        if (scratch_.front().first == scratch_.back().first) return {};  // constant

        const std::size_t m = scratch_.size();
        double total_sum = 0.0, total_sumsq = 0.0;
        for (const auto& [x, y] : scratch_) {
            total_sum += y;
            total_sumsq += y * y;
        }

        SplitChoice best;
        double left_sum = 0.0, left_sumsq = 0.0;
        for (std::size_t i = 0; i + 1 < m; ++i) {
            left_sum += scratch_[i].second;
            left_sumsq += scratch_[i].second * scratch_[i].second;
            if (scratch_[i].first == scratch_[i + 1].first) continue;
            const std::size_t nl = i + 1, nr = m - nl;
            if (nl < params_.min_samples_leaf || nr < params_.min_samples_leaf) continue;
            const double right_sum = total_sum - left_sum;
            const double right_sumsq = total_sumsq - left_sumsq;
            const double sse_l = std::max(0.0, left_sumsq - left_sum * left_sum / static_cast<double>(nl));
            const double sse_r = std::max(0.0, right_sumsq - right_sum * right_sum / static_cast<double>(nr));
            const double sse = sse_l + sse_r;
            const double threshold =
                scratch_[i].first + 0.5 * (scratch_[i + 1].first - scratch_[i].first);
            if (sse < best.children_sse) {
                best.found = true;
                best.feature = feature;
                best.threshold = threshold;
                best.children_sse = sse;
            }
        }
        return best;
    }

    const TrainingData& data_;
    const ForestParams& params_;
    Rng& rng_;
    std::vector<detail::TreeNode> nodes_;
    std::vector<std::uint32_t> perm_;
    std::vector<std::pair<double, double>> scratch_;
};

}  // namespace detail

/// Greedy CART regression tree: binary splits minimizing the summed child
/// SSE (equivalently the weighted child variance), grown until max_depth,
/// min_samples_split, or zero variance stops it.
inline RegressionTree build_tree(const TrainingData& data,
                                 std::span<const std::uint32_t> row_indices,
                                 const ForestParams& params, Rng& rng) {
    if (row_indices.empty()) throw EmptyInput("cannot build a tree on zero rows");
    params.validate();
    detail::TreeBuilder builder(data, params, rng);
    return builder.build(std::vector<std::uint32_t>(row_indices.begin(), row_indices.end()));
}

inline RegressionTree build_tree(const TrainingData& data, const ForestParams& params, Rng& rng) {
    std::vector<std::uint32_t> rows(data.row_count());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<std::uint32_t>(i);
    return build_tree(data, rows, params, rng);
}

/// One-hot layout: one feature per (dimension, category), dimension-major in
/// the cube's canonical category order.
class OneHotEncoding {
public:
    explicit OneHotEncoding(const std::vector<Dimension>& dims) {
        offsets_.reserve(dims.size());
        std::size_t total = 0;
        for (const auto& d : dims) {
            offsets_.push_back(total);
            total += d.categories.size();
        }
        feature_count_ = total;
    }

    std::size_t feature_count() const noexcept { return feature_count_; }

    void encode(const Coordinate& coord, std::span<double> out) const {
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t d = 0; d < offsets_.size(); ++d)
            out[offsets_[d] + coord.indices[d]] = 1.0;
    }

    std::vector<double> encode(const Coordinate& coord) const {
        std::vector<double> out(feature_count_, 0.0);
        encode(coord, out);
        return out;
    }

private:
    std::vector<std::size_t> offsets_;
    std::size_t feature_count_ = 0;
};

/// Bagged ensemble of regression trees over one-hot coordinates, predicting
/// the log measure. Immutable once fitted; prediction averages the trees in
/// value order, so it is exactly invariant under tree permutation.
class Forest {
public:
    Forest(std::vector<Dimension> dims, std::vector<RegressionTree> trees)
        : dims_(std::move(dims)), encoding_(dims_), trees_(std::move(trees)) {}

    const std::vector<Dimension>& dimensions() const noexcept { return dims_; }
    const std::vector<RegressionTree>& trees() const noexcept { return trees_; }
    const OneHotEncoding& encoding() const noexcept { return encoding_; }

    double predict_log(const Coordinate& coord) const {
        const auto features = encoding_.encode(coord);
        std::vector<double> outputs;
        outputs.reserve(trees_.size());
        for (const auto& tree : trees_) outputs.push_back(tree.predict(features));
        std::sort(outputs.begin(), outputs.end());
        double sum = 0.0;
        for (double v : outputs) sum += v;
        return sum / static_cast<double>(outputs.size());
    }

    double predict(const Coordinate& coord) const { return std::exp(predict_log(coord)); }

private:
    std::vector<Dimension> dims_;
    OneHotEncoding encoding_;
    std::vector<RegressionTree> trees_;
};

/// Encodes the cube's cells as one-hot rows with log-measure targets.
inline TrainingData encode_cube(const DataCube& cube) {
    OneHotEncoding encoding(cube.dimensions());
    TrainingData data;
    data.feature_count = encoding.feature_count();
    data.features.assign(cube.size() * data.feature_count, 0.0);
    data.targets.reserve(cube.size());
    for (std::size_t i = 0; i < cube.size(); ++i) {
        const auto& cell = cube.cells()[i];
        encoding.encode(cell.coord,
                        std::span<double>(data.features.data() + i * data.feature_count,
                                          data.feature_count));
        data.targets.push_back(std::log(cell.measure));
    }
    return data;
}

/// Trains n_trees trees, each on a bootstrap resample of size m when
/// bootstrap is set. Every tree owns a stream derived from (seed, tree
/// index), so the result is bit-identical at any thread count.
inline Forest fit_forest(const DataCube& cube, const ForestParams& params,
                         unsigned threads = 1) {
    params.validate();
    if (cube.empty()) throw EmptyCube("cannot fit a forest on an empty cube");
    for (const auto& cell : cube.cells())
        if (!(cell.measure > 0.0))
            throw NonPositiveMeasure("measure at " + cube.describe(cell.coord) +
                                     " is not strictly positive; forest targets are log values");

    const TrainingData data = encode_cube(cube);
    const std::size_t m = data.row_count();
    std::vector<RegressionTree> trees(params.n_trees);

    auto build_range = [&](std::uint32_t begin, std::uint32_t end) {
        std::vector<std::uint32_t> rows(m);
        for (std::uint32_t t = begin; t < end; ++t) {
            Rng rng(derive_seed(params.seed, "tree", t));
            if (params.bootstrap) {
                for (std::size_t i = 0; i < m; ++i)
                    rows[i] = static_cast<std::uint32_t>(
                        rng.uniform_int(0, static_cast<std::int64_t>(m - 1)));
            } else {
                for (std::size_t i = 0; i < m; ++i) rows[i] = static_cast<std::uint32_t>(i);
            }
            detail::TreeBuilder builder(data, params, rng);
            trees[t] = builder.build(rows);
        }
    };

    if (threads <= 1 || params.n_trees <= 1) {
        build_range(0, params.n_trees);
    } else {
        const unsigned workers = std::min<unsigned>(threads, params.n_trees);
        std::vector<std::thread> pool;
        pool.reserve(workers);
        const std::uint32_t chunk = (params.n_trees + workers - 1) / workers;
        for (unsigned w = 0; w < workers; ++w) {
            const std::uint32_t begin = w * chunk;
            const std::uint32_t end = std::min(params.n_trees, begin + chunk);
            if (begin >= end) break;
            pool.emplace_back(build_range, begin, end);
        }
        for (auto& th : pool) th.join();
    }
    return Forest(std::vector<Dimension>(cube.dimensions()), std::move(trees));
}

inline double predict_forest(const Forest& forest, const Coordinate& coord) {
    return forest.predict(coord);
}

}  // namespace rodd
