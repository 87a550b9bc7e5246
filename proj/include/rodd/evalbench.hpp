#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "rodd/csv.hpp"
#include "rodd/cube.hpp"
#include "rodd/errors.hpp"
#include "rodd/estimators.hpp"
#include "rodd/scoring.hpp"
#include "rodd/synthgen.hpp"

namespace rodd {

struct ConfusionCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fn = 0;

    std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
};

/// Zero-denominator rates are reported as 1.0 with the matching flag
/// cleared, so downstream aggregation never sees NaN.
struct ConfusionRates {
    double sensitivity = 1.0;
    double specificity = 1.0;
    double accuracy = 1.0;
    bool sensitivity_defined = false;
    bool specificity_defined = false;
    bool accuracy_defined = false;
};

inline ConfusionRates derive_rates(const ConfusionCounts& c) {
    ConfusionRates r;
    if (c.tp + c.fn > 0) {
        r.sensitivity = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
        r.sensitivity_defined = true;
    }
    if (c.tn + c.fp > 0) {
        r.specificity = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
        r.specificity_defined = true;
    }
    if (c.total() > 0) {
        r.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
        r.accuracy_defined = true;
    }
    return r;
}

struct Confusion {
    ConfusionCounts counts;
    ConfusionRates rates;
};

namespace detail {

/// Marks each record as a true outlier; throws if the mask names a
/// coordinate the records do not contain.
inline std::vector<char> label_records(std::span<const ScoreRecord> records,
                                       std::span<const Coordinate> mask) {
    std::vector<char> actual(records.size(), 0);
    std::size_t matched = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (std::binary_search(mask.begin(), mask.end(), records[i].coord)) {
            actual[i] = 1;
            ++matched;
        }
    }
    if (matched != mask.size())
        throw DomainMismatch("outlier mask names " + std::to_string(mask.size()) +
                             " coordinates but only " + std::to_string(matched) +
                             " appear among the scored records");
    return actual;
}

}  // namespace detail

/// Confusion of the thresholded flags against the ground-truth mask.
inline Confusion confusion(std::span<const ScoreRecord> records,
                           std::span<const Coordinate> mask) {
    const auto actual = detail::label_records(records, mask);
    Confusion out;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const bool predicted = records[i].is_outlier;
        if (actual[i])
            (predicted ? out.counts.tp : out.counts.fn) += 1;
        else
            (predicted ? out.counts.fp : out.counts.tn) += 1;
    }
    out.rates = derive_rates(out.counts);
    return out;
}

/// Threshold-free ranking quality of the RAW scores: the Mann-Whitney
/// statistic with midrank tie correction,
/// AUC = (sum of outlier ranks - n_pos(n_pos+1)/2) / (n_pos * n_neg).
inline double auc(std::span<const ScoreRecord> records, std::span<const Coordinate> mask) {
    const auto actual = detail::label_records(records, mask);

    std::size_t n_pos = 0;
    for (char a : actual) n_pos += a;
    const std::size_t n_neg = records.size() - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw DegenerateLabels("AUC needs at least one outlier and one inlier");

    std::vector<std::size_t> order(records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return records[a].raw_score < records[b].raw_score;
    });

    double positive_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() &&
               records[order[j]].raw_score == records[order[i]].raw_score)
            ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
        for (std::size_t k = i; k < j; ++k)
            if (actual[order[k]]) positive_rank_sum += midrank;
        i = j;
    }

    const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
    return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

struct NamedConfig {
    std::string id;
    SynthConfig config;
};

struct BenchGrid {
    std::vector<NamedConfig> configs;
    std::vector<std::uint64_t> seeds;
    std::vector<EstimatorKind> estimators;
    ForestParams forest = ForestParams::desk_defaults(0);  // seed is derived per run
    double tau = kDefaultTau;
};

struct BenchResult {
    std::string config_id;
    std::uint64_t seed = 0;
    EstimatorKind estimator = EstimatorKind::S75;
    ConfusionCounts counts;
    ConfusionRates rates;
    double auc = 0.0;
    bool rho_converged = false;
    double runtime_seconds = 0.0;
};

struct BenchFailure {
    std::string config_id;
    std::uint64_t seed = 0;
    std::string estimator;
    std::string error;
};

struct BenchOutcome {
    std::vector<BenchResult> results;
    std::vector<BenchFailure> failures;
};

/// Desk-scale sweep: 2 base shapes x 3 noise divisors x 2 outlier rates,
/// 5 seeds, all 5 estimators (300 runs).
inline BenchGrid desk_profile() {
    BenchGrid grid;
    const std::vector<double> divisors = {20.0, 25.0, 30.0};
    const std::vector<double> rates = {0.01, 0.05};

    struct Base {
        std::string id;
        std::vector<SynthConfig::DimSpec> dims;
        std::int64_t inter_lo, inter_hi;
    };
    const std::vector<Base> bases = {
        {"retail-a",
         {{"month", 12, 80, 120}, {"product", 9, 60, 140}, {"city", 10, 90, 110}},
         -10,
         10},
        {"retail-b",
         {{"month", 12, 150, 250}, {"product", 6, 100, 300}, {"city", 5, 180, 220}},
         -20,
         20},
    };

    for (const auto& base : bases)
        for (double divisor : divisors)
            for (double rate : rates) {
                SynthConfig cfg;
                cfg.dims = base.dims;
                cfg.interaction_lo = base.inter_lo;
                cfg.interaction_hi = base.inter_hi;
                cfg.noise_divisor = divisor;
                cfg.outlier_rate = rate;
                grid.configs.push_back(
                    {base.id + "_div" + format_double(divisor) + "_rate" + format_double(rate),
                     std::move(cfg)});
            }

    grid.seeds = {1, 2, 3, 4, 5};
    grid.estimators.assign(kAllEstimators.begin(), kAllEstimators.end());
    return grid;
}

/// Full-scale sweep mirroring the original study's grid: 5 noise divisors,
/// 3 outlier rates, 30 seeds, 1500-tree forests. Hours of runtime.
inline BenchGrid paper_profile() {
    BenchGrid grid = desk_profile();
    const std::vector<double> divisors = {2.5, 5.0, 7.5, 10.0, 12.5};
    const std::vector<double> rates = {0.0025, 0.01, 0.05};

    std::vector<NamedConfig> bases;
    for (const auto& named : grid.configs) {
        const std::string base_id = named.id.substr(0, named.id.find("_div"));
        if (bases.empty() || bases.back().id != base_id) bases.push_back({base_id, named.config});
    }
    grid.configs.clear();

    for (const auto& base : bases)
        for (double divisor : divisors)
            for (double rate : rates) {
                SynthConfig cfg = base.config;
                cfg.noise_divisor = divisor;
                cfg.outlier_rate = rate;
                grid.configs.push_back(
                    {base.id + "_div" + format_double(divisor) + "_rate" + format_double(rate),
                     std::move(cfg)});
            }

    grid.seeds.clear();
    for (std::uint64_t s = 1; s <= 30; ++s) grid.seeds.push_back(s);
    grid.forest = ForestParams::paper_defaults(0);
    return grid;
}

/// Sweep extension points. skip_block lets a resumed run bypass finished
/// (config, seed) blocks; block_done fires under a mutex after each block
/// with that block's rows, so callers can checkpoint incrementally.
struct SweepHooks {
    std::function<bool(const std::string& config_id, std::uint64_t seed)> skip_block;
    std::function<void(const std::string& config_id, std::uint64_t seed,
                       std::span<const BenchResult> results,
                       std::span<const BenchFailure> failures, std::size_t done,
                       std::size_t total)>
        block_done;
};

/// Runs the grid. Each (config, seed) block synthesizes one cube and
/// evaluates every estimator on it; blocks run in parallel, and per-run
/// seeds are derived from (seed, config id), so results do not depend on
/// thread count or execution order. Failures are recorded, not fatal.
inline BenchOutcome bench_sweep(const BenchGrid& grid, unsigned threads = 1,
                                const SweepHooks& hooks = {}) {
    if (grid.configs.empty() || grid.seeds.empty() || grid.estimators.empty())
        throw ConfigError("bench grid needs configs, seeds, and estimators");

    struct Slot {
        std::optional<BenchResult> result;
        std::optional<BenchFailure> failure;
    };
    const std::size_t blocks = grid.configs.size() * grid.seeds.size();
    const std::size_t runs = blocks * grid.estimators.size();
    std::vector<Slot> slots(runs);

    std::atomic<std::size_t> next_block{0};
    std::atomic<std::size_t> done_blocks{0};
    std::mutex hook_mutex;

    auto run_block = [&](std::size_t block, std::vector<BenchResult>& block_results,
                         std::vector<BenchFailure>& block_failures) {
        const std::size_t ci = block / grid.seeds.size();
        const std::size_t si = block % grid.seeds.size();
        const auto& named = grid.configs[ci];
        const std::uint64_t seed = grid.seeds[si];

        auto fail_all = [&](const std::string& message) {
            for (auto kind : grid.estimators)
                block_failures.push_back(
                    BenchFailure{named.id, seed, std::string(estimator_name(kind)), message});
        };

        std::optional<LabeledCube> lc;
        try {
            SynthConfig cfg = named.config;
            cfg.seed = derive_seed(seed, named.id);
            lc = synthesize(cfg);
        } catch (const Error& e) {
            fail_all(e.what());
            return;
        }

        const std::uint64_t forest_seed = derive_seed(lc->config.seed, "forest");
        for (const EstimatorKind kind : grid.estimators) {
            try {
                const auto start = std::chrono::steady_clock::now();
                ForestParams fp = grid.forest;
                fp.seed = forest_seed;
                const FittedEstimator fitted = fit_estimator(lc->cube, kind, fp, 1);
                const DetectionResult det = detect(lc->cube, fitted, grid.tau);
                const Confusion conf = confusion(det.records, lc->outlier_mask);
                const double area = auc(det.records, lc->outlier_mask);
                const auto stop = std::chrono::steady_clock::now();

                BenchResult res;
                res.config_id = named.id;
                res.seed = seed;
                res.estimator = kind;
                res.counts = conf.counts;
                res.rates = conf.rates;
                res.auc = area;
                res.rho_converged = det.rho.converged;
                res.runtime_seconds = std::chrono::duration<double>(stop - start).count();
                block_results.push_back(std::move(res));
            } catch (const Error& err) {
                block_failures.push_back(
                    BenchFailure{named.id, seed, std::string(estimator_name(kind)), err.what()});
            }
        }
    };

    auto worker = [&] {
        std::vector<BenchResult> block_results;
        std::vector<BenchFailure> block_failures;
        while (true) {
            const std::size_t block = next_block.fetch_add(1);
            if (block >= blocks) return;

            const std::size_t ci = block / grid.seeds.size();
            const std::size_t si = block % grid.seeds.size();
            const std::string& config_id = grid.configs[ci].id;
            const std::uint64_t seed = grid.seeds[si];

            block_results.clear();
            block_failures.clear();
            const bool skipped =
                hooks.skip_block && hooks.skip_block(config_id, seed);
            if (!skipped) run_block(block, block_results, block_failures);

            const std::size_t slot_base = block * grid.estimators.size();
            for (std::size_t i = 0; i < block_results.size(); ++i) {
                const auto e = static_cast<std::size_t>(
                    std::find(grid.estimators.begin(), grid.estimators.end(),
                              block_results[i].estimator) -
                    grid.estimators.begin());
                slots[slot_base + e].result = block_results[i];
            }
            for (std::size_t i = 0; i < block_failures.size(); ++i) {
                const auto it = std::find_if(
                    grid.estimators.begin(), grid.estimators.end(), [&](EstimatorKind k) {
                        return estimator_name(k) == block_failures[i].estimator;
                    });
                const auto e = static_cast<std::size_t>(it - grid.estimators.begin());
                slots[slot_base + e].failure = block_failures[i];
            }

            const std::size_t done = done_blocks.fetch_add(1) + 1;
            if (hooks.block_done && !skipped) {
                std::lock_guard<std::mutex> lock(hook_mutex);
                hooks.block_done(config_id, seed, block_results, block_failures, done, blocks);
            }
        }
    };

    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        const unsigned workers = std::min<std::size_t>(threads, blocks);
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    BenchOutcome outcome;
    for (auto& slot : slots) {
        if (slot.result) outcome.results.push_back(std::move(*slot.result));
        if (slot.failure) outcome.failures.push_back(std::move(*slot.failure));
    }
    return outcome;
}

struct AdjustedAuc {
    std::string config_id;
    std::uint64_t seed = 0;
    EstimatorKind estimator = EstimatorKind::S75;
    double auc = 0.0;
    double adjusted = 0.0;
};

/// Subtracts the per-(config, seed) mean AUC from each estimator's AUC so
/// cube difficulty cancels out. Every block must contain every estimator
/// exactly once.
inline std::vector<AdjustedAuc> adjusted_auc(std::span<const BenchResult> results) {
    std::set<EstimatorKind> all_estimators;
    for (const auto& r : results) all_estimators.insert(r.estimator);

    std::map<std::pair<std::string, std::uint64_t>, std::vector<std::size_t>> blocks;
    for (std::size_t i = 0; i < results.size(); ++i)
        blocks[{results[i].config_id, results[i].seed}].push_back(i);

    std::vector<double> block_mean(results.size(), 0.0);
    for (const auto& [key, members] : blocks) {
        std::set<EstimatorKind> seen;
        double sum = 0.0;
        for (auto i : members) {
            if (!seen.insert(results[i].estimator).second)
                throw IncompleteBlock("duplicate estimator '" +
                                      std::string(estimator_name(results[i].estimator)) +
                                      "' in block " + key.first + " seed " +
                                      std::to_string(key.second));
            sum += results[i].auc;
        }
        if (seen != all_estimators)
            throw IncompleteBlock("block " + key.first + " seed " + std::to_string(key.second) +
                                  " is missing estimators, so adjusted AUC is not comparable");
        const double mu = sum / static_cast<double>(members.size());
        for (auto i : members) block_mean[i] = mu;
    }

    std::vector<AdjustedAuc> out;
    out.reserve(results.size());
    for (std::size_t i = 0; i < results.size(); ++i)
        out.push_back({results[i].config_id, results[i].seed, results[i].estimator,
                       results[i].auc, results[i].auc - block_mean[i]});
    return out;
}

inline void write_results_csv(std::ostream& out, std::span<const BenchResult> results) {
    out << "config,seed,estimator,sensitivity,specificity,accuracy,auc,"
           "sensitivity_defined,specificity_defined,rho_converged\n";
    for (const auto& r : results) {
        out << csv_escape(r.config_id, ',') << ',' << r.seed << ',' << estimator_name(r.estimator)
            << ',' << format_double(r.rates.sensitivity) << ','
            << format_double(r.rates.specificity) << ',' << format_double(r.rates.accuracy) << ','
            << format_double(r.auc) << ',' << (r.rates.sensitivity_defined ? '1' : '0') << ','
            << (r.rates.specificity_defined ? '1' : '0') << ',' << (r.rho_converged ? '1' : '0')
            << '\n';
    }
}

/// Wall-clock sidecar; kept out of results.csv so that file is byte-stable
/// across machines.
inline void write_timings_csv(std::ostream& out, std::span<const BenchResult> results) {
    out << "config,seed,estimator,runtime_seconds\n";
    for (const auto& r : results)
        out << csv_escape(r.config_id, ',') << ',' << r.seed << ','
            << estimator_name(r.estimator) << ',' << format_double(r.runtime_seconds) << '\n';
}

inline void write_adjusted_csv(std::ostream& out, std::span<const AdjustedAuc> rows) {
    out << "config,seed,estimator,auc,adjusted_auc\n";
    for (const auto& r : rows)
        out << csv_escape(r.config_id, ',') << ',' << r.seed << ','
            << estimator_name(r.estimator) << ',' << format_double(r.auc) << ','
            << format_double(r.adjusted) << '\n';
}

inline void write_failures_csv(std::ostream& out, std::span<const BenchFailure> failures) {
    out << "config,seed,estimator,error\n";
    for (const auto& f : failures)
        out << csv_escape(f.config_id, ',') << ',' << f.seed << ',' << f.estimator << ','
            << csv_escape(f.error, ',') << '\n';
}

/// Aligned mean-per-estimator table, one row per estimator: estimator,
/// sensitivity, specificity, accuracy, auc, runs.
inline void write_summary(std::ostream& out, std::span<const BenchResult> results) {
    struct Acc {
        double sens = 0, spec = 0, acc = 0, auc = 0;
        std::size_t n = 0;
    };
    std::map<EstimatorKind, Acc> byest;
    for (const auto& r : results) {
        auto& a = byest[r.estimator];
        a.sens += r.rates.sensitivity;
        a.spec += r.rates.specificity;
        a.acc += r.rates.accuracy;
        a.auc += r.auc;
        a.n += 1;
    }

    const auto fmt = [](double v) {
        std::ostringstream ss;
        ss << std::fixed << std::setprecision(4) << v;
        return ss.str();
    };

    out << std::left << std::setw(10) << "estimator" << std::right << std::setw(12)
        << "sensitivity" << std::setw(12) << "specificity" << std::setw(12) << "accuracy"
        << std::setw(12) << "auc" << std::setw(8) << "runs" << '\n';
    for (auto kind : kAllEstimators) {
        const auto it = byest.find(kind);
        if (it == byest.end()) continue;
        const auto& a = it->second;
        const auto n = static_cast<double>(a.n);
        out << std::left << std::setw(10) << estimator_name(kind) << std::right << std::setw(12)
            << fmt(a.sens / n) << std::setw(12) << fmt(a.spec / n) << std::setw(12)
            << fmt(a.acc / n) << std::setw(12) << fmt(a.auc / n) << std::setw(8) << a.n << '\n';
    }
}

}  // namespace rodd
