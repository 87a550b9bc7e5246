// Acceptance gate: ten end-to-end checks, one pass/fail line each.
// Runs the full desk sweep, so expect a few minutes of wall time.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <limits>
#include <map>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <sys/wait.h>

#include "rodd/rodd.hpp"

#include "oracles.hpp"
#include "temp_dir.hpp"

#ifndef RODD_CLI_PATH
#error "RODD_CLI_PATH must point at the rodd binary"
#endif

namespace {

unsigned worker_threads() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

std::string fmt(double value, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, value);
    return buf;
}

std::string fmt_e(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3e", value);
    return buf;
}

/// Walks every coordinate of a dense cube in odometer order.
template <typename Fn>
void for_each_coord(const std::vector<std::size_t>& cats, Fn&& fn) {
    std::vector<rodd::CategoryIndex> idx(cats.size(), 0);
    while (true) {
        fn(idx);
        std::size_t d = idx.size();
        while (d > 0) {
            --d;
            if (++idx[d] < cats[d]) break;
            idx[d] = 0;
            if (d == 0) return;
        }
    }
}

std::vector<rodd::Dimension> plain_dimensions(const std::vector<std::size_t>& cats) {
    std::vector<rodd::Dimension> dims(cats.size());
    for (std::size_t d = 0; d < cats.size(); ++d) {
        dims[d].name = "d" + std::to_string(d);
        for (std::size_t c = 0; c < cats[d]; ++c)
            dims[d].categories.push_back(std::string(1, static_cast<char>('a' + c)));
    }
    return dims;
}

/// Dense cube holding exp(g0 + main effects + pairwise effects), with every
/// log value kept strictly positive and modest so the variance-exponent
/// root stays outside the solver's clamp range.
rodd::DataCube log_additive_cube(rodd::Rng& rng, const std::vector<std::size_t>& cats) {
    const std::size_t n = cats.size();
    const double g0 = rng.uniform_real(0.7, 1.0);
    std::vector<std::vector<double>> mains(n);
    for (std::size_t d = 0; d < n; ++d)
        for (std::size_t c = 0; c < cats[d]; ++c)
            mains[d].push_back(rng.uniform_real(-0.06, 0.06));
    std::map<std::pair<std::size_t, std::size_t>, std::vector<std::vector<double>>> pairs;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b) {
            auto& table = pairs[{a, b}];
            table.resize(cats[a]);
            for (auto& row : table)
                for (std::size_t c = 0; c < cats[b]; ++c)
                    row.push_back(rng.uniform_real(-0.025, 0.025));
        }

    std::vector<rodd::Cell> cells;
    for_each_coord(cats, [&](const std::vector<rodd::CategoryIndex>& idx) {
        double log_y = g0;
        for (std::size_t d = 0; d < n; ++d) log_y += mains[d][idx[d]];
        for (const auto& [key, table] : pairs) log_y += table[idx[key.first]][idx[key.second]];
        cells.push_back({rodd::Coordinate{idx}, std::exp(log_y)});
    });
    return rodd::DataCube(plain_dimensions(cats), cells);
}

rodd::DataCube random_positive_cube(rodd::Rng& rng, const std::vector<std::size_t>& cats,
                                    bool integer_valued) {
    std::vector<rodd::Cell> cells;
    for_each_coord(cats, [&](const std::vector<rodd::CategoryIndex>& idx) {
        const double value = integer_valued
                                 ? static_cast<double>(rng.uniform_int(50, 150))
                                 : rng.uniform_real(50.0, 150.0);
        cells.push_back({rodd::Coordinate{idx}, value});
    });
    return rodd::DataCube(plain_dimensions(cats), cells);
}

std::vector<rodd::ScoreRecord> records_from(const std::vector<double>& scores) {
    std::vector<rodd::ScoreRecord> records(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        records[i].coord = rodd::Coordinate{{static_cast<rodd::CategoryIndex>(i)}};
        records[i].raw_score = scores[i];
    }
    return records;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(RODD_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

bool same_bytes(const std::filesystem::path& a, const std::filesystem::path& b) {
    const auto ca = testutil::read_file(a);
    return !ca.empty() && ca == testutil::read_file(b);
}

struct Check {
    bool ok = false;
    std::string detail;
};

}  // namespace

int main() {
    const unsigned threads = worker_threads();
    std::vector<std::pair<int, Check>> checks;

    // ------------------------------------------------- criteria 1 and 2
    {
        Check c1, c2;
        try {
            const auto grid = rodd::desk_profile();
            rodd::SweepHooks hooks;
            hooks.block_done = [](const std::string& id, std::uint64_t seed,
                                  std::span<const rodd::BenchResult>,
                                  std::span<const rodd::BenchFailure>, std::size_t done,
                                  std::size_t total) {
                std::cerr << "[sweep " << done << '/' << total << "] " << id << " seed " << seed
                          << '\n';
            };
            const auto started = std::chrono::steady_clock::now();
            const auto outcome = rodd::bench_sweep(grid, threads, hooks);
            const double sweep_seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                    .count();

            if (!outcome.failures.empty()) {
                c1.detail = std::to_string(outcome.failures.size()) + " runs failed (first: " +
                            outcome.failures.front().error + ")";
                c2.detail = c1.detail;
            } else {
                std::map<rodd::EstimatorKind, double> sum;
                std::map<rodd::EstimatorKind, std::size_t> count;
                for (const auto& r : outcome.results) {
                    sum[r.estimator] += r.auc;
                    count[r.estimator] += 1;
                }
                std::map<rodd::EstimatorKind, double> mean;
                for (auto kind : rodd::kAllEstimators)
                    mean[kind] = sum[kind] / static_cast<double>(count[kind]);

                const double median_auc = mean[rodd::EstimatorKind::Median];
                bool gap_ok = true;
                for (auto kind : {rodd::EstimatorKind::S75, rodd::EstimatorKind::S60,
                                  rodd::EstimatorKind::S90, rodd::EstimatorKind::Rf})
                    gap_ok = gap_ok && median_auc <= mean[kind] - 0.05;
                c1.ok = outcome.results.size() >= 300 &&
                        mean[rodd::EstimatorKind::Rf] > mean[rodd::EstimatorKind::S75] &&
                        gap_ok;
                c1.detail = "mean AUC over " + std::to_string(outcome.results.size()) +
                            " runs: rf " + fmt(mean[rodd::EstimatorKind::Rf]) + ", s75 " +
                            fmt(mean[rodd::EstimatorKind::S75]) + ", s60 " +
                            fmt(mean[rodd::EstimatorKind::S60]) + ", s90 " +
                            fmt(mean[rodd::EstimatorKind::S90]) + ", median " +
                            fmt(median_auc) + " (sweep " + fmt(sweep_seconds, 1) + " s)";

                const double s60 = mean[rodd::EstimatorKind::S60];
                const double s75 = mean[rodd::EstimatorKind::S75];
                const double s90 = mean[rodd::EstimatorKind::S90];
                const double spread =
                    std::max({s60, s75, s90}) - std::min({s60, s75, s90});
                c2.ok = spread <= 0.03;
                c2.detail = "trimmed-mean AUC spread " + fmt(spread) + " (limit 0.03)";
            }
        } catch (const std::exception& e) {
            c1.detail = c2.detail = std::string("exception: ") + e.what();
        }
        checks.push_back({1, c1});
        checks.push_back({2, c2});
    }

    // ----------------------------------------------------- criterion 3
    {
        Check c;
        try {
            rodd::Rng rng(rodd::derive_seed(9000, "exact-recovery"));
            double worst = 0.0;
            for (int t = 0; t < 100; ++t) {
                std::vector<std::size_t> cats(3 + t % 2);
                for (auto& k : cats) k = static_cast<std::size_t>(rng.uniform_int(2, 4));
                const auto cube = log_additive_cube(rng, cats);
                const auto table =
                    rodd::fit_coefficients(cube, rodd::Aggregator::trimmed(0.0));
                const rodd::FittedEstimator fitted(rodd::EstimatorKind::S75, table);
                const auto det = rodd::detect(cube, fitted);
                for (const auto& rec : det.records) worst = std::max(worst, rec.raw_score);
            }
            c.ok = worst < 1e-6;
            c.detail = "100 log-additive cubes, max raw score " + fmt_e(worst) +
                       " (limit 1e-6)";
        } catch (const std::exception& e) {
            c.detail = std::string("exception: ") + e.what();
        }
        checks.push_back({3, c});
    }

    // ----------------------------------------------------- criterion 4
    {
        Check c;
        try {
            rodd::Rng rng(rodd::derive_seed(9001, "rho-oracle"));
            double worst_gap = 0.0, worst_residual_ratio = 0.0;
            bool all_converged = true;
            for (int t = 0; t < 50; ++t) {
                const auto m = static_cast<std::size_t>(rng.uniform_int(5, 40));
                std::vector<double> y(m), y_hat(m);
                std::vector<rodd::RhoPair> pairs(m);
                double scale = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    y_hat[i] = std::exp(rng.uniform_real(0.5, 3.0));
                    y[i] = y_hat[i] * (1.0 + rng.uniform_real(-0.6, 0.6));
                    pairs[i] = {y[i], y_hat[i]};
                    scale += std::abs(std::log(y_hat[i]));
                }
                const auto est = rodd::solve_rho(pairs);
                all_converged = all_converged && est.converged;
                worst_gap = std::max(worst_gap, std::abs(est.rho - oracle::rho_grid_scan(y, y_hat)));
                worst_residual_ratio =
                    std::max(worst_residual_ratio,
                             std::abs(oracle::rho_objective(y, y_hat, est.rho)) / scale);
            }

            const std::vector<rodd::RhoPair> two{{4.0, 2.0}, {10.0, 5.0}, {6.0, 3.0}};
            const double rho_two = rodd::solve_rho(two).rho;
            const std::vector<rodd::RhoPair> zero{{3.0, 2.0}, {4.0, 3.0}, {8.0, 7.0}};
            const double rho_zero = rodd::solve_rho(zero).rho;

            c.ok = all_converged && worst_gap <= 1e-3 && worst_residual_ratio <= 1e-8 &&
                   std::abs(rho_two - 2.0) <= 1e-3 && std::abs(rho_zero) <= 1e-3;
            c.detail = "50 collections: max |rho - oracle| " + fmt_e(worst_gap) +
                       ", max |F|/scale " + fmt_e(worst_residual_ratio) + ", fixtures rho " +
                       fmt(rho_two, 6) + " and " + fmt(rho_zero, 6);
        } catch (const std::exception& e) {
            c.detail = std::string("exception: ") + e.what();
        }
        checks.push_back({4, c});
    }

    // ----------------------------------------------------- criterion 5
    {
        Check c;
        try {
            rodd::Rng rng(rodd::derive_seed(9002, "auc-oracle"));
            double worst = 0.0;
            for (int t = 0; t < 100; ++t) {
                const auto m = static_cast<std::size_t>(rng.uniform_int(4, 80));
                std::vector<double> scores(m);
                for (auto& s : scores)
                    s = t % 2 == 0 ? static_cast<double>(rng.uniform_int(0, 4))
                                   : rng.uniform_real(0.0, 5.0);
                std::vector<int> labels(m, 0);
                std::vector<rodd::Coordinate> mask;
                const auto n_pos = static_cast<std::size_t>(
                    rng.uniform_int(1, static_cast<std::int64_t>(m - 1)));
                for (auto p : rng.sample_indices(m, n_pos)) {
                    labels[p] = 1;
                    mask.push_back(rodd::Coordinate{{static_cast<rodd::CategoryIndex>(p)}});
                }
                std::sort(mask.begin(), mask.end());
                const double rank_auc = rodd::auc(records_from(scores), mask);
                worst = std::max(worst,
                                 std::abs(rank_auc - oracle::auc_threshold_sweep(scores, labels)));
            }
            c.ok = worst <= 1e-9;
            c.detail = "100 labeled sets, max |rank - trapezoid| " + fmt_e(worst) +
                       " (limit 1e-9)";
        } catch (const std::exception& e) {
            c.detail = std::string("exception: ") + e.what();
        }
        checks.push_back({5, c});
    }

    // ----------------------------------------------------- criterion 6
    {
        Check c;
        try {
            rodd::SynthConfig cfg;
            cfg.dims = {{"product", 1, 1, 200}, {"city", 1, 1, 200}, {"month", 1, 1, 200}};

            rodd::Effects eff;
            eff.expected = {{98}, {110}, {91}};
            eff.interactions = {{{3}}, {{0}}, {{4}}};
            const double first = rodd::assemble_noiseless(eff, cfg).cells()[0].measure;

            eff.expected = {{98}, {87}, {93}};
            eff.interactions = {{{0}}, {{-3}}, {{5}}};
            const double second = rodd::assemble_noiseless(eff, cfg).cells()[0].measure;

            c.ok = first == 101.0 && second == 93.0;
            c.detail = "worked single-cell examples gave " + fmt(first, 0) + " and " +
                       fmt(second, 0) + " (want 101 and 93)";
        } catch (const std::exception& e) {
            c.detail = std::string("exception: ") + e.what();
        }
        checks.push_back({6, c});
    }

    // ----------------------------------------------------- criterion 7
    {
        Check c;
        try {
            rodd::Rng rng(rodd::derive_seed(9003, "inject-oracle"));
            std::size_t mismatches = 0, injected_cells = 0;
            for (int t = 0; t < 20; ++t) {
                const auto cube = random_positive_cube(rng, {3, 3, 3}, true);
                rodd::Rng sampling(rodd::derive_seed(9003, "sampling", t));
                const auto [injected, mask] = rodd::inject_outliers(cube, 0.15, sampling);

                std::vector<char> sampled(cube.size(), 0);
                for (std::size_t i = 0; i < cube.size(); ++i)
                    sampled[i] = std::binary_search(mask.begin(), mask.end(),
                                                    cube.cells()[i].coord)
                                     ? 1
                                     : 0;

                for (std::size_t i = 0; i < cube.size(); ++i) {
                    const auto& coord = cube.cells()[i].coord;
                    const double original = cube.cells()[i].measure;
                    const double actual = *injected.value_at(coord);
                    if (!sampled[i]) {
                        if (actual != original) ++mismatches;
                        continue;
                    }
                    ++injected_cells;
                    double best = 0.0;
                    double best_dist = std::numeric_limits<double>::infinity();
                    for (std::size_t d = 0; d < coord.indices.size(); ++d) {
                        const auto [lo, hi] =
                            oracle::slice_bounds_by_scan(cube, sampled, d, coord.indices[d]);
                        for (double candidate : {lo, hi}) {
                            const double dist = std::abs(candidate - original);
                            if (dist < best_dist || (dist == best_dist && candidate < best)) {
                                best = candidate;
                                best_dist = dist;
                            }
                        }
                    }
                    if (actual != best) ++mismatches;
                }
            }
            c.ok = mismatches == 0 && injected_cells == 20 * 4;
            c.detail = "20 cubes, " + std::to_string(injected_cells) + " injected cells, " +
                       std::to_string(mismatches) + " oracle mismatches";
        } catch (const std::exception& e) {
            c.detail = std::string("exception: ") + e.what();
        }
        checks.push_back({7, c});
    }

    // ----------------------------------------------------- criterion 8
    {
        Check c;
        try {
            testutil::TempDir dir("rodd_acceptance");
            std::vector<std::string> problems;
            const auto expect_zero = [&](const std::string& args) {
                const int code = run_cli(args);
                if (code != 0)
                    problems.push_back("exit " + std::to_string(code) + " from: " + args);
            };

            const std::string synth_args = "synth --dims 6,5,4 --seed 77 --outlier-rate 0.05"
                                           " --noise-divisor 5 --out ";
            expect_zero(synth_args + dir.file("sa").string());
            expect_zero(synth_args + dir.file("sb").string());
            for (const char* name : {"cube.csv", "noiseless.csv", "mask.csv", "config.json"})
                if (!same_bytes(dir.file("sa") / name, dir.file("sb") / name))
                    problems.push_back(std::string("synth reruns differ in ") + name);

            const std::string detect_args =
                "detect --input " + (dir.file("sa") / "cube.csv").string() +
                " --dims month,product,city --measure y --estimator rf --seed 5 --trees 80"
                " --output ";
            expect_zero(detect_args + dir.file("ra.csv").string() + " --threads 1");
            expect_zero(detect_args + dir.file("rb.csv").string() + " --threads 4");
            expect_zero(detect_args + dir.file("rc.csv").string() + " --threads 4");
            if (!same_bytes(dir.file("ra.csv"), dir.file("rb.csv")) ||
                !same_bytes(dir.file("ra.csv"), dir.file("rc.csv")))
                problems.push_back("rf scores differ across thread counts or reruns");

            const std::string bench_args =
                "bench --profile desk --seeds 1 --estimators s75,median --out ";
            expect_zero(bench_args + dir.file("ba").string() + " --threads 4");
            expect_zero(bench_args + dir.file("bb").string() + " --threads 2");
            for (const char* name : {"results.csv", "summary.txt", "adjusted_auc.csv"})
                if (!same_bytes(dir.file("ba") / name, dir.file("bb") / name))
                    problems.push_back(std::string("bench reruns differ in ") + name);

            c.ok = problems.empty();
            c.detail = problems.empty()
                           ? "synth, rf detect, and bench byte-identical across reruns "
                             "and thread counts"
                           : problems.front();
        } catch (const std::exception& e) {
            c.detail = std::string("exception: ") + e.what();
        }
        checks.push_back({8, c});
    }

    // ----------------------------------------------------- criterion 9
    {
        Check c;
        try {
            rodd::Rng rng(rodd::derive_seed(9004, "interpolation"));
            double worst = 0.0;
            for (int t = 0; t < 20; ++t) {
                std::vector<std::size_t> cats(2 + t % 2);
                for (auto& k : cats) k = static_cast<std::size_t>(rng.uniform_int(2, 4));
                const auto cube = random_positive_cube(rng, cats, false);

                rodd::ForestParams params;
                params.n_trees = 1;
                params.bootstrap = false;
                params.max_features = rodd::MaxFeatures::all();
                params.max_depth = 60;
                params.min_samples_split = 2;
                params.min_samples_leaf = 1;
                params.seed = rodd::derive_seed(9004, "forest", t);
                const auto forest = rodd::fit_forest(cube, params);

                for (const auto& cell : cube.cells()) {
                    const double predicted = forest.predict(cell.coord);
                    worst = std::max(worst,
                                     std::abs(predicted - cell.measure) / cell.measure);
                }
            }
            c.ok = worst <= 1e-9;
            c.detail = "20 cubes, max relative training error " + fmt_e(worst) +
                       " (limit 1e-9)";
        } catch (const std::exception& e) {
            c.detail = std::string("exception: ") + e.what();
        }
        checks.push_back({9, c});
    }

    // ---------------------------------------------------- criterion 10
    {
        Check c;
        try {
            rodd::SynthConfig cfg;
            cfg.dims = {{"month", 12, 80, 120}, {"product", 9, 60, 140}, {"city", 10, 90, 110}};
            cfg.interaction_lo = -10;
            cfg.interaction_hi = 10;
            cfg.outlier_rate = 0.01;
            cfg.noise_divisor = 5.0;
            cfg.seed = 42;
            const auto lc = rodd::synthesize(cfg);

            const auto timed_detection = [&](rodd::EstimatorKind kind, unsigned n_threads) {
                const auto start = std::chrono::steady_clock::now();
                const auto fitted = rodd::fit_estimator(
                    lc.cube, kind, rodd::ForestParams::desk_defaults(rodd::derive_seed(42, "forest")),
                    n_threads);
                rodd::detect(lc.cube, fitted);
                return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                    .count();
            };

            const double t_s75 = timed_detection(rodd::EstimatorKind::S75, 1);
            const double t_s60 = timed_detection(rodd::EstimatorKind::S60, 1);
            const double t_s90 = timed_detection(rodd::EstimatorKind::S90, 1);
            const double t_median = timed_detection(rodd::EstimatorKind::Median, 1);
            const double t_rf = timed_detection(rodd::EstimatorKind::Rf, threads);

            c.ok = t_s75 < 1.0 && t_s60 < 1.0 && t_s90 < 1.0 && t_median < 1.0 && t_rf < 60.0;
            c.detail = "1080-cell cube: s75 " + fmt(t_s75, 3) + " s, s60 " + fmt(t_s60, 3) +
                       " s, s90 " + fmt(t_s90, 3) + " s, median " + fmt(t_median, 3) +
                       " s (limit 1 s); rf " + fmt(t_rf, 2) + " s (limit 60 s)";
        } catch (const std::exception& e) {
            c.detail = std::string("exception: ") + e.what();
        }
        checks.push_back({10, c});
    }

    int failures = 0;
    for (const auto& [number, check] : checks) {
        std::cout << (check.ok ? "[PASS]" : "[FAIL]") << " criterion " << number << ": "
                  << check.detail << '\n';
        if (!check.ok) ++failures;
    }
    std::cout << (10 - failures) << " of 10 criteria passed\n";
    return failures == 0 ? 0 : 1;
}
