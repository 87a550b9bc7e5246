#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "rodd/rodd.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string iso_timestamp() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

unsigned resolve_threads(unsigned flag_value) {
    if (flag_value > 0) return flag_value;
    if (const char* env = std::getenv("RODD_THREADS")) {
        const std::string text(env);
        std::size_t pos = 0;
        unsigned long value = 0;
        try {
            value = std::stoul(text, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != text.size() || value == 0)
            throw rodd::ConfigError("RODD_THREADS must be a positive integer, not '" + text +
                                    "'");
        return static_cast<unsigned>(value);
    }
    return 1;
}

/// Manifest sits next to the artifact it describes: scores.csv ->
/// scores.csv.manifest.json, cube dir -> dir.manifest.json.
fs::path manifest_path_for(const fs::path& artifact) {
    std::string s = artifact.string();
    while (s.size() > 1 && s.back() == '/') s.pop_back();
    return fs::path(s + ".manifest.json");
}

void write_manifest(const fs::path& path, const std::string& command, const json& config,
                    const std::vector<std::string>& outputs, const std::string& started,
                    const std::string& finished) {
    const json manifest{{"command", command},     {"version", rodd::kVersion},
                        {"config", config},       {"outputs", outputs},
                        {"started_at", started},  {"finished_at", finished}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw rodd::ParseError("cannot write '" + path.string() + "'");
    out << manifest.dump(2) << '\n';
}

json read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw rodd::ParseError("cannot open '" + path.string() + "'");
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::exception& e) {
        throw rodd::ParseError("bad JSON in '" + path.string() + "': " + e.what());
    }
}

std::vector<rodd::EstimatorKind> parse_estimator_list(const std::string& text) {
    if (text == "all")
        return {rodd::kAllEstimators.begin(), rodd::kAllEstimators.end()};
    std::vector<rodd::EstimatorKind> kinds;
    std::size_t begin = 0;
    while (begin <= text.size()) {
        const std::size_t end = std::min(text.find(',', begin), text.size());
        const std::string name = text.substr(begin, end - begin);
        const auto kind = rodd::parse_estimator(name);
        if (!kind)
            throw rodd::ConfigError("unknown estimator '" + name +
                                    "' (expected s75, s60, s90, median, rf, or all)");
        if (std::find(kinds.begin(), kinds.end(), *kind) != kinds.end())
            throw rodd::ConfigError("estimator '" + name + "' listed twice");
        kinds.push_back(*kind);
        begin = end + 1;
    }
    return kinds;
}

// ---------------------------------------------------------------- detect

struct DetectArgs {
    std::string input;
    std::vector<std::string> dims;
    std::string measure = "value";
    std::string estimator = "s75";
    double tau = rodd::kDefaultTau;
    std::uint64_t seed = 0;
    std::string output;
    std::string format = "csv";
    std::uint32_t trees = 0;  // 0 keeps the preset's tree count
    bool paper_params = false;
    unsigned threads = 0;
};

json detect_config_json(const DetectArgs& a, const rodd::ForestParams& forest, bool is_rf) {
    json cfg{{"input", a.input},   {"dims", a.dims},          {"measure", a.measure},
             {"estimator", a.estimator}, {"tau", a.tau},      {"seed", a.seed},
             {"output", a.output}, {"format", a.format},      {"trees", a.trees},
             {"paper_params", a.paper_params}};
    if (is_rf) cfg["forest"] = forest;
    return cfg;
}

void run_detect(const DetectArgs& args) {
    const std::string started = iso_timestamp();
    const auto kind = rodd::parse_estimator(args.estimator);
    if (!kind)
        throw rodd::ConfigError("unknown estimator '" + args.estimator +
                                "' (expected s75, s60, s90, median, or rf)");
    if (args.tau < 0.0) throw rodd::ConfigError("tau must be non-negative");
    if (args.dims.empty()) throw rodd::ConfigError("at least one dimension column is required");
    if (args.format != "csv" && args.format != "json")
        throw rodd::ConfigError("format must be csv or json, not '" + args.format + "'");

    const rodd::DataCube cube = rodd::read_cube_csv(args.input, args.dims, args.measure);

    rodd::ForestParams forest = args.paper_params
                                    ? rodd::ForestParams::paper_defaults(0)
                                    : rodd::ForestParams::desk_defaults(0);
    if (args.trees > 0) forest.n_trees = args.trees;
    forest.seed = rodd::derive_seed(args.seed, "forest");

    const rodd::FittedEstimator fitted =
        rodd::fit_estimator(cube, *kind, forest, resolve_threads(args.threads));
    const rodd::DetectionResult result = rodd::detect(cube, fitted, args.tau);

    if (!result.rho.converged)
        std::cerr << "note: variance exponent fit did not converge; using clamped rho = "
                  << rodd::format_double(result.rho.rho) << '\n';

    std::ofstream out(args.output, std::ios::binary);
    if (!out) throw rodd::ParseError("cannot write '" + args.output + "'");
    if (args.format == "csv") {
        rodd::write_scores_csv(out, result);
    } else {
        const auto seed = *kind == rodd::EstimatorKind::Rf
                              ? std::optional<std::uint64_t>(args.seed)
                              : std::nullopt;
        out << rodd::scores_to_json(result, seed).dump(2) << '\n';
    }
    out.close();

    write_manifest(manifest_path_for(args.output), "detect",
                   detect_config_json(args, forest, *kind == rodd::EstimatorKind::Rf),
                   {args.output}, started, iso_timestamp());
}

// ----------------------------------------------------------------- synth

struct SynthArgs {
    std::uint64_t seed = 1;
    double outlier_rate = 0.01;
    double noise_divisor = 5.0;
    std::vector<std::uint32_t> dims;  // empty keeps the 12,9,10 default
    std::string config_file;
    std::string out;
};

rodd::SynthConfig build_synth_config(const SynthArgs& args) {
    if (!args.config_file.empty()) {
        std::ifstream in(args.config_file);
        if (!in) throw rodd::ParseError("cannot open '" + args.config_file + "'");
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw rodd::ParseError("bad JSON in '" + args.config_file + "': " + e.what());
        }
        return rodd::SynthConfig::from_json(j);
    }

    rodd::SynthConfig cfg;
    cfg.dims = {{"month", 12, 80, 120}, {"product", 9, 60, 140}, {"city", 10, 90, 110}};
    cfg.interaction_lo = -10;
    cfg.interaction_hi = 10;
    if (!args.dims.empty()) {
        std::vector<rodd::SynthConfig::DimSpec> dims;
        for (std::size_t i = 0; i < args.dims.size(); ++i) {
            rodd::SynthConfig::DimSpec spec =
                i < cfg.dims.size() ? cfg.dims[i]
                                    : rodd::SynthConfig::DimSpec{"dim" + std::to_string(i), 0,
                                                                 80, 120};
            spec.categories = args.dims[i];
            dims.push_back(std::move(spec));
        }
        cfg.dims = std::move(dims);
    }
    cfg.outlier_rate = args.outlier_rate;
    cfg.noise_divisor = args.noise_divisor;
    cfg.seed = args.seed;
    cfg.validate();
    return cfg;
}

void run_synth(const SynthArgs& args) {
    const std::string started = iso_timestamp();
    const rodd::SynthConfig cfg = build_synth_config(args);
    const rodd::LabeledCube lc = rodd::synthesize(cfg);
    rodd::save_labeled_cube(args.out, lc);

    const fs::path dir(args.out);
    std::vector<std::string> outputs;
    for (const char* name : {"cube.csv", "noiseless.csv", "mask.csv", "config.json"})
        outputs.push_back((dir / name).string());
    write_manifest(manifest_path_for(args.out), "synth",
                   json{{"out", args.out}, {"synth_config", cfg.to_json()}}, outputs, started,
                   iso_timestamp());
}

// ----------------------------------------------------------------- bench

struct BenchArgs {
    std::string profile = "desk";
    std::string estimators = "all";
    std::uint32_t seeds = 0;  // 0 keeps the profile's seed list
    double tau = rodd::kDefaultTau;
    std::string out;
    bool resume = false;
    unsigned threads = 0;
};

json bench_config_json(const BenchArgs& args, const rodd::BenchGrid& grid) {
    json configs = json::array();
    for (const auto& named : grid.configs)
        configs.push_back({{"id", named.id}, {"config", named.config.to_json()}});
    json estimators = json::array();
    for (auto kind : grid.estimators) estimators.push_back(rodd::estimator_name(kind));
    return json{{"profile", args.profile}, {"estimators", estimators},
                {"seeds", grid.seeds},     {"tau", grid.tau},
                {"forest", grid.forest},   {"configs", std::move(configs)},
                {"out", args.out}};
}

std::uint64_t parse_u64_field(const std::string& text, const std::string& context) {
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(text, &pos);
        if (pos != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw rodd::ParseError("bad integer '" + text + "' in " + context);
    }
}

using DoneSet = std::set<std::pair<std::string, std::uint64_t>>;

DoneSet load_done_blocks(const fs::path& path) {
    DoneSet done;
    if (!fs::exists(path)) return done;
    std::ifstream in(path);
    const auto rows = rodd::read_csv_rows(in, ',');
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != 2)
            throw rodd::ParseError("bad row in '" + path.string() + "'");
        done.insert({rows[r][0], parse_u64_field(rows[r][1], path.string())});
    }
    return done;
}

std::vector<rodd::BenchResult> load_partial_results(const fs::path& path, const DoneSet& done) {
    std::vector<rodd::BenchResult> results;
    if (!fs::exists(path)) return results;
    std::ifstream in(path);
    const auto rows = rodd::read_csv_rows(in, ',');
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != 11)
            throw rodd::ParseError("bad row " + std::to_string(r + 1) + " in '" + path.string() +
                                   "'");
        rodd::BenchResult res;
        res.config_id = row[0];
        res.seed = parse_u64_field(row[1], path.string());
        if (!done.count({res.config_id, res.seed})) continue;  // block never finished
        const auto kind = rodd::parse_estimator(row[2]);
        if (!kind) throw rodd::ParseError("bad estimator '" + row[2] + "' in '" + path.string() + "'");
        res.estimator = *kind;
        res.rates.sensitivity = rodd::parse_double(row[3], "partial results");
        res.rates.specificity = rodd::parse_double(row[4], "partial results");
        res.rates.accuracy = rodd::parse_double(row[5], "partial results");
        res.auc = rodd::parse_double(row[6], "partial results");
        res.rates.sensitivity_defined = row[7] == "1";
        res.rates.specificity_defined = row[8] == "1";
        res.rates.accuracy_defined = true;
        res.rho_converged = row[9] == "1";
        res.runtime_seconds = rodd::parse_double(row[10], "partial results");
        results.push_back(std::move(res));
    }
    return results;
}

std::vector<rodd::BenchFailure> load_partial_failures(const fs::path& path, const DoneSet& done) {
    std::vector<rodd::BenchFailure> failures;
    if (!fs::exists(path)) return failures;
    std::ifstream in(path);
    const auto rows = rodd::read_csv_rows(in, ',');
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != 4)
            throw rodd::ParseError("bad row " + std::to_string(r + 1) + " in '" + path.string() +
                                   "'");
        rodd::BenchFailure f{row[0], parse_u64_field(row[1], path.string()), row[2], row[3]};
        if (done.count({f.config_id, f.seed})) failures.push_back(std::move(f));
    }
    return failures;
}

void append_partial_result(std::ostream& out, const rodd::BenchResult& r) {
    out << rodd::csv_escape(r.config_id, ',') << ',' << r.seed << ','
        << rodd::estimator_name(r.estimator) << ',' << rodd::format_double(r.rates.sensitivity)
        << ',' << rodd::format_double(r.rates.specificity) << ','
        << rodd::format_double(r.rates.accuracy) << ',' << rodd::format_double(r.auc) << ','
        << (r.rates.sensitivity_defined ? '1' : '0') << ','
        << (r.rates.specificity_defined ? '1' : '0') << ',' << (r.rho_converged ? '1' : '0')
        << ',' << rodd::format_double(r.runtime_seconds) << '\n';
}

/// Returns true when every run failed.
bool run_bench(const BenchArgs& args) {
    const std::string started = iso_timestamp();

    rodd::BenchGrid grid;
    if (args.profile == "desk") {
        grid = rodd::desk_profile();
    } else if (args.profile == "paper") {
        grid = rodd::paper_profile();
        std::cerr << "warning: the paper profile trains 1500-tree forests over "
                  << grid.configs.size() * grid.seeds.size()
                  << " cubes; expect hours of runtime\n";
    } else {
        throw rodd::ConfigError("profile must be desk or paper, not '" + args.profile + "'");
    }
    grid.estimators = parse_estimator_list(args.estimators);
    if (args.seeds > 0) {
        grid.seeds.clear();
        for (std::uint64_t s = 1; s <= args.seeds; ++s) grid.seeds.push_back(s);
    }
    if (args.tau < 0.0) throw rodd::ConfigError("tau must be non-negative");
    grid.tau = args.tau;

    const fs::path dir(args.out);
    fs::create_directories(dir);
    const fs::path manifest_file = dir / "manifest.json";
    const fs::path partial_results_file = dir / "results.partial.csv";
    const fs::path partial_failures_file = dir / "failures.partial.csv";
    const fs::path done_file = dir / "blocks.done.csv";
    const json config = bench_config_json(args, grid);

    DoneSet done;
    std::vector<rodd::BenchResult> results;
    std::vector<rodd::BenchFailure> failures;
    if (args.resume) {
        if (!fs::exists(manifest_file))
            throw rodd::ConfigError("--resume needs an existing manifest at '" +
                                    manifest_file.string() + "'");
        const json previous = read_manifest(manifest_file);
        if (previous.value("config", json()) != config)
            throw rodd::ConfigError(
                "--resume grid differs from the one recorded in the manifest; rerun without "
                "--resume to start over");
        done = load_done_blocks(done_file);
        results = load_partial_results(partial_results_file, done);
        failures = load_partial_failures(partial_failures_file, done);
    } else {
        for (const auto& p : {partial_results_file, partial_failures_file, done_file})
            fs::remove(p);
    }

    write_manifest(manifest_file, "bench", config, {}, started, "");

    const bool fresh_results = !fs::exists(partial_results_file);
    const bool fresh_failures = !fs::exists(partial_failures_file);
    const bool fresh_done = !fs::exists(done_file);
    std::ofstream partial_results(partial_results_file, std::ios::binary | std::ios::app);
    std::ofstream partial_failures(partial_failures_file, std::ios::binary | std::ios::app);
    std::ofstream done_out(done_file, std::ios::binary | std::ios::app);
    if (fresh_results)
        partial_results << "config,seed,estimator,sensitivity,specificity,accuracy,auc,"
                           "sensitivity_defined,specificity_defined,rho_converged,"
                           "runtime_seconds\n";
    if (fresh_failures) partial_failures << "config,seed,estimator,error\n";
    if (fresh_done) done_out << "config,seed\n";

    rodd::SweepHooks hooks;
    hooks.skip_block = [&](const std::string& config_id, std::uint64_t seed) {
        return done.count({config_id, seed}) > 0;
    };
    hooks.block_done = [&](const std::string& config_id, std::uint64_t seed,
                           std::span<const rodd::BenchResult> block_results,
                           std::span<const rodd::BenchFailure> block_failures, std::size_t n,
                           std::size_t total) {
        for (const auto& r : block_results) append_partial_result(partial_results, r);
        for (const auto& f : block_failures)
            partial_failures << rodd::csv_escape(f.config_id, ',') << ',' << f.seed << ','
                             << f.estimator << ',' << rodd::csv_escape(f.error, ',') << '\n';
        partial_results.flush();
        partial_failures.flush();
        done_out << rodd::csv_escape(config_id, ',') << ',' << seed << '\n';
        done_out.flush();
        std::cerr << '[' << n << '/' << total << "] " << config_id << " seed " << seed << '\n';
    };

    rodd::BenchOutcome outcome = rodd::bench_sweep(grid, resolve_threads(args.threads), hooks);
    partial_results.close();
    partial_failures.close();
    done_out.close();

    results.insert(results.end(), outcome.results.begin(), outcome.results.end());
    failures.insert(failures.end(), outcome.failures.begin(), outcome.failures.end());

    std::map<std::string, std::size_t> config_index;
    for (std::size_t i = 0; i < grid.configs.size(); ++i) config_index[grid.configs[i].id] = i;
    std::map<std::uint64_t, std::size_t> seed_index;
    for (std::size_t i = 0; i < grid.seeds.size(); ++i) seed_index[grid.seeds[i]] = i;
    const auto estimator_index = [&](rodd::EstimatorKind kind) {
        return static_cast<std::size_t>(
            std::find(grid.estimators.begin(), grid.estimators.end(), kind) -
            grid.estimators.begin());
    };
    const auto run_key = [&](const std::string& id, std::uint64_t seed, std::size_t est) {
        const auto ci = config_index.find(id);
        const auto si = seed_index.find(seed);
        if (ci == config_index.end() || si == seed_index.end())
            throw rodd::ParseError("partial results reference a run outside the grid (" + id +
                                   ", seed " + std::to_string(seed) + ")");
        return (ci->second * grid.seeds.size() + si->second) * grid.estimators.size() + est;
    };
    std::sort(results.begin(), results.end(), [&](const auto& a, const auto& b) {
        return run_key(a.config_id, a.seed, estimator_index(a.estimator)) <
               run_key(b.config_id, b.seed, estimator_index(b.estimator));
    });
    const auto failure_key = [&](const rodd::BenchFailure& f) {
        const auto kind = rodd::parse_estimator(f.estimator);
        const std::size_t est = kind ? estimator_index(*kind) : grid.estimators.size();
        return run_key(f.config_id, f.seed, est);
    };
    std::sort(failures.begin(), failures.end(),
              [&](const auto& a, const auto& b) { return failure_key(a) < failure_key(b); });

    std::vector<std::string> outputs;
    const auto write_file = [&](const fs::path& path, auto writer) {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw rodd::ParseError("cannot write '" + path.string() + "'");
        writer(out);
        outputs.push_back(path.string());
    };
    write_file(dir / "results.csv",
               [&](std::ostream& o) { rodd::write_results_csv(o, results); });
    write_file(dir / "timings.csv",
               [&](std::ostream& o) { rodd::write_timings_csv(o, results); });
    write_file(dir / "summary.txt", [&](std::ostream& o) { rodd::write_summary(o, results); });

    // Adjusted AUC only makes sense over blocks where every estimator
    // succeeded; failed runs would leave holes.
    {
        DoneSet complete;
        std::map<std::pair<std::string, std::uint64_t>, std::size_t> block_counts;
        for (const auto& r : results) block_counts[{r.config_id, r.seed}] += 1;
        std::vector<rodd::BenchResult> complete_results;
        for (const auto& r : results)
            if (block_counts[{r.config_id, r.seed}] == grid.estimators.size())
                complete_results.push_back(r);
        if (!complete_results.empty()) {
            const auto adjusted = rodd::adjusted_auc(complete_results);
            write_file(dir / "adjusted_auc.csv",
                       [&](std::ostream& o) { rodd::write_adjusted_csv(o, adjusted); });
        }
    }

    if (!failures.empty()) {
        write_file(dir / "failures.csv",
                   [&](std::ostream& o) { rodd::write_failures_csv(o, failures); });
        std::cerr << failures.size() << " of " << results.size() + failures.size()
                  << " runs failed; see failures.csv\n";
    }

    for (const auto& p : {partial_results_file, partial_failures_file, done_file})
        fs::remove(p);

    write_manifest(manifest_file, "bench", config, outputs, started, iso_timestamp());
    rodd::write_summary(std::cout, results);
    return results.empty();
}

// ---------------------------------------------------------------- replay

struct ReplayArgs {
    std::string manifest;
    std::string out_override;
};

void run_replay(const ReplayArgs& args) {
    const json manifest = read_manifest(args.manifest);
    std::string command;
    json config;
    try {
        command = manifest.at("command").get<std::string>();
        config = manifest.at("config");
    } catch (const json::exception& e) {
        throw rodd::ParseError("manifest '" + args.manifest + "' is missing fields: " + e.what());
    }

    if (command == "detect") {
        DetectArgs d;
        try {
            d.input = config.at("input").get<std::string>();
            d.dims = config.at("dims").get<std::vector<std::string>>();
            d.measure = config.at("measure").get<std::string>();
            d.estimator = config.at("estimator").get<std::string>();
            d.tau = config.at("tau").get<double>();
            d.seed = config.at("seed").get<std::uint64_t>();
            d.output = config.at("output").get<std::string>();
            d.format = config.at("format").get<std::string>();
            d.trees = config.at("trees").get<std::uint32_t>();
            d.paper_params = config.at("paper_params").get<bool>();
        } catch (const json::exception& e) {
            throw rodd::ParseError("bad detect manifest: " + std::string(e.what()));
        }
        if (!args.out_override.empty()) d.output = args.out_override;
        run_detect(d);
    } else if (command == "synth") {
        SynthArgs s;
        rodd::SynthConfig cfg;
        try {
            s.out = config.at("out").get<std::string>();
            cfg = rodd::SynthConfig::from_json(config.at("synth_config"));
        } catch (const json::exception& e) {
            throw rodd::ParseError("bad synth manifest: " + std::string(e.what()));
        }
        if (!args.out_override.empty()) s.out = args.out_override;
        const std::string started = iso_timestamp();
        const rodd::LabeledCube lc = rodd::synthesize(cfg);
        rodd::save_labeled_cube(s.out, lc);
        std::vector<std::string> outputs;
        for (const char* name : {"cube.csv", "noiseless.csv", "mask.csv", "config.json"})
            outputs.push_back((fs::path(s.out) / name).string());
        write_manifest(manifest_path_for(s.out), "synth",
                       json{{"out", s.out}, {"synth_config", cfg.to_json()}}, outputs, started,
                       iso_timestamp());
    } else if (command == "bench") {
        BenchArgs b;
        try {
            b.profile = config.at("profile").get<std::string>();
            b.estimators = "all";
            json est = config.at("estimators");
            std::string joined;
            for (const auto& e : est) {
                if (!joined.empty()) joined += ',';
                joined += e.get<std::string>();
            }
            b.estimators = joined;
            b.seeds = static_cast<std::uint32_t>(config.at("seeds").size());
            b.tau = config.at("tau").get<double>();
            b.out = config.at("out").get<std::string>();
        } catch (const json::exception& e) {
            throw rodd::ParseError("bad bench manifest: " + std::string(e.what()));
        }
        if (!args.out_override.empty()) b.out = args.out_override;
        run_bench(b);
    } else {
        throw rodd::ConfigError("manifest command '" + command + "' is not replayable");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Robust outlier detection in multidimensional data cubes"};
    app.set_version_flag("--version", rodd::kVersion);
    app.require_subcommand(1);

    DetectArgs d;
    auto* detect_cmd =
        app.add_subcommand("detect", "Score a CSV cube and flag outlier cells");
    detect_cmd->add_option("--input", d.input, "Cube CSV file")->required();
    detect_cmd->add_option("--dims", d.dims, "Dimension column names")
        ->required()
        ->delimiter(',');
    detect_cmd->add_option("--measure", d.measure, "Measure column name")
        ->capture_default_str();
    detect_cmd->add_option("--estimator", d.estimator, "s75, s60, s90, median, or rf")
        ->capture_default_str();
    detect_cmd->add_option("--tau", d.tau, "Outlier threshold on the normalized residual")
        ->capture_default_str();
    detect_cmd->add_option("--seed", d.seed, "Seed for the rf estimator")
        ->capture_default_str();
    detect_cmd->add_option("--output", d.output, "Scores file to write")->required();
    detect_cmd->add_option("--format", d.format, "Output format: csv or json")
        ->capture_default_str();
    detect_cmd->add_option("--trees", d.trees, "Override the rf tree count (0 = preset)")
        ->capture_default_str();
    detect_cmd->add_flag("--paper-params", d.paper_params,
                         "Use the full tuned rf preset (1500 trees)");
    detect_cmd->add_option("--threads", d.threads,
                           "Worker threads (0 = RODD_THREADS or 1); never changes results")
        ->capture_default_str();

    SynthArgs s;
    auto* synth_cmd =
        app.add_subcommand("synth", "Generate a labeled benchmark cube directory");
    synth_cmd->add_option("--seed", s.seed, "Cube seed")->capture_default_str();
    synth_cmd->add_option("--outlier-rate", s.outlier_rate, "Fraction of cells made outliers")
        ->capture_default_str();
    synth_cmd->add_option("--noise-divisor", s.noise_divisor,
                          "Noise step is stddev divided by this")
        ->capture_default_str();
    synth_cmd->add_option("--dims", s.dims, "Category counts per dimension")
        ->delimiter(',');
    synth_cmd->add_option("--config", s.config_file,
                          "Full synth config JSON (overrides the other knobs)")
        ->excludes("--dims");
    synth_cmd->add_option("--out", s.out, "Directory to write")->required();

    BenchArgs b;
    auto* bench_cmd =
        app.add_subcommand("bench", "Run the estimator-comparison sweep on synthetic cubes");
    bench_cmd->add_option("--profile", b.profile, "desk (300 runs) or paper (hours)")
        ->capture_default_str();
    bench_cmd->add_option("--estimators", b.estimators, "all or a comma list")
        ->capture_default_str();
    bench_cmd->add_option("--seeds", b.seeds, "Use seeds 1..K (0 = profile default)")
        ->capture_default_str();
    bench_cmd->add_option("--tau", b.tau, "Outlier threshold")->capture_default_str();
    bench_cmd->add_option("--out", b.out, "Directory for results")->required();
    bench_cmd->add_flag("--resume", b.resume, "Continue an interrupted sweep in --out");
    bench_cmd->add_option("--threads", b.threads,
                          "Worker threads (0 = RODD_THREADS or 1); never changes results")
        ->capture_default_str();

    ReplayArgs r;
    auto* replay_cmd =
        app.add_subcommand("replay", "Re-run a command from its manifest, bit-exactly");
    replay_cmd->add_option("--manifest", r.manifest, "Manifest JSON written by a previous run")
        ->required();
    replay_cmd->add_option("--out", r.out_override, "Redirect the primary output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*detect_cmd) {
            run_detect(d);
        } else if (*synth_cmd) {
            run_synth(s);
        } else if (*bench_cmd) {
            if (run_bench(b)) {
                std::cerr << "error: every run in the sweep failed\n";
                return 3;
            }
        } else if (*replay_cmd) {
            run_replay(r);
        }
    } catch (const rodd::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.kind() == rodd::ErrorKind::Validation ? 2 : 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
