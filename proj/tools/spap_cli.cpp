// Command-line entry point: single episodes, batches and parameter sweeps.
//
// Exit status: 0 success, 1 usage error, 2 runtime error. Progress is reported
// as JSON lines on stderr; results go to the declared output paths.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spap/harness.hpp"

namespace fs = std::filesystem;

namespace {

constexpr const char* kConfigDirEnv = "SPAP_CONFIG_DIR";
constexpr const char* kDefaultConfigName = "default.json";

struct CommonOptions {
    std::string config;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int jobs = 1;
    int n_s = 0;
    bool timing = false;
    bool quiet = false;
};

// Explicit path first; relative paths that do not exist are retried under
// $SPAP_CONFIG_DIR. Without --config, $SPAP_CONFIG_DIR/default.json is used
// when present, else the built-in defaults.
spap::ScenarioConfig resolve_config(const CommonOptions& o) {
    const char* dir = std::getenv(kConfigDirEnv);
    fs::path path;
    if (!o.config.empty()) {
        path = o.config;
        if (!fs::exists(path) && path.is_relative() && dir) path = fs::path(dir) / o.config;
        if (!fs::exists(path)) throw std::runtime_error("config file not found: " + o.config);
    } else if (dir && fs::exists(fs::path(dir) / kDefaultConfigName)) {
        path = fs::path(dir) / kDefaultConfigName;
    }
    spap::ScenarioConfig cfg = path.empty() ? spap::ScenarioConfig{} : spap::load_config(path.string());
    if (o.seed_set) cfg.seed = o.seed;
    if (o.n_s > 0) cfg.N_s = o.n_s;
    return spap::validate(cfg);
}

spap::BatchOptions batch_options(const CommonOptions& o, const std::string& label) {
    spap::BatchOptions b;
    b.jobs = o.jobs;
    if (!o.quiet) {
        b.progress = [label](int done, int total) {
            if (done == total || done % 50 == 0)
                std::cerr << R"({"event":"progress","task":")" << label << R"(","done":)" << done
                          << R"(,"total":)" << total << "}\n";
        };
    }
    return b;
}

void write_file(const std::string& path, const std::string& content) {
    if (const fs::path parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << content;
    if (!f) throw std::runtime_error("write failed: " + path);
}

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config", o.config, "Scenario config (JSON); relative paths also searched in $SPAP_CONFIG_DIR");
    cmd->add_option_function<std::uint64_t>(
        "--seed", [&o](std::uint64_t s) { o.seed = s; o.seed_set = true; }, "Base seed (overrides the config)");
    cmd->add_option("--jobs", o.jobs, "Parallel episodes")->check(CLI::PositiveNumber);
    cmd->add_option("--ns", o.n_s, "Samples per route N_s (overrides the config)")->check(CLI::PositiveNumber);
    cmd->add_flag("--timing", o.timing, "Append wall-clock planning-time columns (not reproducible)");
    cmd->add_flag("--quiet", o.quiet, "Suppress progress lines");
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        const int v = std::stoi(item, &used);
        if (used != item.size()) throw std::invalid_argument("not an integer: " + item);
        out.push_back(v);
    }
    if (out.empty()) throw std::invalid_argument("empty list");
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Highway lane-change simulator with speculative planning"};
    app.require_subcommand(1, 1);

    CommonOptions common;

    auto* run = app.add_subcommand("run", "Run one episode and print its summary");
    std::string run_planner = "spap";
    std::string run_trace, run_out;
    add_common(run, common);
    run->add_option("--planner", run_planner, "Planner name")->check(CLI::IsMember(spap::planner_names()));
    run->add_option("--trace", run_trace, "Write the per-step JSON trace here");
    run->add_option("--out", run_out, "Write a one-row metrics CSV here");

    auto* batch = app.add_subcommand("batch", "Run seeded episodes and aggregate metrics");
    std::vector<std::string> batch_planners{"spap"};
    int batch_n = 1000;
    std::string batch_out = "metrics.csv", trace_dir;
    add_common(batch, common);
    batch->add_option("--planner", batch_planners, "Planner name(s); one row each")
        ->delimiter(',')
        ->check(CLI::IsMember(spap::planner_names()));
    batch->add_option("--n", batch_n, "Episodes per planner")->check(CLI::PositiveNumber);
    batch->add_option("--out", batch_out, "Metrics CSV path");
    batch->add_option("--trace-dir", trace_dir, "Write one JSON trace per episode into this directory");

    auto* sp1 = app.add_subcommand("sweep-p1", "Sweep p1 with p2 = 0.8 - p1 and p3 = 0.2");
    std::vector<std::string> sp1_planners{"idm1", "idm2", "idm3", "mpc", "spap"};
    std::string sp1_grid = "0:0.8:0.2", sp1_out = "sweep_p1.csv";
    int sp1_n = 1000;
    add_common(sp1, common);
    sp1->add_option("--planner", sp1_planners, "Planner names")
        ->delimiter(',')
        ->check(CLI::IsMember(spap::planner_names()));
    sp1->add_option("--grid", sp1_grid, "p1 grid lo:hi:step (inclusive)");
    sp1->add_option("--n", sp1_n, "Episodes per point and planner")->check(CLI::PositiveNumber);
    sp1->add_option("--out", sp1_out, "CSV path");

    auto* sns = app.add_subcommand("sweep-ns", "Sweep the SPAP sample count N_s");
    std::string sns_grid = "10,50,100,200", sns_out = "sweep_ns.csv";
    int sns_n = 1000;
    add_common(sns, common);
    sns->add_option("--grid", sns_grid, "Comma-separated N_s values");
    sns->add_option("--n", sns_n, "Episodes per point")->check(CLI::PositiveNumber);
    sns->add_option("--out", sns_out, "CSV path");

    auto* vc = app.add_subcommand("validate-config", "Check a config file and list every violated invariant");
    std::string vc_path;
    std::string vc_dump;
    vc->add_option("config", vc_path, "Config path")->required();
    vc->add_option("--dump", vc_dump, "Write the fully populated config here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    // Argument-shape problems detected after parsing are usage errors too.
    std::vector<double> p1_grid;
    std::vector<int> ns_grid;
    try {
        if (*sp1) p1_grid = spap::parse_grid(sp1_grid);
        if (*sns) ns_grid = parse_int_list(sns_grid);
    } catch (const std::exception& e) {
        std::cerr << "usage error: " << e.what() << "\n" << app.help();
        return 1;
    }

    try {
        if (*vc) {
            const auto problems = spap::check(spap::load_config(vc_path));
            if (!problems.empty()) {
                for (const auto& p : problems) std::cerr << "invalid: " << p << "\n";
                return 2;
            }
            if (!vc_dump.empty()) write_file(vc_dump, spap::to_json(spap::load_config(vc_path)) + "\n");
            std::cout << "{\"valid\":true}\n";
            return 0;
        }

        const spap::ScenarioConfig cfg = resolve_config(common);
        if (*run) {
            spap::EpisodeOptions eo;
            eo.keep_trace = !run_trace.empty();
            const auto ep = spap::run_episode(cfg, run_planner, cfg.seed, eo);
            if (!run_trace.empty()) write_file(run_trace, spap::episode_to_json(ep) + "\n");
            if (!run_out.empty()) {
                std::ostringstream os;
                spap::write_metrics_csv(os, {spap::aggregate(run_planner, {ep})}, common.timing);
                write_file(run_out, os.str());
            }
            std::cout << R"({"planner":")" << run_planner << R"(","seed":)" << ep.seed
                      << R"(,"route":")" << spap::route_name(ep.truth.route) << R"(","collided":)"
                      << (ep.collided ? "true" : "false") << R"(,"avg_speed":)" << ep.avg_speed
                      << R"(,"final_speed":)" << ep.final_speed << "}\n";
        } else if (*batch) {
            std::vector<spap::Metrics> rows;
            for (const auto& name : batch_planners) {
                auto bo = batch_options(common, name);
                if (!trace_dir.empty()) {
                    bo.episode.keep_trace = true;
                    bo.on_episode = [&trace_dir, &name](const spap::EpisodeResult& ep) {
                        write_file((fs::path(trace_dir) / (name + "_" + std::to_string(ep.seed) + ".json")).string(),
                                   spap::episode_to_json(ep) + "\n");
                    };
                }
                rows.push_back(spap::run_batch(cfg, name, batch_n, cfg.seed, bo));
            }
            std::ostringstream os;
            spap::write_metrics_csv(os, rows, common.timing);
            write_file(batch_out, os.str());
        } else if (*sp1) {
            const auto rows = spap::sweep_p1(cfg, sp1_planners, p1_grid, sp1_n, cfg.seed, batch_options(common, "sweep-p1"));
            std::ostringstream os;
            spap::write_sweep_p1_csv(os, rows, common.timing);
            write_file(sp1_out, os.str());
        } else if (*sns) {
            const auto rows = spap::sweep_ns(cfg, ns_grid, sns_n, cfg.seed, batch_options(common, "sweep-ns"));
            std::ostringstream os;
            spap::write_sweep_ns_csv(os, rows, common.timing);
            write_file(sns_out, os.str());
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
