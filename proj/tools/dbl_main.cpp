#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <vector>

#include "dbl/errors.hpp"
#include "dbl/scenario.hpp"
#include "dbl/verify.hpp"
#include "dbl/version.hpp"

namespace {

int cmd_run(const std::string& scenario_path, const std::vector<std::string>& overrides,
            const std::string& out_dir, int threads) {
    try {
        const dbl::ScenarioConfig config = dbl::load_scenario(scenario_path, overrides);
        const std::string dir = dbl::resolve_out_dir(config, out_dir);
        const dbl::RunArtifacts artifacts = dbl::run_scenario(config, dir, threads);
        std::cout << "wrote " << artifacts.files.size() << " artifact(s) to " << artifacts.directory
                  << "\n";
        for (const auto& f : artifacts.files) std::cout << "  " << f << "\n";
        return 0;
    } catch (const dbl::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const dbl::Error& e) {
        std::cerr << "numerical failure (" << e.module() << "/" << e.name() << "): " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

int cmd_verify(const std::string& level, int paths, int threads, std::uint64_t seed) {
    dbl::verify::Options options;
    options.mc_paths = paths;
    options.threads = threads;
    options.seed = seed;
    const auto results =
        level == "full" ? dbl::verify::run_full(options) : dbl::verify::run_quick(options);

    int failures = 0;
    std::cout << std::left;
    for (const auto& r : results) {
        std::cout << (r.pass ? "PASS" : "FAIL") << "  [" << std::setw(2) << r.id << "] " << std::setw(58)
                  << r.name << " (" << std::fixed << std::setprecision(2) << r.seconds << "s)\n";
        if (!r.detail.empty()) std::cout << "        " << r.detail << "\n";
        if (!r.pass) ++failures;
    }
    if (failures > 0) {
        std::cout << failures << " check(s) failed\n";
        return 1;
    }
    std::cout << "all " << results.size() << " checks passed\n";
    return 0;
}

// Pivot a comma-separated table into whitespace-separated columns that
// gnuplot's `plot ... using` can consume directly.
int cmd_gnuplot(const std::string& csv_path) {
    std::ifstream in(csv_path);
    if (!in) {
        std::cerr << "cannot read " << csv_path << "\n";
        return 2;
    }
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string field;
        bool first = true;
        while (std::getline(ss, field, ',')) {
            if (!first) std::cout << "  ";
            std::cout << field;
            first = false;
        }
        std::cout << "\n";
        if (header) header = false;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dynamic Black-Litterman scenario runner"};
    app.set_version_flag("--version", dbl::kVersion);
    app.require_subcommand(1);

    std::string scenario_path, out_dir;
    std::vector<std::string> overrides;
    int threads = 0;
    auto* run = app.add_subcommand("run", "run a scenario file and write CSV artifacts");
    run->add_option("scenario", scenario_path, "scenario JSON file")->required();
    run->add_option("--set", overrides, "override scenario values, e.g. --set experiment.seed=42");
    run->add_option("--out", out_dir, "output directory (overrides scenario and DBL_OUT_DIR)");
    run->add_option("--threads", threads, "worker threads for the simulation");

    std::string level = "quick";
    int paths = 20000;
    int vthreads = 1;
    std::uint64_t seed = 91701;
    auto* verify = app.add_subcommand("verify", "run the invariant and oracle suite");
    verify->add_option("--level", level, "quick (closed forms) or full (adds Monte-Carlo checks)")
        ->check(CLI::IsMember({"quick", "full"}));
    verify->add_option("--paths", paths, "Monte-Carlo paths for the full level");
    verify->add_option("--threads", vthreads, "worker threads");
    verify->add_option("--seed", seed, "verification seed");

    std::string csv_path;
    auto* gnuplot = app.add_subcommand("gnuplot", "reprint a CSV artifact in gnuplot column layout");
    gnuplot->add_option("csv", csv_path, "CSV file produced by run")->required();

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) return cmd_run(scenario_path, overrides, out_dir, threads);
    if (verify->parsed()) return cmd_verify(level, paths, vthreads, seed);
    if (gnuplot->parsed()) return cmd_gnuplot(csv_path);
    return 1;
}
