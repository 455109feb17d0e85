#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hamlens/errors.hpp"
#include "hamlens/scenario.hpp"

int main(int argc, char** argv) {
    CLI::App app{"hamlens: Hamiltonian flows, scattering and ray transforms on bounded domains"};
    app.require_subcommand(1);

    std::string run_config, run_out = ".";
    std::optional<std::uint64_t> run_seed;
    std::optional<int> run_threads;
    std::vector<std::string> run_overrides;
    CLI::App* run = app.add_subcommand("run", "Execute a scenario config");
    run->add_option("config", run_config, "Scenario JSON file")->required();
    run->add_option("--out-dir", run_out, "Directory for artifacts (default: .)");
    run->add_option("--seed", run_seed, "Override the config seed");
    run->add_option("--threads", run_threads, "Worker threads (default: config, then HAMLENS_THREADS, then 1)");
    run->add_option("--override", run_overrides, "Config override path.to.key=value (repeatable)");

    std::string validate_config;
    CLI::App* validate = app.add_subcommand("validate", "Report config findings without executing");
    validate->add_option("config", validate_config, "Scenario JSON file")->required();

    CLI::App* list = app.add_subcommand("list-builtins", "Print builtin models, domains and integrands");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            hamlens::RunOptions opts;
            opts.out_dir = run_out;
            opts.seed = run_seed;
            opts.threads = run_threads;
            opts.overrides = run_overrides;
            hamlens::RunResult res = hamlens::run_scenario(run_config, opts);
            std::printf("%s\n", res.summary.dump(2).c_str());
            return res.exit_code;
        }
        if (validate->parsed()) {
            const std::vector<std::string> findings = hamlens::validate_scenario(validate_config);
            if (findings.empty()) {
                std::printf("ok: %s\n", validate_config.c_str());
            } else {
                for (const std::string& f : findings) std::printf("finding: %s\n", f.c_str());
            }
            return 0;
        }
        if (list->parsed()) {
            std::printf("%s\n", hamlens::builtin_catalog().dump(2).c_str());
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
