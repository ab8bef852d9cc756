// SPDX-License-Identifier: Apache-2.0
// nfcrb: evaluate near-field CRB sweeps and write them as CSV.

#include "nfcrb/experiment.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

enum ExitCode { exit_ok = 0, exit_config = 2, exit_numerical = 3 };

struct OutputFlags {
    std::string out;
    std::optional<std::uint64_t> seed;
    bool db = false;
    unsigned threads = 0;
    std::vector<std::string> overrides;
};

void add_output_flags(CLI::App* cmd, OutputFlags& f)
{
    cmd->add_option("--set", f.overrides, "override a config key, section.key=value")->take_all();
    cmd->add_option("--out", f.out, "CSV output file (default: stdout)");
    cmd->add_option("--seed", f.seed, "Monte Carlo master seed");
    cmd->add_flag("--db", f.db, "write CRBs as 10 log10");
    cmd->add_option("--threads", f.threads, "worker threads (0: all cores)");
}

int run(nfcrb::ExperimentConfig cfg, const OutputFlags& f)
{
    if (f.seed) cfg.mc.seed = *f.seed;
    nfcrb::RunOptions opt{f.db, f.threads};
    // Render to memory first so a failing sweep never leaves a partial file.
    std::ostringstream csv;
    nfcrb::run_experiment(cfg, csv, opt);
    if (f.out.empty()) {
        std::cout << csv.str();
        return exit_ok;
    }
    std::ofstream file(f.out, std::ios::binary);
    if (!file) throw nfcrb::ConfigError("cannot open output file " + f.out);
    file << csv.str();
    return exit_ok;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Near-field XL-MIMO radar Cramer-Rao bounds"};
    app.require_subcommand(1);

    OutputFlags run_flags, preset_flags;
    std::string config_path;
    auto* run_cmd = app.add_subcommand("run", "run an experiment from a config file");
    run_cmd->add_option("--config", config_path, "experiment config file")->required();
    add_output_flags(run_cmd, run_flags);

    std::string preset_name;
    bool print_config = false;
    auto* preset_cmd = app.add_subcommand("preset", "run a named figure preset");
    preset_cmd->add_option("name", preset_name, "preset name (see list-presets)")->required();
    preset_cmd->add_flag("--print-config", print_config, "print the preset as a config file instead of running it");
    add_output_flags(preset_cmd, preset_flags);

    auto* list_cmd = app.add_subcommand("list-presets", "list the figure presets");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? exit_ok : exit_config;
    }

    try {
        if (*list_cmd) {
            for (const auto& p : nfcrb::presets()) std::cout << p.name << "\t" << p.description << "\n";
            return exit_ok;
        }
        if (*run_cmd) {
            std::ifstream in(config_path);
            if (!in) throw nfcrb::ConfigError("cannot read config file " + config_path);
            return run(nfcrb::parse_config(in, run_flags.overrides), run_flags);
        }
        auto preset = nfcrb::find_preset(preset_name);
        if (!preset) throw nfcrb::ConfigError("unknown preset '" + preset_name + "'");
        // Route overrides through the text form so they get the same checks.
        nfcrb::ExperimentConfig cfg = nfcrb::parse_config(nfcrb::serialize_config(*preset), preset_flags.overrides);
        if (print_config) {
            std::cout << nfcrb::serialize_config(cfg);
            return exit_ok;
        }
        return run(cfg, preset_flags);
    } catch (const nfcrb::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const nfcrb::DomainError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return exit_numerical;
    }
}
