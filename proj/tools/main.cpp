// mbcool: heralded ground-state cooling simulator and analysis CLI.
//
// Subcommands: sweep-rap (RAP transfer-efficiency curves), cool (Monte Carlo
// herald-and-repeat protocol), rabi (synthetic probe scans), fit (scan ->
// parameter estimates). Settings come from defaults, then --config JSON,
// then MBCOOL_* environment variables, then flags.
//
// Exit codes: 0 success, 1 usage/config error, 2 numerical failure, 3 I/O.

#include <cstdint>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "mbcool/commands.hpp"
#include "mbcool/config.hpp"
#include "mbcool/errors.hpp"

namespace {

struct SubOptions {
    CLI::Option* config = nullptr;
    CLI::Option* seed = nullptr;
    CLI::Option* out = nullptr;
    CLI::Option* shots = nullptr;
    CLI::Option* cycles = nullptr;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Simulator and analysis toolkit for measurement-heralded ground-state "
        "cooling of a trapped-ion motional mode"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "0.1.0");

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    long long shots = 0;
    int cycles = 0;

    std::map<std::string, SubOptions> opts;
    auto add_subcommand = [&](const std::string& name, const std::string& desc) {
        CLI::App* sub = app.add_subcommand(name, desc);
        SubOptions& o = opts[name];
        o.config = sub->add_option("--config", config_path, "JSON config file");
        o.seed = sub->add_option("--seed", seed, "RNG seed (unsigned 64-bit)");
        o.out = sub->add_option("--out", out_dir, "output directory");
        o.shots = sub->add_option("--shots", shots,
                                  "trial count (cool) / shots per point (rabi)");
        o.cycles = sub->add_option("--cycles", cycles, "herald-and-repeat cycles");
        return sub;
    };

    add_subcommand("sweep-rap", "Sweep RAP pulse duration and tabulate transfer efficiency");
    add_subcommand("cool", "Run the heralded-cooling Monte Carlo and summary statistics");
    add_subcommand("rabi", "Synthesize a Rabi probe scan from a motional distribution");
    add_subcommand("fit", "Fit ground-state weight and tail parameters to a scan");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
        std::cerr << "usage error: " << e.what() << "\n";
        return mbcool::exit_usage;
    }

    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    const SubOptions& o = opts[name];

    mbcool::CliOverrides overrides;
    if (o.config->count() > 0) overrides.config_path = config_path;
    if (o.seed->count() > 0) overrides.seed = seed;
    if (o.out->count() > 0) overrides.out_dir = out_dir;
    if (o.shots->count() > 0) overrides.shots = shots;
    if (o.cycles->count() > 0) overrides.cycles = cycles;

    mbcool::RunConfig cfg;
    try {
        cfg = mbcool::assemble_run_config(name, overrides);
    } catch (const mbcool::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return mbcool::exit_io;
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return mbcool::exit_usage;
    }

    return mbcool::run_command(name, cfg, std::cerr);
}
