#include "frachardy/cli_io.hpp"
#include "frachardy/errors.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    using namespace frachardy;
    std::string commands;
    for (const auto& n : command_names()) commands += (commands.empty() ? "" : ", ") + n;

    CLI::App app{"Radial fractional p-Laplacian experiments with a Hardy potential"};
    app.footer(config_help() + "\nExit codes: 0 all checks pass, 2 a check failed, 1 error, 64 usage.\n"
               "FRACHARDY_THREADS caps the worker count (0 or unset = all cores).");
    std::string command, config_path, out_dir;
    std::uint64_t seed = 0;
    app.add_option("command", command, "one of: " + commands)->required();
    app.add_option("--config", config_path, "config file (key = value)")->required();
    auto* out_opt = app.add_option("--out", out_dir, "output directory (overrides the config)");
    auto* seed_opt = app.add_option("--seed", seed, "random seed (overrides the config)");
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    RunConfig config;
    try {
        config = load_config(config_path);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    if (*out_opt) config.out = out_dir;
    if (*seed_opt) config.seed = seed;
    return run_command(command, config, std::cout, std::cerr);
}
