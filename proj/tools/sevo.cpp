#include "sevo/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv)
{
    CLI::App app{"Causal Picard solver for stochastic evolutionary equations"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(sevo::kVersion));

    sevo::cli::Overrides overrides;
    std::string config_path;
    std::size_t paths = 0;
    std::uint64_t seed = 0;
    std::string out_dir;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("config", config_path, "JSON run configuration")->required();
        sub->add_option("--paths", paths, "number of sample paths (overrides solver.n_paths)")
            ->check(CLI::PositiveNumber);
        sub->add_option("--seed", seed, "master seed (overrides solver.seed)");
        sub->add_option("--out", out_dir, "output directory (overrides output.directory)");
    };
    CLI::App* run = app.add_subcommand("run", "solve and write manifest, report and statistics");
    add_common(run);
    CLI::App* check = app.add_subcommand("validate", "check the config and select nu, no paths");
    add_common(check);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : sevo::cli::config_error;
    }

    CLI::App* active = run->parsed() ? run : check;
    if (active->count("--paths") > 0) {
        overrides.n_paths = paths;
    }
    if (active->count("--seed") > 0) {
        overrides.seed = seed;
    }
    if (active->count("--out") > 0) {
        overrides.out_dir = out_dir;
    }
    if (run->parsed()) {
        return sevo::cli::run(config_path, overrides, std::cout, std::cerr);
    }
    return sevo::cli::validate(config_path, overrides, std::cout, std::cerr);
}
