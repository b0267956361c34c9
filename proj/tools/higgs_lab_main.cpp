#include "higgs/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv)
{
    using namespace higgs::experiment;

    CLI::App app{"Superintegrable oscillator and Kepler experiments on the sphere, pseudosphere and flat space"};
    app.require_subcommand(1);

    RunOptions opts;
    std::string config;
    std::string out;
    std::uint64_t seed = 0;

    for (const char* name : {"simulate", "drift", "reduce", "gradcheck", "closure"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config, "JSON experiment config")->required();
        sub->add_option("--out", out, std::string("output directory (default: $") + kOutputEnv + " or .)");
        sub->add_option("--seed", seed, "seed for the random initial state");
        sub->add_option("--override", opts.overrides, "dotted.key=value, repeatable");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    opts.command = app.get_subcommands().front()->get_name();
    opts.config_path = config;
    const CLI::App* sub = app.get_subcommands().front();
    if (sub->count("--out"))
        opts.out_dir = out;
    if (sub->count("--seed"))
        opts.seed = seed;
    return run(opts, std::cerr);
}
