// Batch front end: sample | rate | check | oracle.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "ulakit/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Decreasing-step Langevin sampler and convergence-rate harness"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    unsigned threads = 0;
    std::string out_dir;
    std::string config;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("config", config, "experiment config file")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "override the config seed");
        sub->add_option("--threads", threads, "worker threads (0 = one per hardware thread)");
        sub->add_option("--out", out_dir, "output directory");
    };
    auto* sample = app.add_subcommand("sample", "write chain snapshots and a manifest");
    auto* rate = app.add_subcommand("rate", "run the rate pipeline and write rates.csv / verdict.csv");
    auto* check = app.add_subcommand("check", "print assumption probes and schedule validation");
    auto* oracle = app.add_subcommand("oracle", "run the built-in oracle suites");
    for (auto* sub : {sample, rate, check}) add_common(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : ulakit::exit_code::kConfig;
    }

    if (oracle->parsed()) return ulakit::cmd_oracle(std::cout);

    ulakit::CommandOptions opts;
    for (auto* sub : {sample, rate, check}) {
        if (!sub->parsed()) continue;
        if (sub->count("--seed")) opts.seed = seed;
        if (sub->count("--threads")) opts.threads = threads;
        if (sub->count("--out")) opts.out = out_dir;
    }
    if (sample->parsed()) return ulakit::cmd_sample(config, opts, std::cout, std::cerr);
    if (rate->parsed()) return ulakit::cmd_rate(config, opts, std::cout, std::cerr);
    return ulakit::cmd_check(config, opts, std::cout, std::cerr);
}
