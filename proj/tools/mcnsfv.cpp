#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "mcnsfv/cli.hpp"
#include "mcnsfv/errors.hpp"

using namespace mcnsfv;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> threads;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "run configuration (key = value)")->required();
    cmd->add_option("--seed", c.seed, "override the config seed");
    cmd->add_option("--out", c.out, "override the output directory");
    cmd->add_option("--threads", c.threads, "worker threads (0: all cores)");
}

RunConfig resolve(const Common& c) {
    RunConfig cfg = load_config(c.config);
    if (c.seed) cfg.seed = *c.seed;
    if (c.out) cfg.out = *c.out;
    cfg.validate();
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Monte Carlo finite-volume solver for the barotropic Navier-Stokes system"};
    app.require_subcommand(1);

    Common common;
    std::uint64_t sample = 0;
    auto* run_sample = app.add_subcommand("run-sample", "solve one sample and print its ledger");
    add_common(run_sample, common);
    run_sample->add_option("--sample", sample, "sample index")->required();
    auto* reference = app.add_subcommand("reference", "reference statistics from S samples");
    add_common(reference, common);
    auto* mc = app.add_subcommand("mc", "ensemble phase of estimate (M realisations)");
    add_common(mc, common);
    auto* estimate = app.add_subcommand("estimate", "E1-E4 metrics CSV against the reference");
    add_common(estimate, common);
    auto* convergence = app.add_subcommand("convergence", "fit log-log slopes of the metrics CSV");
    add_common(convergence, common);
    auto* verify = app.add_subcommand("verify", "structure-preservation property suite");
    add_common(verify, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        const RunConfig cfg = resolve(common);
        const unsigned threads = resolve_threads(common.threads, cfg);
        if (*run_sample) return cmd_run_sample(cfg, sample, threads, std::cout);
        if (*reference) return cmd_reference(cfg, threads, std::cout);
        if (*mc) return cmd_mc(cfg, threads, std::cout);
        if (*estimate) return cmd_estimate(cfg, threads, std::cout);
        if (*convergence) return cmd_convergence(cfg, std::cout);
        if (*verify) return cmd_verify(cfg, threads, std::cout);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
    return kExitOther;
}
