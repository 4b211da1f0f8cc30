#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "spacebind/pipeline.hpp"

namespace {

struct CliState {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::size_t> threads;
    std::optional<double> lambda;
    bool dedupe_on = false;
    bool dedupe_off = false;
};

spacebind::RunConfig resolve(const CliState& state) {
    spacebind::RunConfig cfg = spacebind::load_run_config(state.config_path);
    spacebind::FlagOverrides flags;
    flags.seed = state.seed;
    flags.out_dir = state.out_dir;
    flags.threads = state.threads;
    flags.lambda = state.lambda;
    if (state.dedupe_on) flags.dedupe = true;
    if (state.dedupe_off) flags.dedupe = false;
    spacebind::apply_overrides(cfg, flags);
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"spacebind: bind pre-trained embedding spaces into one routed omni space"};
    app.require_subcommand(1);
    app.fallthrough();

    CliState state;
    app.add_option("--config", state.config_path, "JSON run config; flags override its keys")
        ->check(CLI::ExistingFile);
    app.add_option("--seed", state.seed, "override the world, bind, and route seeds");
    app.add_option("--out", state.out_dir, "output directory (default: out)");
    app.add_option("--threads", state.threads, "worker threads; 1 is bit-exact (default: 1)");
    app.add_option("--lambda", state.lambda,
                   "decoupling loss weight; 0 disables the decoupling objective");
    app.add_flag("--dedupe", state.dedupe_on, "drop duplicate quadruples");
    app.add_flag("--no-dedupe", state.dedupe_off, "keep duplicate quadruples (default)");

    app.add_subcommand("gen-world", "generate the synthetic multi-space embedding corpus")
        ->callback([&] { spacebind::cmd_gen_world(resolve(state)); });
    app.add_subcommand("retrieve-pairs",
                       "retrieve cross-modal pseudo item quadruples from the store")
        ->callback([&] { spacebind::cmd_retrieve_pairs(resolve(state)); });
    app.add_subcommand("bind", "train per-space projectors into the anchor space")
        ->callback([&] { spacebind::cmd_bind(resolve(state)); });
    app.add_subcommand("route", "train the per-modality ensemble routers")
        ->callback([&] { spacebind::cmd_route(resolve(state)); });
    app.add_subcommand("eval", "evaluate combination policies on the held-out split")
        ->callback([&] { spacebind::cmd_eval(resolve(state)); });
    app.add_subcommand("ablate", "run the policy-by-seed ablation grid from scratch")
        ->callback([&] { spacebind::cmd_ablate(resolve(state)); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
