#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spacebind/binding.hpp"
#include "spacebind/eval.hpp"
#include "spacebind/pairing.hpp"
#include "spacebind/routing.hpp"
#include "spacebind/world.hpp"

namespace spacebind {

// One JSON config file with per-stage sections (world, roster, bind, route,
// eval, ablation) plus top-level run keys. Flags override config keys, which
// override defaults.
struct RunConfig {
    WorldConfig world;
    std::optional<RetrievalRoster> roster; // nullopt -> defaults for the spaces
    BindConfig bind;
    RouteConfig route;
    EvalOptions eval;
    std::vector<std::string> policies = {"mean", "routed"};
    std::vector<std::uint64_t> ablation_seeds = {1, 2, 3};
    double train_fraction = 0.9;
    bool dedupe = false;
    double w_high = 0.6;
    std::string out_dir = "out";
    std::size_t threads = 1;

    void validate() const;
    // roster to use for pairing: the explicit one or the spaces' defaults
    RetrievalRoster effective_roster() const;
};

// Parses and validates the JSON text; unknown keys throw ConfigError naming
// the offending field.
RunConfig parse_run_config(const std::string& json_text);
// Reads the file at path (empty path -> all defaults).
RunConfig load_run_config(const std::string& path);
// Canonical JSON echo; parse_run_config(run_config_echo(c)) reproduces c.
std::string run_config_echo(const RunConfig& cfg);

// Command-line values that take precedence over the config file.
struct FlagOverrides {
    std::optional<std::uint64_t> seed; // sets world, bind, and route seeds
    std::optional<std::string> out_dir;
    std::optional<std::size_t> threads;
    std::optional<double> lambda; // route.lambda; 0 disables the decoupling loss
    std::optional<bool> dedupe;
};
void apply_overrides(RunConfig& cfg, const FlagOverrides& flags);

// Ground-truth sidecar written next to the store so later stages need no
// generator state.
void write_world_truth(const WorldTruth& truth, const WorldConfig& config,
                       const std::string& path);
WorldTruth read_world_truth(const std::string& path);

// Pipeline stages. Each consumes the artifacts of the previous stages from
// cfg.out_dir, writes its own atomically, and prints a one-line summary per
// artifact; errors surface as exceptions for the CLI to report.
//
//   gen-world      -> <out>/world/ (store manifest + f32 blobs + truth.json)
//   retrieve-pairs -> <out>/quadruples.tsv, <out>/pairs_report.json
//   bind           -> <out>/bind/ (projector checkpoints, curves.csv, report)
//   route          -> <out>/route/ (router checkpoint, curves.csv, report)
//   eval           -> <out>/eval/metrics.csv, <out>/eval/report.json
//   ablate         -> <out>/ablation/metrics.csv, <out>/ablation/report.json
void cmd_gen_world(const RunConfig& cfg);
void cmd_retrieve_pairs(const RunConfig& cfg);
void cmd_bind(const RunConfig& cfg);
void cmd_route(const RunConfig& cfg);
void cmd_eval(const RunConfig& cfg);
void cmd_ablate(const RunConfig& cfg);

} // namespace spacebind
