#include "spacebind/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "spacebind/errors.hpp"
#include "spacebind/io.hpp"

namespace spacebind {

using nlohmann::json;

namespace {

const std::set<std::string> kPolicyNames = {"mean",   "at-high",      "vt-high",   "pvt-high",
                                            "routed", "routed-align", "routed-dec"};

void check_keys(const json& obj, const std::string& prefix,
                const std::set<std::string>& allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("config: unknown key " + prefix + it.key());
}

const json& section(const json& root, const std::string& name) {
    const json& value = root.at(name);
    if (!value.is_object()) throw ConfigError("config: " + name + " must be an object");
    return value;
}

double as_double(const json& v, const std::string& name) {
    if (!v.is_number()) throw ConfigError("config: " + name + " must be a number");
    return v.get<double>();
}

std::uint64_t as_u64(const json& v, const std::string& name) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
        return static_cast<std::uint64_t>(v.get<std::int64_t>());
    throw ConfigError("config: " + name + " must be a nonnegative integer");
}

std::size_t as_size(const json& v, const std::string& name) {
    return static_cast<std::size_t>(as_u64(v, name));
}

bool as_bool(const json& v, const std::string& name) {
    if (!v.is_boolean()) throw ConfigError("config: " + name + " must be a boolean");
    return v.get<bool>();
}

std::string as_string(const json& v, const std::string& name) {
    if (!v.is_string()) throw ConfigError("config: " + name + " must be a string");
    return v.get<std::string>();
}

template <std::size_t N>
std::array<double, N> as_double_array(const json& v, const std::string& name) {
    if (v.is_number()) {
        std::array<double, N> out;
        out.fill(v.get<double>());
        return out;
    }
    if (!v.is_array() || v.size() != N)
        throw ConfigError("config: " + name + " must be a number or an array of " +
                          std::to_string(N));
    std::array<double, N> out;
    for (std::size_t i = 0; i < N; ++i)
        out[i] = as_double(v[i], name + "[" + std::to_string(i) + "]");
    return out;
}

std::array<std::size_t, 4> as_size_array4(const json& v, const std::string& name) {
    if (v.is_number()) {
        std::array<std::size_t, 4> out;
        out.fill(as_size(v, name));
        return out;
    }
    if (!v.is_array() || v.size() != 4)
        throw ConfigError("config: " + name + " must be a number or an array of 4");
    std::array<std::size_t, 4> out;
    for (std::size_t i = 0; i < 4; ++i)
        out[i] = as_size(v[i], name + "[" + std::to_string(i) + "]");
    return out;
}

Modality as_modality(const json& v, const std::string& name) {
    try {
        return modality_from_name(as_string(v, name));
    } catch (const DataError& e) {
        throw ConfigError("config: " + name + ": " + e.what());
    }
}

void parse_world(const json& obj, WorldConfig& cfg) {
    check_keys(obj, "world.",
               {"seed", "latent_dim", "items_per_modality", "cluster_count", "cluster_spread",
                "observation_noise", "encoder_noise_home", "encoder_noise_away",
                "text_domain_mix", "obs_mixing", "modality_gap", "identical_pipelines",
                "spaces"});
    if (obj.contains("seed")) cfg.seed = as_u64(obj["seed"], "world.seed");
    if (obj.contains("latent_dim")) cfg.latent_dim = as_size(obj["latent_dim"], "world.latent_dim");
    if (obj.contains("items_per_modality"))
        cfg.items_per_modality = as_size_array4(obj["items_per_modality"],
                                                "world.items_per_modality");
    if (obj.contains("cluster_count"))
        cfg.cluster_count = as_size(obj["cluster_count"], "world.cluster_count");
    if (obj.contains("cluster_spread"))
        cfg.cluster_spread = as_double(obj["cluster_spread"], "world.cluster_spread");
    if (obj.contains("observation_noise"))
        cfg.observation_noise = as_double_array<4>(obj["observation_noise"],
                                                   "world.observation_noise");
    if (obj.contains("encoder_noise_home"))
        cfg.encoder_noise_home = as_double(obj["encoder_noise_home"],
                                           "world.encoder_noise_home");
    if (obj.contains("encoder_noise_away"))
        cfg.encoder_noise_away = as_double(obj["encoder_noise_away"],
                                           "world.encoder_noise_away");
    if (obj.contains("text_domain_mix"))
        cfg.text_domain_mix = as_double_array<3>(obj["text_domain_mix"],
                                                 "world.text_domain_mix");
    if (obj.contains("obs_mixing")) cfg.obs_mixing = as_double(obj["obs_mixing"],
                                                               "world.obs_mixing");
    if (obj.contains("modality_gap"))
        cfg.modality_gap = as_double(obj["modality_gap"], "world.modality_gap");
    if (obj.contains("identical_pipelines"))
        cfg.identical_pipelines = as_bool(obj["identical_pipelines"],
                                          "world.identical_pipelines");
    if (obj.contains("spaces")) {
        const json& spaces = obj["spaces"];
        if (!spaces.is_array()) throw ConfigError("config: world.spaces must be an array");
        cfg.spaces.clear();
        for (std::size_t i = 0; i < spaces.size(); ++i) {
            const json& s = spaces[i];
            const std::string where = "world.spaces[" + std::to_string(i) + "].";
            if (!s.is_object())
                throw ConfigError("config: world.spaces entries must be objects");
            check_keys(s, where, {"name", "family", "dim", "anchor"});
            SpaceSpec spec;
            spec.name = as_string(s.at("name"), where + "name");
            try {
                spec.family = family_from_name(as_string(s.at("family"), where + "family"));
            } catch (const DataError& e) {
                throw ConfigError("config: " + where + "family: " + e.what());
            }
            spec.dim = as_size(s.at("dim"), where + "dim");
            if (s.contains("anchor")) spec.is_anchor = as_bool(s["anchor"], where + "anchor");
            cfg.spaces.push_back(std::move(spec));
        }
    }
}

RetrievalRoster parse_roster(const json& obj) {
    check_keys(obj, "roster.", {"direct", "pivots"});
    RetrievalRoster roster;
    if (obj.contains("direct")) {
        const json& direct = obj["direct"];
        if (!direct.is_object()) throw ConfigError("config: roster.direct must be an object");
        for (auto it = direct.begin(); it != direct.end(); ++it) {
            try {
                roster.direct.emplace(pair_from_name(it.key()),
                                      as_string(it.value(), "roster.direct." + it.key()));
            } catch (const DataError& e) {
                throw ConfigError("config: roster.direct: " + std::string(e.what()));
            }
        }
    }
    if (obj.contains("pivots")) {
        const json& pivots = obj["pivots"];
        if (!pivots.is_object()) throw ConfigError("config: roster.pivots must be an object");
        for (auto it = pivots.begin(); it != pivots.end(); ++it) {
            try {
                roster.pivots.emplace(pair_from_name(it.key()),
                                      as_modality(it.value(), "roster.pivots." + it.key()));
            } catch (const DataError& e) {
                throw ConfigError("config: roster.pivots: " + std::string(e.what()));
            }
        }
    }
    return roster;
}

void parse_bind(const json& obj, BindConfig& cfg) {
    check_keys(obj, "bind.",
               {"temperature", "projector_hidden_dim", "projector_count", "learning_rate",
                "batch_size", "epochs", "seed"});
    if (obj.contains("temperature"))
        cfg.temperature = as_double(obj["temperature"], "bind.temperature");
    if (obj.contains("projector_hidden_dim"))
        cfg.projector_hidden_dim = as_size(obj["projector_hidden_dim"],
                                           "bind.projector_hidden_dim");
    if (obj.contains("projector_count"))
        cfg.projector_count = as_size(obj["projector_count"], "bind.projector_count");
    if (obj.contains("learning_rate"))
        cfg.learning_rate = as_double(obj["learning_rate"], "bind.learning_rate");
    if (obj.contains("batch_size")) cfg.batch_size = as_size(obj["batch_size"],
                                                             "bind.batch_size");
    if (obj.contains("epochs")) cfg.epochs = as_size(obj["epochs"], "bind.epochs");
    if (obj.contains("seed")) cfg.seed = as_u64(obj["seed"], "bind.seed");
}

void parse_route(const json& obj, RouteConfig& cfg) {
    check_keys(obj, "route.",
               {"temperature", "lambda", "learning_rate", "batch_size", "epochs",
                "router_hidden_dim", "use_align", "use_dec", "seed"});
    if (obj.contains("temperature"))
        cfg.temperature = as_double(obj["temperature"], "route.temperature");
    if (obj.contains("lambda")) cfg.lambda = as_double(obj["lambda"], "route.lambda");
    if (obj.contains("learning_rate"))
        cfg.learning_rate = as_double(obj["learning_rate"], "route.learning_rate");
    if (obj.contains("batch_size")) cfg.batch_size = as_size(obj["batch_size"],
                                                             "route.batch_size");
    if (obj.contains("epochs")) cfg.epochs = as_size(obj["epochs"], "route.epochs");
    if (obj.contains("router_hidden_dim"))
        cfg.router_hidden_dim = as_size(obj["router_hidden_dim"], "route.router_hidden_dim");
    if (obj.contains("use_align")) cfg.use_align = as_bool(obj["use_align"], "route.use_align");
    if (obj.contains("use_dec")) cfg.use_dec = as_bool(obj["use_dec"], "route.use_dec");
    if (obj.contains("seed")) cfg.seed = as_u64(obj["seed"], "route.seed");
}

void parse_eval(const json& obj, EvalOptions& cfg) {
    check_keys(obj, "eval.", {"retrieval", "classification", "discrimination", "benchmarks"});
    if (obj.contains("retrieval")) cfg.retrieval = as_bool(obj["retrieval"], "eval.retrieval");
    if (obj.contains("classification"))
        cfg.classification = as_bool(obj["classification"], "eval.classification");
    if (obj.contains("discrimination"))
        cfg.discrimination = as_bool(obj["discrimination"], "eval.discrimination");
    if (obj.contains("benchmarks")) {
        const json& benchmarks = obj["benchmarks"];
        if (!benchmarks.is_array())
            throw ConfigError("config: eval.benchmarks must be an array");
        cfg.classify_benchmarks.clear();
        for (std::size_t i = 0; i < benchmarks.size(); ++i)
            cfg.classify_benchmarks.push_back(
                as_modality(benchmarks[i], "eval.benchmarks[" + std::to_string(i) + "]"));
    }
}

json world_to_json(const WorldConfig& cfg) {
    json spaces = json::array();
    for (const SpaceSpec& s : cfg.spaces)
        spaces.push_back({{"name", s.name},
                          {"family", family_name(s.family)},
                          {"dim", s.dim},
                          {"anchor", s.is_anchor}});
    return {{"seed", cfg.seed},
            {"latent_dim", cfg.latent_dim},
            {"items_per_modality", cfg.items_per_modality},
            {"cluster_count", cfg.cluster_count},
            {"cluster_spread", cfg.cluster_spread},
            {"observation_noise", cfg.observation_noise},
            {"encoder_noise_home", cfg.encoder_noise_home},
            {"encoder_noise_away", cfg.encoder_noise_away},
            {"text_domain_mix", cfg.text_domain_mix},
            {"obs_mixing", cfg.obs_mixing},
            {"modality_gap", cfg.modality_gap},
            {"identical_pipelines", cfg.identical_pipelines},
            {"spaces", spaces}};
}

json roster_to_json(const RetrievalRoster& roster) {
    json direct = json::object();
    for (const auto& [pair, space] : roster.direct) direct[pair.name()] = space;
    json pivots = json::object();
    for (const auto& [pair, modality] : roster.pivots)
        pivots[pair.name()] = modality_name(modality);
    return {{"direct", direct}, {"pivots", pivots}};
}

json bind_to_json(const BindConfig& cfg) {
    return {{"temperature", cfg.temperature},
            {"projector_hidden_dim", cfg.projector_hidden_dim},
            {"projector_count", cfg.projector_count},
            {"learning_rate", cfg.learning_rate},
            {"batch_size", cfg.batch_size},
            {"epochs", cfg.epochs},
            {"seed", cfg.seed}};
}

json route_to_json(const RouteConfig& cfg) {
    return {{"temperature", cfg.temperature},
            {"lambda", cfg.lambda},
            {"learning_rate", cfg.learning_rate},
            {"batch_size", cfg.batch_size},
            {"epochs", cfg.epochs},
            {"router_hidden_dim", cfg.router_hidden_dim},
            {"use_align", cfg.use_align},
            {"use_dec", cfg.use_dec},
            {"seed", cfg.seed}};
}

json eval_to_json(const EvalOptions& cfg) {
    json benchmarks = json::array();
    for (Modality m : cfg.classify_benchmarks) benchmarks.push_back(modality_name(m));
    return {{"retrieval", cfg.retrieval},
            {"classification", cfg.classification},
            {"discrimination", cfg.discrimination},
            {"benchmarks", benchmarks}};
}

json run_config_to_json(const RunConfig& cfg) {
    json root = {{"world", world_to_json(cfg.world)},
                 {"bind", bind_to_json(cfg.bind)},
                 {"route", route_to_json(cfg.route)},
                 {"eval", eval_to_json(cfg.eval)},
                 {"policies", cfg.policies},
                 {"ablation_seeds", cfg.ablation_seeds},
                 {"train_fraction", cfg.train_fraction},
                 {"dedupe", cfg.dedupe},
                 {"w_high", cfg.w_high},
                 {"out_dir", cfg.out_dir},
                 {"threads", cfg.threads}};
    if (cfg.roster) root["roster"] = roster_to_json(*cfg.roster);
    return root;
}

// shared plumbing ------------------------------------------------------------

std::string world_dir(const RunConfig& cfg) { return cfg.out_dir + "/world"; }
std::string quads_path(const RunConfig& cfg) { return cfg.out_dir + "/quadruples.tsv"; }
std::string bind_dir(const RunConfig& cfg) { return cfg.out_dir + "/bind"; }
std::string route_dir(const RunConfig& cfg) { return cfg.out_dir + "/route"; }

EmbeddingStore load_store(const RunConfig& cfg) {
    const std::string dir = world_dir(cfg);
    if (!std::filesystem::exists(dir + "/manifest.json"))
        throw IoError(dir + "/manifest.json: not found (run gen-world first)");
    return import_store(dir);
}

WorldTruth load_truth(const RunConfig& cfg) {
    const std::string path = world_dir(cfg) + "/truth.json";
    if (!std::filesystem::exists(path))
        throw IoError(path + ": not found (run gen-world first)");
    return read_world_truth(path);
}

std::size_t matched_item_count(const EmbeddingStore& store) {
    const std::size_t count = store.item_count(Modality::Point3D);
    for (Modality m : kModalities)
        if (store.item_count(m) != count)
            throw ConfigError("pipeline: matched per-modality item pools required, got " +
                              std::to_string(store.item_count(m)) + " " + modality_name(m) +
                              " items vs " + std::to_string(count));
    return count;
}

// Split rows are keyed by the on-disk store's seed so every later stage sees
// the same train/held-out partition for that dataset.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> pipeline_split(
    const RunConfig& cfg, const EmbeddingStore& store) {
    return split_items(matched_item_count(store), cfg.train_fraction, store.seed);
}

std::vector<PseudoQuadruple> load_quads(const RunConfig& cfg) {
    const std::string path = quads_path(cfg);
    if (!std::filesystem::exists(path))
        throw IoError(path + ": not found (run retrieve-pairs first)");
    return read_quadruples_tsv(path);
}

EnsembleModel load_base_model(const RunConfig& cfg, const EmbeddingStore& store) {
    EnsembleModel model;
    model.registry = EncoderRegistry::build(store.spaces);
    const SpaceSpec& anchor = store.anchor();
    model.anchor_name = anchor.name;
    model.anchor_dim = anchor.dim;
    for (const SpaceSpec& spec : store.spaces) {
        if (spec.is_anchor) continue;
        model.bound.emplace(spec.name, load_bound_space(bind_dir(cfg), spec.name));
    }
    return model;
}

} // namespace

void RunConfig::validate() const {
    world.validate();
    bind.validate();
    route.validate();
    if (!(train_fraction > 0.0 && train_fraction <= 1.0))
        throw ConfigError("config: train_fraction must be in (0, 1], got " +
                          std::to_string(train_fraction));
    if (!(w_high > 0.0 && w_high < 1.0))
        throw ConfigError("config: w_high must be in (0, 1), got " + std::to_string(w_high));
    if (threads < 1) throw ConfigError("config: threads must be at least 1");
    if (out_dir.empty()) throw ConfigError("config: out_dir must be non-empty");
    if (policies.empty()) throw ConfigError("config: policies must be non-empty");
    for (const std::string& policy : policies)
        if (!kPolicyNames.count(policy))
            throw ConfigError("config: unknown policy \"" + policy + "\"");
    if (ablation_seeds.empty()) throw ConfigError("config: ablation_seeds must be non-empty");
    if (roster) roster->validate(world.spaces);
}

RetrievalRoster RunConfig::effective_roster() const {
    return roster ? *roster : RetrievalRoster::defaults_for(world.spaces);
}

RunConfig parse_run_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError("config: invalid JSON: " + std::string(e.what()));
    }
    if (!root.is_object()) throw ConfigError("config: top level must be an object");
    check_keys(root, "",
               {"world", "roster", "bind", "route", "eval", "policies", "ablation_seeds",
                "train_fraction", "dedupe", "w_high", "out_dir", "threads", "seed"});
    RunConfig cfg;
    // the top-level seed seeds every stage; per-section seeds take precedence
    if (root.contains("seed")) {
        const std::uint64_t seed = as_u64(root["seed"], "seed");
        cfg.world.seed = seed;
        cfg.bind.seed = seed;
        cfg.route.seed = seed;
    }
    if (root.contains("world")) parse_world(section(root, "world"), cfg.world);
    if (root.contains("roster")) cfg.roster = parse_roster(section(root, "roster"));
    if (root.contains("bind")) parse_bind(section(root, "bind"), cfg.bind);
    if (root.contains("route")) parse_route(section(root, "route"), cfg.route);
    if (root.contains("eval")) parse_eval(section(root, "eval"), cfg.eval);
    if (root.contains("policies")) {
        const json& policies = root["policies"];
        if (!policies.is_array()) throw ConfigError("config: policies must be an array");
        cfg.policies.clear();
        for (std::size_t i = 0; i < policies.size(); ++i)
            cfg.policies.push_back(
                as_string(policies[i], "policies[" + std::to_string(i) + "]"));
    }
    if (root.contains("ablation_seeds")) {
        const json& seeds = root["ablation_seeds"];
        if (!seeds.is_array()) throw ConfigError("config: ablation_seeds must be an array");
        cfg.ablation_seeds.clear();
        for (std::size_t i = 0; i < seeds.size(); ++i)
            cfg.ablation_seeds.push_back(
                as_u64(seeds[i], "ablation_seeds[" + std::to_string(i) + "]"));
    }
    if (root.contains("train_fraction"))
        cfg.train_fraction = as_double(root["train_fraction"], "train_fraction");
    if (root.contains("dedupe")) cfg.dedupe = as_bool(root["dedupe"], "dedupe");
    if (root.contains("w_high")) cfg.w_high = as_double(root["w_high"], "w_high");
    if (root.contains("out_dir")) cfg.out_dir = as_string(root["out_dir"], "out_dir");
    if (root.contains("threads")) cfg.threads = as_size(root["threads"], "threads");
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    if (path.empty()) return RunConfig{};
    return parse_run_config(read_file(path));
}

std::string run_config_echo(const RunConfig& cfg) {
    return run_config_to_json(cfg).dump(2) + "\n";
}

void apply_overrides(RunConfig& cfg, const FlagOverrides& flags) {
    if (flags.seed) {
        cfg.world.seed = *flags.seed;
        cfg.bind.seed = *flags.seed;
        cfg.route.seed = *flags.seed;
    }
    if (flags.out_dir) cfg.out_dir = *flags.out_dir;
    if (flags.threads) cfg.threads = *flags.threads;
    if (flags.lambda) {
        if (*flags.lambda < 0.0)
            throw ConfigError("config: lambda must be nonnegative, got " +
                              std::to_string(*flags.lambda));
        cfg.route.lambda = *flags.lambda;
    }
    if (flags.dedupe) cfg.dedupe = *flags.dedupe;
}

void write_world_truth(const WorldTruth& truth, const WorldConfig& config,
                       const std::string& path) {
    json modalities = json::object();
    for (Modality m : kModalities) {
        const std::size_t mi = modality_index(m);
        json entry = {{"latent", truth.latent[mi]}, {"cluster", truth.cluster[mi]}};
        if (m == Modality::Text) {
            json domains = json::array();
            for (const std::optional<Modality>& d : truth.text_domain)
                domains.push_back(d ? json(modality_name(*d)) : json());
            entry["domain"] = domains;
        }
        modalities[modality_name(m)] = std::move(entry);
    }
    const json root = {{"version", 1},
                       {"cluster_count", truth.cluster_count},
                       {"config", world_to_json(config)},
                       {"modalities", modalities}};
    write_file_atomic(path, root.dump(2) + "\n");
}

WorldTruth read_world_truth(const std::string& path) {
    json root;
    try {
        root = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw DataError(path + ": invalid JSON: " + std::string(e.what()));
    }
    if (!root.is_object() || root.value("version", 0) != 1)
        throw DataError(path + ": unsupported truth file version");
    WorldTruth truth;
    truth.cluster_count = root.at("cluster_count").get<std::size_t>();
    const json& modalities = root.at("modalities");
    for (Modality m : kModalities) {
        const std::size_t mi = modality_index(m);
        const json& entry = modalities.at(modality_name(m));
        truth.latent[mi] = entry.at("latent").get<std::vector<std::size_t>>();
        truth.cluster[mi] = entry.at("cluster").get<std::vector<std::size_t>>();
        if (entry.at("latent").size() != entry.at("cluster").size())
            throw DataError(path + ": latent/cluster length mismatch for " + modality_name(m));
        if (m == Modality::Text) {
            for (const json& d : entry.at("domain"))
                truth.text_domain.push_back(d.is_null()
                                                ? std::optional<Modality>{}
                                                : std::optional<Modality>{modality_from_name(
                                                      d.get<std::string>())});
            if (truth.text_domain.size() != truth.latent[mi].size())
                throw DataError(path + ": text domain list length mismatch");
        }
    }
    return truth;
}

void cmd_gen_world(const RunConfig& cfg) {
    cfg.validate();
    const World world = generate_world(cfg.world);
    export_store(world.store, world_dir(cfg));
    write_world_truth(WorldTruth::from_world(world), cfg.world, world_dir(cfg) + "/truth.json");
    std::cout << "world: " << cfg.world.spaces.size() << " spaces, "
              << cfg.world.items_per_modality[0] << " items per modality, seed "
              << cfg.world.seed << " -> " << world_dir(cfg) << "\n";
}

void cmd_retrieve_pairs(const RunConfig& cfg) {
    cfg.validate();
    const EmbeddingStore store = load_store(cfg);
    RetrievalRoster roster = cfg.roster ? *cfg.roster : RetrievalRoster::defaults_for(store.spaces);
    roster.validate(store.spaces);

    const auto [train_rows, held_out_rows] = pipeline_split(cfg, store);
    std::array<std::vector<std::size_t>, 4> pools;
    for (Modality m : kModalities) pools[modality_index(m)] = train_rows;
    std::vector<PseudoQuadruple> quads = build_quadruples(store, roster, pools);
    const std::size_t raw_count = quads.size();
    if (cfg.dedupe) quads = dedupe_quadruples(quads);

    ensure_dir(cfg.out_dir);
    write_quadruples_tsv(quads, quads_path(cfg));

    json report = {{"quadruples", quads.size()},
                   {"before_dedupe", raw_count},
                   {"dedupe", cfg.dedupe},
                   {"train_items", train_rows.size()},
                   {"held_out_items", held_out_rows.size()},
                   {"roster", roster_to_json(roster)},
                   {"store_seed", store.seed},
                   {"train_fraction", cfg.train_fraction}};
    std::cout << "quadruples: " << quads.size() << " rows";
    if (cfg.dedupe && raw_count != quads.size())
        std::cout << " (" << raw_count << " before dedupe)";
    std::cout << " -> " << quads_path(cfg) << "\n";

    // accuracy against ground truth when the world sidecar is present
    // (imported real embeddings have no truth file)
    const std::string truth_path = world_dir(cfg) + "/truth.json";
    if (std::filesystem::exists(truth_path)) {
        const WorldTruth truth = read_world_truth(truth_path);
        const double accuracy = quadruple_accuracy(
            quads, [&](Modality m, const std::string& id) {
                return truth.latent[modality_index(m)][store.row_of(m, id)];
            });
        report["accuracy"] = accuracy;
        std::cout << "quadruple accuracy: " << accuracy << "\n";
    }
    write_file_atomic(cfg.out_dir + "/pairs_report.json", report.dump(2) + "\n");
}

void cmd_bind(const RunConfig& cfg) {
    cfg.validate();
    const EmbeddingStore store = load_store(cfg);
    const std::vector<PseudoQuadruple> quads = load_quads(cfg);
    const SpaceSpec& anchor = store.anchor();

    ensure_dir(bind_dir(cfg));
    std::ostringstream curves;
    curves << "space,epoch,loss\n";
    curves.precision(17);
    json finals = json::object();
    for (const SpaceSpec& spec : store.spaces) {
        if (spec.is_anchor) continue;
        BoundSpace bound = make_bound_space(spec, anchor.dim, cfg.bind);
        const std::vector<double> curve = train_projector(bound, quads, store, cfg.bind);
        save_bound_space(bound, cfg.bind, bind_dir(cfg));
        for (std::size_t e = 0; e < curve.size(); ++e)
            curves << spec.name << ',' << e << ',' << curve[e] << '\n';
        finals[spec.name] = curve.empty() ? 0.0 : curve.back();
        std::cout << "bind " << spec.name << ": loss " << (curve.empty() ? 0.0 : curve.front())
                  << " -> " << (curve.empty() ? 0.0 : curve.back()) << " over " << curve.size()
                  << " epochs\n";
    }
    write_file_atomic(bind_dir(cfg) + "/curves.csv", curves.str());
    const json report = {{"config", bind_to_json(cfg.bind)},
                         {"anchor", anchor.name},
                         {"final_loss", finals},
                         {"quadruples", quads.size()}};
    write_file_atomic(bind_dir(cfg) + "/bind_report.json", report.dump(2) + "\n");
}

void cmd_route(const RunConfig& cfg) {
    cfg.validate();
    const EmbeddingStore store = load_store(cfg);
    const std::vector<PseudoQuadruple> quads = load_quads(cfg);
    const WorldTruth truth = load_truth(cfg);

    EnsembleModel model = load_base_model(cfg, store);
    model.policy = make_routers(model.registry, model.anchor_dim, cfg.route);
    const RouterCurves curves = train_routers(model, store, quads, truth.text_domain, cfg.route);
    const RouterSet& routers = std::get<RouterSet>(model.policy);
    save_routers(routers, model.registry, cfg.route, route_dir(cfg));

    std::ostringstream curve_csv;
    curve_csv << "epoch,align,dec,total\n";
    curve_csv.precision(17);
    for (std::size_t e = 0; e < curves.total.size(); ++e)
        curve_csv << e << ',' << curves.align[e] << ',' << curves.dec[e] << ','
                  << curves.total[e] << '\n';
    write_file_atomic(route_dir(cfg) + "/curves.csv", curve_csv.str());

    const std::vector<Matrix> text_slices = encode_all(model, store, Modality::Text);
    const double provenance = provenance_accuracy(
        routers.routers[modality_index(Modality::Text)], model.registry, text_slices,
        truth.text_domain);
    const json report = {{"config", route_to_json(cfg.route)},
                         {"provenance_accuracy", provenance},
                         {"quadruples", quads.size()}};
    write_file_atomic(route_dir(cfg) + "/route_report.json", report.dump(2) + "\n");
    std::cout << "route: align " << (curves.align.empty() ? 0.0 : curves.align.back())
              << ", dec " << (curves.dec.empty() ? 0.0 : curves.dec.back())
              << ", provenance accuracy " << provenance << " -> " << route_dir(cfg) << "\n";
}

void cmd_eval(const RunConfig& cfg) {
    cfg.validate();
    const EmbeddingStore store = load_store(cfg);
    const WorldTruth truth = load_truth(cfg);
    const auto [train_rows, held_out_rows] = pipeline_split(cfg, store);
    if (held_out_rows.empty())
        throw ConfigError("eval: train_fraction leaves no held-out items");

    std::vector<std::string> policies = cfg.policies;
    for (const std::string& policy : policies)
        if (policy == "routed-align" || policy == "routed-dec")
            throw ConfigError("eval: policy " + policy +
                              " retrains routers; use the ablate command");
    // the mean baseline accompanies every routed report
    if (std::count(policies.begin(), policies.end(), "routed") &&
        !std::count(policies.begin(), policies.end(), "mean"))
        policies.insert(policies.begin(), "mean");

    const EnsembleModel base = load_base_model(cfg, store);
    std::vector<MetricRow> rows;
    for (const std::string& policy : policies) {
        EnsembleModel model = base;
        if (policy == "mean")
            model.policy = manual_policy(ManualPreset::Mean, model.registry, cfg.w_high);
        else if (policy == "at-high")
            model.policy = manual_policy(ManualPreset::ATHigh, model.registry, cfg.w_high);
        else if (policy == "vt-high")
            model.policy = manual_policy(ManualPreset::VTHigh, model.registry, cfg.w_high);
        else if (policy == "pvt-high")
            model.policy = manual_policy(ManualPreset::PVTHigh, model.registry, cfg.w_high);
        else
            model.policy = load_routers(route_dir(cfg), model.registry);
        const std::vector<MetricRow> policy_rows = evaluate_policy(
            model, store, truth, held_out_rows, train_rows, cfg.eval, policy, store.seed);
        rows.insert(rows.end(), policy_rows.begin(), policy_rows.end());
    }

    ensure_dir(cfg.out_dir + "/eval");
    write_metrics_csv(rows, cfg.out_dir + "/eval/metrics.csv");
    write_report_bundle(rows, run_config_echo(cfg), {store.seed},
                        cfg.out_dir + "/eval/report.json");
    for (const std::string& policy : policies) {
        double r1_sum = 0.0;
        std::size_t r1_count = 0;
        for (const MetricRow& row : rows)
            if (row.policy == policy && row.metric == "r1") {
                r1_sum += row.value;
                ++r1_count;
            }
        std::cout << "eval " << policy << ": mean R@1 "
                  << (r1_count ? r1_sum / static_cast<double>(r1_count) : 0.0) << " over "
                  << r1_count << " pairs\n";
    }
    std::cout << "eval reports -> " << cfg.out_dir << "/eval\n";
}

void cmd_ablate(const RunConfig& cfg) {
    cfg.validate();
    AblationConfig grid;
    grid.world = cfg.world;
    grid.bind = cfg.bind;
    grid.route = cfg.route;
    grid.eval = cfg.eval;
    grid.train_fraction = cfg.train_fraction;
    grid.dedupe = cfg.dedupe;
    grid.w_high = cfg.w_high;
    grid.policies = cfg.policies;
    grid.seeds = cfg.ablation_seeds;
    const std::vector<MetricRow> rows = ablation_grid(grid);

    ensure_dir(cfg.out_dir + "/ablation");
    write_metrics_csv(rows, cfg.out_dir + "/ablation/metrics.csv");
    write_report_bundle(rows, run_config_echo(cfg), cfg.ablation_seeds,
                        cfg.out_dir + "/ablation/report.json");
    for (const std::string& policy : cfg.policies) {
        double r1_sum = 0.0;
        std::size_t r1_count = 0;
        for (const MetricRow& row : rows)
            if (row.policy == policy && row.metric == "r1") {
                r1_sum += row.value;
                ++r1_count;
            }
        std::cout << "ablate " << policy << ": mean R@1 "
                  << (r1_count ? r1_sum / static_cast<double>(r1_count) : 0.0) << " over "
                  << r1_count << " cells\n";
    }
    std::cout << "ablation reports -> " << cfg.out_dir << "/ablation\n";
}

} // namespace spacebind
