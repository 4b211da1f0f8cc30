#include "spacebind/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "spacebind/errors.hpp"
#include "spacebind/io.hpp"

namespace spacebind {

using nlohmann::json;

double recall_at_k(const Matrix& queries, const Matrix& pool,
                   const std::vector<std::size_t>& ground_truth, std::size_t k) {
    if (queries.cols != pool.cols)
        throw ShapeError("recall_at_k: query dim " + std::to_string(queries.cols) +
                         " vs pool dim " + std::to_string(pool.cols));
    if (ground_truth.size() != queries.rows)
        throw ShapeError("recall_at_k: " + std::to_string(ground_truth.size()) +
                         " ground-truth entries for " + std::to_string(queries.rows) +
                         " queries");
    if (k < 1 || k > pool.rows)
        throw ConfigError("recall_at_k: k = " + std::to_string(k) + " with pool size " +
                          std::to_string(pool.rows));
    const Matrix q = l2_normalize_rows(queries);
    const Matrix p = l2_normalize_rows(pool);
    std::size_t hits = 0;
    Vec sims(p.rows);
    for (std::size_t i = 0; i < q.rows; ++i) {
        const double* qi = q.row_ptr(i);
        for (std::size_t j = 0; j < p.rows; ++j) {
            const double* pj = p.row_ptr(j);
            double s = 0.0;
            for (std::size_t c = 0; c < q.cols; ++c) s += qi[c] * pj[c];
            sims[j] = s;
        }
        const std::size_t gt = ground_truth[i];
        if (gt >= p.rows)
            throw ShapeError("recall_at_k: ground truth " + std::to_string(gt) +
                             " outside pool of " + std::to_string(p.rows));
        // rank = better rows plus equal rows with lower index
        std::size_t rank = 0;
        for (std::size_t j = 0; j < p.rows; ++j) {
            if (sims[j] > sims[gt]) ++rank;
            else if (sims[j] == sims[gt] && j < gt) ++rank;
        }
        if (rank < k) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(q.rows);
}

ClassificationReport zero_shot_classify(const Matrix& item_embeddings,
                                        const std::vector<std::size_t>& item_classes,
                                        const std::vector<Matrix>& class_prompt_embeddings) {
    const std::size_t classes = class_prompt_embeddings.size();
    if (classes == 0) throw ConfigError("zero_shot_classify: no classes");
    if (item_classes.size() != item_embeddings.rows)
        throw ShapeError("zero_shot_classify: " + std::to_string(item_classes.size()) +
                         " labels for " + std::to_string(item_embeddings.rows) + " items");
    Matrix prototypes(classes, item_embeddings.cols);
    for (std::size_t c = 0; c < classes; ++c) {
        const Matrix& prompts = class_prompt_embeddings[c];
        if (prompts.rows == 0)
            throw ConfigError("zero_shot_classify: class " + std::to_string(c) +
                              " has no prompts");
        if (prompts.cols != item_embeddings.cols)
            throw ShapeError("zero_shot_classify: class " + std::to_string(c) +
                             " prompt dim mismatch");
        for (std::size_t r = 0; r < prompts.rows; ++r)
            for (std::size_t j = 0; j < prompts.cols; ++j)
                prototypes(c, j) += prompts(r, j);
        // mean then normalization below
        for (std::size_t j = 0; j < prompts.cols; ++j)
            prototypes(c, j) /= static_cast<double>(prompts.rows);
    }
    prototypes = l2_normalize_rows(prototypes);
    const Matrix items = l2_normalize_rows(item_embeddings);

    ClassificationReport report;
    report.classes = classes;
    report.items = items.rows;
    report.top5_valid = classes >= 5;
    std::size_t top1 = 0, top5 = 0;
    Vec sims(classes);
    for (std::size_t i = 0; i < items.rows; ++i) {
        for (std::size_t c = 0; c < classes; ++c) sims[c] = row_dot(items, i, prototypes, c);
        const std::size_t truth = item_classes[i];
        if (truth >= classes)
            throw ShapeError("zero_shot_classify: label " + std::to_string(truth) +
                             " outside " + std::to_string(classes) + " classes");
        std::size_t rank = 0;
        for (std::size_t c = 0; c < classes; ++c) {
            if (sims[c] > sims[truth]) ++rank;
            else if (sims[c] == sims[truth] && c < truth) ++rank;
        }
        if (rank < 1) ++top1;
        if (rank < 5) ++top5;
    }
    report.top1 = static_cast<double>(top1) / static_cast<double>(items.rows);
    report.top5 = static_cast<double>(top5) / static_cast<double>(items.rows);
    return report;
}

double discrimination(const Matrix& text_embeddings) {
    if (text_embeddings.rows < 2)
        throw ConfigError("discrimination: needs at least 2 items, got " +
                          std::to_string(text_embeddings.rows));
    const Matrix e = l2_normalize_rows(text_embeddings);
    double sum = 0.0;
    for (std::size_t i = 0; i < e.rows; ++i)
        for (std::size_t j = i + 1; j < e.rows; ++j) sum += row_dot(e, i, e, j);
    const double pairs = 0.5 * static_cast<double>(e.rows) * static_cast<double>(e.rows - 1);
    return sum / pairs;
}

std::vector<std::size_t> arithmetic_query(const EnsembleModel& model,
                                          const EmbeddingStore& store,
                                          const std::vector<ArithmeticTerm>& terms,
                                          Modality pool_modality,
                                          const std::vector<std::size_t>& pool_rows) {
    if (terms.empty()) throw ConfigError("arithmetic_query: no terms");
    bool has_positive = false;
    for (const ArithmeticTerm& t : terms) {
        if (t.sign != 1 && t.sign != -1)
            throw ConfigError("arithmetic_query: sign must be +1 or -1");
        if (t.sign == 1) has_positive = true;
    }
    if (!has_positive) throw ConfigError("arithmetic_query: needs at least one positive term");

    Vec combined(model.anchor_dim, 0.0);
    for (const ArithmeticTerm& t : terms) {
        const std::vector<std::size_t> row = {store.row_of(t.modality, t.id)};
        const Matrix e = embed(model, store, t.modality, row);
        for (std::size_t j = 0; j < e.cols; ++j)
            combined[j] += static_cast<double>(t.sign) * e(0, j);
    }
    double norm = 0.0;
    for (double v : combined) norm += v * v;
    norm = std::sqrt(norm);
    if (norm < 1e-12)
        throw DataError("arithmetic_query: terms cancel to a zero vector");
    for (double& v : combined) v /= norm;

    const Matrix pool = embed(model, store, pool_modality, pool_rows);
    std::vector<std::pair<double, std::size_t>> scored(pool.rows);
    for (std::size_t j = 0; j < pool.rows; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < pool.cols; ++c) s += combined[c] * pool(j, c);
        scored[j] = {s, j};
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<std::size_t> ranking(pool.rows);
    for (std::size_t j = 0; j < pool.rows; ++j) ranking[j] = scored[j].second;
    return ranking;
}

WorldTruth WorldTruth::from_world(const World& world) {
    WorldTruth truth;
    truth.cluster_count = world.config.cluster_count;
    for (Modality m : kModalities) {
        const std::size_t mi = modality_index(m);
        truth.latent[mi].reserve(world.items[mi].size());
        truth.cluster[mi].reserve(world.items[mi].size());
        for (const Item& item : world.items[mi]) {
            truth.latent[mi].push_back(item.latent_index);
            truth.cluster[mi].push_back(item.cluster);
            if (m == Modality::Text) truth.text_domain.push_back(item.text_domain);
        }
    }
    return truth;
}

std::vector<MetricRow> evaluate_policy(const EnsembleModel& model, const EmbeddingStore& store,
                                       const WorldTruth& truth,
                                       const std::vector<std::size_t>& held_out_rows,
                                       const std::vector<std::size_t>& train_rows,
                                       const EvalOptions& options,
                                       const std::string& policy_name, std::uint64_t seed) {
    std::vector<MetricRow> rows;
    const std::size_t ti = modality_index(Modality::Text);

    if (options.retrieval) {
        for (const ModalityPair& pair : all_modality_pairs()) {
            // text cells restrict to texts describing the partner modality,
            // mirroring domain-specific caption benchmarks
            std::vector<std::size_t> eval_rows;
            if (pair.hi == Modality::Text) {
                for (std::size_t row : held_out_rows)
                    if (row < truth.text_domain.size() && truth.text_domain[row] &&
                        *truth.text_domain[row] == pair.lo)
                        eval_rows.push_back(row);
            } else {
                eval_rows = held_out_rows;
            }
            if (eval_rows.size() < 2) continue;
            const Matrix lo_emb = embed(model, store, pair.lo, eval_rows);
            const Matrix hi_emb = embed(model, store, pair.hi, eval_rows);
            std::vector<std::size_t> identity(eval_rows.size());
            std::iota(identity.begin(), identity.end(), std::size_t{0});
            for (std::size_t k : {std::size_t{1}, std::size_t{5}}) {
                if (k > eval_rows.size()) continue; // small pools report R@1 only
                const double fwd = recall_at_k(lo_emb, hi_emb, identity, k);
                const double bwd = recall_at_k(hi_emb, lo_emb, identity, k);
                rows.push_back({policy_name, seed, k == 1 ? "r1" : "r5", pair.name(),
                                0.5 * (fwd + bwd), eval_rows.size(), eval_rows.size()});
            }
        }
    }

    if (options.classification && !options.classify_benchmarks.empty()) {
        // prompts are train-split texts grouped by cluster; prototypes are
        // shared across the benchmarks
        std::map<std::size_t, std::vector<std::size_t>> prompts_by_class;
        for (std::size_t row : train_rows)
            if (row < truth.cluster[ti].size())
                prompts_by_class[truth.cluster[ti][row]].push_back(row);
        std::vector<Matrix> prompt_embs(truth.cluster_count);
        for (std::size_t c = 0; c < truth.cluster_count; ++c) {
            const auto it = prompts_by_class.find(c);
            if (it == prompts_by_class.end())
                throw ConfigError("evaluate_policy: cluster " + std::to_string(c) +
                                  " has no prompt texts in the train split");
            prompt_embs[c] = embed(model, store, Modality::Text, it->second);
        }
        for (Modality bench : options.classify_benchmarks) {
            const std::size_t bi = modality_index(bench);
            std::vector<std::size_t> classes;
            classes.reserve(held_out_rows.size());
            for (std::size_t row : held_out_rows) classes.push_back(truth.cluster[bi][row]);
            const Matrix items = embed(model, store, bench, held_out_rows);
            const ClassificationReport report =
                zero_shot_classify(items, classes, prompt_embs);
            rows.push_back({policy_name, seed, "top1", "classify-" + modality_name(bench),
                            report.top1, report.items, report.classes});
            if (report.top5_valid)
                rows.push_back({policy_name, seed, "top5", "classify-" + modality_name(bench),
                                report.top5, report.items, report.classes});
        }
    }

    if (options.discrimination) {
        const Matrix texts = embed(model, store, Modality::Text, held_out_rows);
        rows.push_back({policy_name, seed, "discrimination", "text", discrimination(texts),
                        held_out_rows.size(), held_out_rows.size()});
    }
    return rows;
}

namespace {

struct RoutedVariant {
    bool use_align;
    bool use_dec;
};

// returns the variant for routed policies, nullopt for manual ones
std::optional<RoutedVariant> routed_variant(const std::string& policy) {
    if (policy == "routed") return RoutedVariant{true, true};
    if (policy == "routed-align") return RoutedVariant{true, false};
    if (policy == "routed-dec") return RoutedVariant{false, true};
    return std::nullopt;
}

std::optional<ManualPreset> manual_preset(const std::string& policy) {
    if (policy == "mean") return ManualPreset::Mean;
    if (policy == "at-high") return ManualPreset::ATHigh;
    if (policy == "vt-high") return ManualPreset::VTHigh;
    if (policy == "pvt-high") return ManualPreset::PVTHigh;
    return std::nullopt;
}

} // namespace

std::vector<MetricRow> ablation_grid(const AblationConfig& cfg) {
    bool has_mean = false, has_routed = false;
    for (const std::string& policy : cfg.policies) {
        if (policy == "mean") has_mean = true;
        if (policy == "routed") has_routed = true;
        if (!routed_variant(policy) && !manual_preset(policy))
            throw ConfigError("ablation: unknown policy " + policy);
    }
    if (!has_mean || !has_routed)
        throw ConfigError("ablation: policies must include mean and routed");
    if (cfg.seeds.empty()) throw ConfigError("ablation: seeds must be non-empty");
    for (std::size_t count : cfg.world.items_per_modality)
        if (count != cfg.world.items_per_modality[0])
            throw ConfigError("ablation: equal items_per_modality required for matched eval");

    std::vector<MetricRow> rows;
    for (std::uint64_t seed : cfg.seeds) {
        WorldConfig world_cfg = cfg.world;
        world_cfg.seed = seed;
        const World world = generate_world(world_cfg);
        const WorldTruth truth = WorldTruth::from_world(world);
        const RetrievalRoster roster = RetrievalRoster::defaults_for(world_cfg.spaces);

        auto [train_rows, held_out_rows] =
            split_items(world_cfg.items_per_modality[0], cfg.train_fraction, seed);
        std::array<std::vector<std::size_t>, 4> pools;
        for (Modality m : kModalities) pools[modality_index(m)] = train_rows;
        std::vector<PseudoQuadruple> quads = build_quadruples(world.store, roster, pools);
        if (cfg.dedupe) quads = dedupe_quadruples(quads);

        BindConfig bind_cfg = cfg.bind;
        bind_cfg.seed = seed;
        const SpaceSpec& anchor = world.store.anchor();
        EnsembleModel base;
        base.registry = EncoderRegistry::build(world_cfg.spaces);
        base.anchor_name = anchor.name;
        base.anchor_dim = anchor.dim;
        for (const SpaceSpec& spec : world_cfg.spaces) {
            if (spec.is_anchor) continue;
            BoundSpace bound = make_bound_space(spec, anchor.dim, bind_cfg);
            train_projector(bound, quads, world.store, bind_cfg);
            base.bound.emplace(spec.name, std::move(bound));
        }

        std::map<std::string, RouterSet> trained_sets;
        for (const std::string& policy : cfg.policies) {
            const auto variant = routed_variant(policy);
            if (!variant || trained_sets.count(policy)) continue;
            RouteConfig route_cfg = cfg.route;
            route_cfg.seed = seed;
            route_cfg.use_align = variant->use_align;
            route_cfg.use_dec = variant->use_dec;
            EnsembleModel model = base;
            model.policy = make_routers(model.registry, model.anchor_dim, route_cfg);
            train_routers(model, world.store, quads, truth.text_domain, route_cfg);
            trained_sets.emplace(policy, std::get<RouterSet>(model.policy));
        }

        for (const std::string& policy : cfg.policies) {
            EnsembleModel model = base;
            if (const auto preset = manual_preset(policy))
                model.policy = manual_policy(*preset, model.registry, cfg.w_high);
            else
                model.policy = trained_sets.at(policy);
            std::vector<MetricRow> policy_rows =
                evaluate_policy(model, world.store, truth, held_out_rows, train_rows,
                                cfg.eval, policy, seed);
            rows.insert(rows.end(), policy_rows.begin(), policy_rows.end());
        }
    }
    return rows;
}

void write_metrics_csv(const std::vector<MetricRow>& rows, const std::string& path) {
    std::ostringstream out;
    out << "policy,seed,metric,subject,value,queries,pool\n";
    out.precision(17);
    for (const MetricRow& r : rows)
        out << r.policy << ',' << r.seed << ',' << r.metric << ',' << r.subject << ','
            << r.value << ',' << r.queries << ',' << r.pool << '\n';
    write_file_atomic(path, out.str());
}

std::vector<MetricRow> read_metrics_csv(const std::string& path) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line) || line != "policy,seed,metric,subject,value,queries,pool")
        throw DataError(path + ": bad metrics CSV header");
    std::vector<MetricRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream fields(line);
        MetricRow r;
        std::string field;
        std::getline(fields, r.policy, ',');
        std::getline(fields, field, ',');
        r.seed = std::stoull(field);
        std::getline(fields, r.metric, ',');
        std::getline(fields, r.subject, ',');
        std::getline(fields, field, ',');
        r.value = std::stod(field);
        std::getline(fields, field, ',');
        r.queries = std::stoull(field);
        if (!std::getline(fields, field, ','))
            throw DataError(path + ": malformed metrics row: " + line);
        r.pool = std::stoull(field);
        rows.push_back(std::move(r));
    }
    return rows;
}

std::string run_id_for(const std::string& config_echo) {
    // FNV-1a folded through two passes for a 16-hex id
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : config_echo) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::ostringstream out;
    out << std::hex;
    out.width(16);
    out.fill('0');
    out << h;
    return out.str();
}

void write_report_bundle(const std::vector<MetricRow>& rows, const std::string& config_echo,
                         const std::vector<std::uint64_t>& seeds, const std::string& path) {
    json bundle;
    bundle["run_id"] = run_id_for(config_echo);
    try {
        bundle["config"] = json::parse(config_echo);
    } catch (const json::parse_error&) {
        bundle["config"] = config_echo;
    }
    bundle["seeds"] = seeds;
    json rws = json::array();
    for (const MetricRow& r : rows)
        rws.push_back({{"policy", r.policy},
                       {"seed", r.seed},
                       {"metric", r.metric},
                       {"subject", r.subject},
                       {"value", r.value},
                       {"queries", r.queries},
                       {"pool", r.pool}});
    bundle["rows"] = rws;
    write_file_atomic(path, bundle.dump(2) + "\n");
}

} // namespace spacebind
