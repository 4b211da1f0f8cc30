#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spacebind/matrix.hpp"
#include "spacebind/modality.hpp"
#include "spacebind/pairing.hpp"
#include "spacebind/routing.hpp"
#include "spacebind/store.hpp"
#include "spacebind/world.hpp"

namespace spacebind {

// Fraction of queries whose ground-truth pool row ranks in the top k by
// cosine; ties resolve to the lowest pool index.
double recall_at_k(const Matrix& queries, const Matrix& pool,
                   const std::vector<std::size_t>& ground_truth, std::size_t k);

struct ClassificationReport {
    double top1 = 0.0;
    double top5 = 0.0;
    bool top5_valid = false; // requires >= 5 classes
    std::size_t classes = 0;
    std::size_t items = 0;
};

// Prototype per class = L2-normalized mean of that class's prompt embeddings;
// prediction = highest-cosine prototype.
ClassificationReport zero_shot_classify(const Matrix& item_embeddings,
                                        const std::vector<std::size_t>& item_classes,
                                        const std::vector<Matrix>& class_prompt_embeddings);

// Mean cosine over all unordered distinct pairs of rows.
double discrimination(const Matrix& text_embeddings);

struct ArithmeticTerm {
    int sign = +1; // +1 or -1
    Modality modality = Modality::Text;
    std::string id;
};

// Signed sum of the terms' ensemble embeddings, L2-normalized, ranked against
// the pool rows by cosine (descending, ties by lowest index). Returns pool
// positions best-first.
std::vector<std::size_t> arithmetic_query(const EnsembleModel& model,
                                          const EmbeddingStore& store,
                                          const std::vector<ArithmeticTerm>& terms,
                                          Modality pool_modality,
                                          const std::vector<std::size_t>& pool_rows);

// Ground-truth annotations carried beside the store (the store itself only
// holds embeddings, matching what real imports provide).
struct WorldTruth {
    std::array<std::vector<std::size_t>, 4> latent;  // by modality, by row
    std::array<std::vector<std::size_t>, 4> cluster; // by modality, by row
    std::vector<std::optional<Modality>> text_domain;
    std::size_t cluster_count = 0;

    static WorldTruth from_world(const World& world);
};

struct MetricRow {
    std::string policy;
    std::uint64_t seed = 0;
    std::string metric;  // r1, r5, top1, top5, discrimination
    std::string subject; // pair name, classify-<modality>, or text
    double value = 0.0;
    std::size_t queries = 0;
    std::size_t pool = 0;
};

struct EvalOptions {
    bool retrieval = true;
    bool classification = true;
    bool discrimination = true;
    std::vector<Modality> classify_benchmarks = {Modality::Point3D, Modality::Audio,
                                                 Modality::Image};
};

// Evaluates one policy on matched held-out rows: six retrieval pairs (cells
// average the two directions; text pools restrict to the partner modality's
// domain), zero-shot classification per benchmark modality with train-split
// text prompts, and the text discrimination metric. R@5 cells are emitted
// only when the pool holds at least 5 items.
std::vector<MetricRow> evaluate_policy(const EnsembleModel& model, const EmbeddingStore& store,
                                       const WorldTruth& truth,
                                       const std::vector<std::size_t>& held_out_rows,
                                       const std::vector<std::size_t>& train_rows,
                                       const EvalOptions& options, const std::string& policy_name,
                                       std::uint64_t seed);

struct AblationConfig {
    WorldConfig world;
    BindConfig bind;
    RouteConfig route;
    EvalOptions eval;
    double train_fraction = 0.9;
    bool dedupe = false;
    double w_high = 0.6;
    // canonical names: mean, at-high, vt-high, pvt-high, routed,
    // routed-align, routed-dec
    std::vector<std::string> policies = {"mean", "routed"};
    std::vector<std::uint64_t> seeds = {1};
};

// Full pipeline per (seed): world, split, quadruples, binding, router
// variants as required by the policies, then one evaluation per policy.
// Policies must include mean and routed.
std::vector<MetricRow> ablation_grid(const AblationConfig& cfg);

void write_metrics_csv(const std::vector<MetricRow>& rows, const std::string& path);
std::vector<MetricRow> read_metrics_csv(const std::string& path);
// JSON bundle: run id, config echo, seeds, rows.
void write_report_bundle(const std::vector<MetricRow>& rows, const std::string& config_echo,
                         const std::vector<std::uint64_t>& seeds, const std::string& path);
// Deterministic 16-hex id from the config echo.
std::string run_id_for(const std::string& config_echo);

} // namespace spacebind
