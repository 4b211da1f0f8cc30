#pragma once

// Shared helpers for the test binaries: scratch directories, small world
// configurations, and deliberately naive re-implementations used as oracles
// against the library code. The oracles favor clarity over speed and share
// no code with the implementations they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "spacebind/matrix.hpp"
#include "spacebind/modality.hpp"
#include "spacebind/pairing.hpp"
#include "spacebind/rng.hpp"
#include "spacebind/store.hpp"
#include "spacebind/world.hpp"

namespace testsupport {

using namespace spacebind;

// fresh empty directory under the system temp root
inline std::filesystem::path scratch_dir(const std::string& name) {
    const std::filesystem::path root =
        std::filesystem::temp_directory_path() / "spacebind-tests";
    const std::filesystem::path dir = root / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

// small world that generates in well under a second
inline WorldConfig tiny_world(std::uint64_t seed = 5, std::size_t items = 48) {
    WorldConfig cfg;
    cfg.seed = seed;
    cfg.latent_dim = 6;
    cfg.items_per_modality = {items, items, items, items};
    cfg.cluster_count = 4;
    cfg.spaces = {
        {"anchor", SpaceFamily::ImageText, 12, true},
        {"at1", SpaceFamily::AudioText, 10, false},
        {"pvt1", SpaceFamily::PointImageText, 10, false},
        {"avt1", SpaceFamily::AudioImageText, 10, false},
    };
    return cfg;
}

inline double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

inline double norm(const double* a, std::size_t n) { return std::sqrt(dot(a, a, n)); }

inline double cosine_rows(const Matrix& a, std::size_t i, const Matrix& b, std::size_t j) {
    return dot(a.row_ptr(i), b.row_ptr(j), a.cols) /
           (norm(a.row_ptr(i), a.cols) * norm(b.row_ptr(j), b.cols));
}

inline Matrix random_unit_rows(std::uint64_t key, std::size_t rows, std::size_t cols) {
    Rng rng(key);
    return l2_normalize_rows(rng.normal_matrix(rows, cols));
}

// every row is the same first basis vector
inline Matrix constant_unit_rows(std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) m(i, 0) = 1.0;
    return m;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(a.data[i] - b.data[i]));
    return worst;
}

// --- brute-force retrieval oracles ------------------------------------------

// nearest pool row by cosine, first index winning ties
inline std::size_t naive_top1(const Matrix& queries, std::size_t q, const Matrix& pool) {
    std::size_t best = 0;
    double best_sim = -2.0;
    for (std::size_t j = 0; j < pool.rows; ++j) {
        const double sim = cosine_rows(queries, q, pool, j);
        if (sim > best_sim) {
            best_sim = sim;
            best = j;
        }
    }
    return best;
}

// fraction of queries whose ground-truth row is within the k most similar
// pool rows; ranks count strictly-better rows plus earlier equal rows
inline double naive_recall_at_k(const Matrix& queries, const Matrix& pool,
                                const std::vector<std::size_t>& ground_truth, std::size_t k) {
    std::size_t hits = 0;
    for (std::size_t q = 0; q < queries.rows; ++q) {
        const std::size_t gt = ground_truth[q];
        const double gt_sim = cosine_rows(queries, q, pool, gt);
        std::size_t rank = 0;
        for (std::size_t j = 0; j < pool.rows; ++j) {
            if (j == gt) continue;
            const double sim = cosine_rows(queries, q, pool, j);
            if (sim > gt_sim || (sim == gt_sim && j < gt)) ++rank;
        }
        if (rank < k) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(queries.rows);
}

struct NaiveClassifyResult {
    double top1 = 0.0;
    double top5 = 0.0;
};

// nearest class prompt per item; top-5 counts the true class among the five
// most similar prompts
inline NaiveClassifyResult naive_classify(const Matrix& items,
                                          const std::vector<std::size_t>& item_classes,
                                          const Matrix& prompts) {
    std::size_t hit1 = 0;
    std::size_t hit5 = 0;
    for (std::size_t i = 0; i < items.rows; ++i) {
        const std::size_t truth = item_classes[i];
        const double truth_sim = cosine_rows(items, i, prompts, truth);
        std::size_t rank = 0;
        for (std::size_t c = 0; c < prompts.rows; ++c) {
            if (c == truth) continue;
            const double sim = cosine_rows(items, i, prompts, c);
            if (sim > truth_sim || (sim == truth_sim && c < truth)) ++rank;
        }
        if (rank < 1) ++hit1;
        if (rank < 5) ++hit5;
    }
    NaiveClassifyResult out;
    out.top1 = static_cast<double>(hit1) / static_cast<double>(items.rows);
    out.top5 = static_cast<double>(hit5) / static_cast<double>(items.rows);
    return out;
}

// mean pairwise cosine over distinct row pairs
inline double naive_discrimination(const Matrix& texts) {
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < texts.rows; ++i)
        for (std::size_t j = i + 1; j < texts.rows; ++j) {
            total += cosine_rows(texts, i, texts, j);
            ++pairs;
        }
    return total / static_cast<double>(pairs);
}

// --- brute-force pseudo-pairing oracle ---------------------------------------

// pool rows of one modality embedded in one space, normalized
inline Matrix pool_rows_in_space(const EmbeddingStore& store, const std::string& space,
                                 Modality m, const std::vector<std::size_t>& pool) {
    return l2_normalize_rows(gather_rows(store.matrix(space, m), pool));
}

// Mirrors the documented retrieval contract step by step: for every starting
// modality (canonical order) and pool item, each remaining modality is filled
// by nearest-neighbor retrieval inside the rostered direct space, or by two
// nearest-neighbor hops through the declared pivot modality.
inline std::vector<PseudoQuadruple> naive_quadruples(
    const EmbeddingStore& store, const RetrievalRoster& roster,
    const std::array<std::vector<std::size_t>, 4>& pools) {
    std::vector<PseudoQuadruple> out;
    for (Modality origin : kModalities) {
        const auto& origin_pool = pools[modality_index(origin)];
        for (std::size_t i = 0; i < origin_pool.size(); ++i) {
            PseudoQuadruple quad;
            quad.origin = origin;
            quad.ids[modality_index(origin)] =
                store.item_ids(origin)[origin_pool[i]];
            for (Modality target : kModalities) {
                if (target == origin) continue;
                const ModalityPair pair(origin, target);
                std::size_t pick = 0;
                if (roster.direct.count(pair)) {
                    const std::string& space = roster.direct.at(pair);
                    const Matrix q = pool_rows_in_space(store, space, origin, origin_pool);
                    const Matrix p = pool_rows_in_space(store, space, target,
                                                        pools[modality_index(target)]);
                    pick = naive_top1(q, i, p);
                } else {
                    const Modality pivot = roster.pivots.at(pair);
                    const std::string& hop1 = roster.direct.at(ModalityPair(origin, pivot));
                    const std::string& hop2 = roster.direct.at(ModalityPair(pivot, target));
                    const Matrix q1 = pool_rows_in_space(store, hop1, origin, origin_pool);
                    const Matrix p1 = pool_rows_in_space(store, hop1, pivot,
                                                         pools[modality_index(pivot)]);
                    const std::size_t mid = naive_top1(q1, i, p1);
                    const Matrix q2 = pool_rows_in_space(store, hop2, pivot,
                                                         pools[modality_index(pivot)]);
                    const Matrix p2 = pool_rows_in_space(store, hop2, target,
                                                         pools[modality_index(target)]);
                    pick = naive_top1(q2, mid, p2);
                }
                quad.ids[modality_index(target)] =
                    store.item_ids(target)[pools[modality_index(target)][pick]];
            }
            out.push_back(quad);
        }
    }
    return out;
}

inline bool same_quadruple(const PseudoQuadruple& a, const PseudoQuadruple& b) {
    return a.origin == b.origin && a.ids == b.ids;
}

// embedding store over explicit matrices, ids "p0, p1, ..." per modality
inline EmbeddingStore make_store(const std::vector<SpaceSpec>& spaces,
                                 const std::map<std::string, std::array<Matrix, 4>>& tables,
                                 std::size_t items) {
    EmbeddingStore store;
    store.spaces = spaces;
    for (Modality m : kModalities) {
        std::vector<std::string> ids;
        for (std::size_t i = 0; i < items; ++i)
            ids.push_back(std::string(1, modality_prefix(m)) + std::to_string(i));
        store.set_item_ids(m, ids);
    }
    for (const auto& [name, mats] : tables)
        for (Modality m : kModalities)
            if (mats[modality_index(m)].rows > 0)
                store.put(name, m, mats[modality_index(m)]);
    return store;
}

} // namespace testsupport
