#pragma once

#include <array>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "spacebind/matrix.hpp"
#include "spacebind/modality.hpp"
#include "spacebind/store.hpp"

namespace spacebind {

// Which source space performs retrieval for each modality pair. Pairs with no
// designated space go through a declared two-hop pivot (e.g. Point3D->Image
// then Image->Audio), whose hops must themselves be covered directly.
struct RetrievalRoster {
    std::map<ModalityPair, std::string> direct;
    std::map<ModalityPair, Modality> pivots;

    // First covering space per pair in roster order; pivot through the first
    // modality (canonical order) whose two hops are both covered.
    static RetrievalRoster defaults_for(const std::vector<SpaceSpec>& spaces);
    // Throws ConfigError naming the first uncovered pair or invalid entry.
    void validate(const std::vector<SpaceSpec>& spaces) const;
};

struct PseudoQuadruple {
    Modality origin = Modality::Point3D;
    std::array<std::string, 4> ids; // indexed by modality

    const std::string& p() const { return ids[0]; }
    const std::string& a() const { return ids[1]; }
    const std::string& v() const { return ids[2]; }
    const std::string& t() const { return ids[3]; }
    bool same_items(const PseudoQuadruple& o) const { return ids == o.ids; }
};

// Index of the highest-cosine pool row per query row; ties take the lowest
// pool index. Rows are normalized internally.
std::vector<std::size_t> top1(const Matrix& queries, const Matrix& pool);

// One quadruple per (starting modality, pool item): the start item keeps its
// own id and the other three modalities are filled by roster retrieval.
// Output order: starting modalities in canonical order, then pool order.
// pools hold row indices into the store's per-modality item lists.
std::vector<PseudoQuadruple> build_quadruples(
    const EmbeddingStore& store, const RetrievalRoster& roster,
    const std::array<std::vector<std::size_t>, 4>& pools);

// Removes exact duplicates on (p, a, v, t) ignoring origin; stable, keeps the
// first occurrence.
std::vector<PseudoQuadruple> dedupe_quadruples(const std::vector<PseudoQuadruple>& quads);

// Fraction of quadruples whose four items share one ground-truth latent.
double quadruple_accuracy(
    const std::vector<PseudoQuadruple>& quads,
    const std::function<std::size_t(Modality, const std::string&)>& latent_of);

// TSV with header "origin\tp\ta\tv\tt".
void write_quadruples_tsv(const std::vector<PseudoQuadruple>& quads, const std::string& path);
std::vector<PseudoQuadruple> read_quadruples_tsv(const std::string& path);

} // namespace spacebind
