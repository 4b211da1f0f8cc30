#include "spacebind/pairing.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "spacebind/errors.hpp"
#include "spacebind/io.hpp"

namespace spacebind {

namespace {

const SpaceSpec* find_space(const std::vector<SpaceSpec>& spaces, const std::string& name) {
    for (const SpaceSpec& s : spaces)
        if (s.name == name) return &s;
    return nullptr;
}

} // namespace

RetrievalRoster RetrievalRoster::defaults_for(const std::vector<SpaceSpec>& spaces) {
    RetrievalRoster roster;
    for (const ModalityPair& pair : all_modality_pairs()) {
        for (const SpaceSpec& s : spaces) {
            if (family_covers(s.family, pair.lo) && family_covers(s.family, pair.hi)) {
                roster.direct[pair] = s.name;
                break;
            }
        }
    }
    for (const ModalityPair& pair : all_modality_pairs()) {
        if (roster.direct.count(pair)) continue;
        for (Modality pivot : kModalities) {
            if (pivot == pair.lo || pivot == pair.hi) continue;
            if (roster.direct.count(ModalityPair(pair.lo, pivot)) &&
                roster.direct.count(ModalityPair(pivot, pair.hi))) {
                roster.pivots[pair] = pivot;
                break;
            }
        }
    }
    return roster;
}

void RetrievalRoster::validate(const std::vector<SpaceSpec>& spaces) const {
    for (const auto& [pair, name] : direct) {
        const SpaceSpec* s = find_space(spaces, name);
        if (!s)
            throw ConfigError("roster: pair " + pair.name() + " names unknown space " + name);
        if (!family_covers(s->family, pair.lo) || !family_covers(s->family, pair.hi))
            throw ConfigError("roster: space " + name + " does not cover pair " + pair.name());
    }
    for (const auto& [pair, pivot] : pivots) {
        if (direct.count(pair))
            throw ConfigError("roster: pair " + pair.name() + " is both direct and pivoted");
        if (pivot == pair.lo || pivot == pair.hi)
            throw ConfigError("roster: pair " + pair.name() + " pivot must be a third modality");
        if (!direct.count(ModalityPair(pair.lo, pivot)) ||
            !direct.count(ModalityPair(pivot, pair.hi)))
            throw ConfigError("roster: pair " + pair.name() + " pivot through " +
                              modality_name(pivot) + " has an uncovered hop");
    }
    for (const ModalityPair& pair : all_modality_pairs())
        if (!direct.count(pair) && !pivots.count(pair))
            throw ConfigError("roster: pair " + pair.name() + " is not covered");
}

std::vector<std::size_t> top1(const Matrix& queries, const Matrix& pool) {
    if (queries.cols != pool.cols)
        throw ShapeError("top1: query dim " + std::to_string(queries.cols) + " vs pool dim " +
                         std::to_string(pool.cols));
    if (pool.rows == 0) throw DataError("top1: empty pool");
    const Matrix q = l2_normalize_rows(queries);
    const Matrix p = l2_normalize_rows(pool);
    std::vector<std::size_t> best(q.rows, 0);
    for (std::size_t i = 0; i < q.rows; ++i) {
        const double* qi = q.row_ptr(i);
        double best_sim = -2.0;
        std::size_t best_j = 0;
        for (std::size_t j = 0; j < p.rows; ++j) {
            const double* pj = p.row_ptr(j);
            double s = 0.0;
            for (std::size_t k = 0; k < q.cols; ++k) s += qi[k] * pj[k];
            if (s > best_sim) {
                best_sim = s;
                best_j = j;
            }
        }
        best[i] = best_j;
    }
    return best;
}

namespace {

struct PoolCache {
    const EmbeddingStore& store;
    const std::array<std::vector<std::size_t>, 4>& pools;
    // gathered pool rows per (space, modality), normalized
    std::map<std::pair<std::string, int>, Matrix> cached;

    const Matrix& get(const std::string& space, Modality m) {
        const auto key = std::make_pair(space, static_cast<int>(m));
        auto it = cached.find(key);
        if (it == cached.end()) {
            Matrix g = gather_rows(store.matrix(space, m), pools[modality_index(m)]);
            it = cached.emplace(key, l2_normalize_rows(g)).first;
        }
        return it->second;
    }
};

} // namespace

std::vector<PseudoQuadruple> build_quadruples(
    const EmbeddingStore& store, const RetrievalRoster& roster,
    const std::array<std::vector<std::size_t>, 4>& pools) {
    roster.validate(store.spaces);
    for (Modality m : kModalities)
        if (pools[modality_index(m)].empty())
            throw ConfigError("build_quadruples: empty pool for " + modality_name(m));

    PoolCache cache{store, pools, {}};
    std::vector<PseudoQuadruple> out;

    for (Modality origin : kModalities) {
        const auto& origin_pool = pools[modality_index(origin)];
        // retrieved pool positions per target modality, aligned to origin_pool
        std::array<std::vector<std::size_t>, 4> picks;
        picks[modality_index(origin)].resize(origin_pool.size());
        for (std::size_t i = 0; i < origin_pool.size(); ++i)
            picks[modality_index(origin)][i] = i;

        for (Modality target : kModalities) {
            if (target == origin) continue;
            const ModalityPair pair(origin, target);
            const auto direct_it = roster.direct.find(pair);
            if (direct_it != roster.direct.end()) {
                const std::string& space = direct_it->second;
                picks[modality_index(target)] =
                    top1(cache.get(space, origin), cache.get(space, target));
                continue;
            }
            const Modality pivot = roster.pivots.at(pair);
            const std::string& hop1_space = roster.direct.at(ModalityPair(origin, pivot));
            const std::string& hop2_space = roster.direct.at(ModalityPair(pivot, target));
            const std::vector<std::size_t> pivot_picks =
                top1(cache.get(hop1_space, origin), cache.get(hop1_space, pivot));
            // re-embed the retrieved pivot items in the second hop's space
            const Matrix& hop2_pivot_pool = cache.get(hop2_space, pivot);
            picks[modality_index(target)] =
                top1(gather_rows(hop2_pivot_pool, pivot_picks), cache.get(hop2_space, target));
        }

        for (std::size_t i = 0; i < origin_pool.size(); ++i) {
            PseudoQuadruple quad;
            quad.origin = origin;
            for (Modality m : kModalities) {
                const std::size_t mi = modality_index(m);
                const std::size_t row = pools[mi][picks[mi][i]];
                quad.ids[mi] = store.item_ids(m)[row];
            }
            out.push_back(std::move(quad));
        }
    }
    return out;
}

std::vector<PseudoQuadruple> dedupe_quadruples(const std::vector<PseudoQuadruple>& quads) {
    std::vector<PseudoQuadruple> out;
    std::set<std::array<std::string, 4>> seen;
    for (const PseudoQuadruple& q : quads)
        if (seen.insert(q.ids).second) out.push_back(q);
    return out;
}

double quadruple_accuracy(
    const std::vector<PseudoQuadruple>& quads,
    const std::function<std::size_t(Modality, const std::string&)>& latent_of) {
    if (quads.empty()) throw DataError("quadruple_accuracy: no quadruples");
    std::size_t matched = 0;
    for (const PseudoQuadruple& q : quads) {
        const std::size_t z = latent_of(Modality::Point3D, q.p());
        if (latent_of(Modality::Audio, q.a()) == z && latent_of(Modality::Image, q.v()) == z &&
            latent_of(Modality::Text, q.t()) == z)
            ++matched;
    }
    return static_cast<double>(matched) / static_cast<double>(quads.size());
}

void write_quadruples_tsv(const std::vector<PseudoQuadruple>& quads, const std::string& path) {
    std::ostringstream out;
    out << "origin\tp\ta\tv\tt\n";
    for (const PseudoQuadruple& q : quads)
        out << modality_name(q.origin) << '\t' << q.p() << '\t' << q.a() << '\t' << q.v()
            << '\t' << q.t() << '\n';
    write_file_atomic(path, out.str());
}

std::vector<PseudoQuadruple> read_quadruples_tsv(const std::string& path) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line) || line != "origin\tp\ta\tv\tt")
        throw DataError(path + ": bad quadruple TSV header");
    std::vector<PseudoQuadruple> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string origin, p, a, v, t;
        if (!std::getline(fields, origin, '\t') || !std::getline(fields, p, '\t') ||
            !std::getline(fields, a, '\t') || !std::getline(fields, v, '\t') ||
            !std::getline(fields, t, '\t'))
            throw DataError(path + ": malformed row at line " + std::to_string(line_no));
        PseudoQuadruple q;
        q.origin = modality_from_name(origin);
        q.ids = {p, a, v, t};
        out.push_back(std::move(q));
    }
    return out;
}

} // namespace spacebind
