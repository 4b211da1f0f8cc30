#include "spacebind/world.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spacebind/errors.hpp"

namespace spacebind {

namespace {

const std::array<std::string, 4> kModalityNames = {"point3d", "audio", "image", "text"};
const std::array<std::string, 4> kFamilyNames = {"audio-text", "image-text", "point-image-text",
                                                 "audio-image-text"};

} // namespace

const std::string& modality_name(Modality m) { return kModalityNames[modality_index(m)]; }

Modality modality_from_name(const std::string& name) {
    for (std::size_t i = 0; i < 4; ++i)
        if (kModalityNames[i] == name) return static_cast<Modality>(static_cast<int>(i));
    throw DataError("unknown modality \"" + name + "\"");
}

char modality_prefix(Modality m) {
    switch (m) {
        case Modality::Point3D: return 'p';
        case Modality::Audio: return 'a';
        case Modality::Image: return 'v';
        case Modality::Text: return 't';
    }
    throw DataError("unknown modality value");
}

const std::string& family_name(SpaceFamily f) { return kFamilyNames[static_cast<int>(f)]; }

SpaceFamily family_from_name(const std::string& name) {
    for (std::size_t i = 0; i < 4; ++i)
        if (kFamilyNames[i] == name) return static_cast<SpaceFamily>(static_cast<int>(i));
    throw DataError("unknown space family \"" + name + "\"");
}

const std::vector<Modality>& family_modalities(SpaceFamily f) {
    static const std::vector<Modality> at = {Modality::Audio, Modality::Text};
    static const std::vector<Modality> vt = {Modality::Image, Modality::Text};
    static const std::vector<Modality> pvt = {Modality::Point3D, Modality::Image, Modality::Text};
    static const std::vector<Modality> avt = {Modality::Audio, Modality::Image, Modality::Text};
    switch (f) {
        case SpaceFamily::AudioText: return at;
        case SpaceFamily::ImageText: return vt;
        case SpaceFamily::PointImageText: return pvt;
        case SpaceFamily::AudioImageText: return avt;
    }
    throw DataError("unknown space family value");
}

bool family_covers(SpaceFamily f, Modality m) {
    const auto& mods = family_modalities(f);
    return std::find(mods.begin(), mods.end(), m) != mods.end();
}

ModalityPair::ModalityPair(Modality a, Modality b) {
    if (a == b) throw ConfigError("ModalityPair: modalities must differ");
    lo = std::min(a, b);
    hi = std::max(a, b);
}

bool ModalityPair::operator<(const ModalityPair& o) const {
    if (lo != o.lo) return lo < o.lo;
    return hi < o.hi;
}

std::string ModalityPair::name() const {
    return modality_name(lo) + "-" + modality_name(hi);
}

ModalityPair pair_from_name(const std::string& name) {
    const auto dash = name.find('-');
    if (dash == std::string::npos)
        throw ConfigError("modality pair \"" + name + "\" is not of the form a-b");
    return ModalityPair(modality_from_name(name.substr(0, dash)),
                        modality_from_name(name.substr(dash + 1)));
}

const std::vector<ModalityPair>& all_modality_pairs() {
    static const std::vector<ModalityPair> pairs = [] {
        std::vector<ModalityPair> out;
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = i + 1; j < 4; ++j)
                out.emplace_back(kModalities[i], kModalities[j]);
        return out;
    }();
    return pairs;
}

std::vector<SpaceSpec> WorldConfig::default_spaces() {
    return {
        {"anchor", SpaceFamily::ImageText, 32, true},
        {"vt2", SpaceFamily::ImageText, 24, false},
        {"at1", SpaceFamily::AudioText, 24, false},
        {"at2", SpaceFamily::AudioText, 24, false},
        {"pvt1", SpaceFamily::PointImageText, 24, false},
        {"pvt2", SpaceFamily::PointImageText, 24, false},
        {"avt1", SpaceFamily::AudioImageText, 24, false},
    };
}

void WorldConfig::validate() const {
    if (latent_dim < 2) throw ConfigError("world.latent_dim: must be >= 2");
    for (Modality m : kModalities)
        if (items_per_modality[modality_index(m)] < 2)
            throw ConfigError("world.items_per_modality: must be >= 2 for " + modality_name(m));
    if (cluster_count < 1) throw ConfigError("world.cluster_count: must be >= 1");
    if (cluster_spread < 0.0) throw ConfigError("world.cluster_spread: must be >= 0");
    for (double s : observation_noise)
        if (s < 0.0) throw ConfigError("world.observation_noise: must be >= 0");
    if (encoder_noise_home < 0.0) throw ConfigError("world.encoder_noise_home: must be >= 0");
    if (encoder_noise_away < encoder_noise_home)
        throw ConfigError("world.encoder_noise_away: must be >= encoder_noise_home");
    double mix_sum = 0.0;
    for (double f : text_domain_mix) {
        if (f < 0.0) throw ConfigError("world.text_domain_mix: fractions must be >= 0");
        mix_sum += f;
    }
    if (std::abs(mix_sum - 1.0) > 1e-9)
        throw ConfigError("world.text_domain_mix: fractions must sum to 1");
    if (obs_mixing < 0.0) throw ConfigError("world.obs_mixing: must be >= 0");
    if (modality_gap < 0.0) throw ConfigError("world.modality_gap: must be >= 0");
    if (spaces.empty()) throw ConfigError("world.spaces: must list at least one space");
    std::size_t anchors = 0;
    for (const SpaceSpec& s : spaces) {
        if (s.name.empty()) throw ConfigError("world.spaces: space name must be non-empty");
        if (s.dim < 2) throw ConfigError("world.spaces: dim must be >= 2 for " + s.name);
        if (s.is_anchor) {
            ++anchors;
            if (s.family != SpaceFamily::ImageText)
                throw ConfigError("world.spaces: anchor " + s.name + " must be image-text");
        }
    }
    if (anchors != 1) throw ConfigError("world.spaces: exactly one anchor required, found " +
                                        std::to_string(anchors));
    for (std::size_t i = 0; i < spaces.size(); ++i)
        for (std::size_t j = i + 1; j < spaces.size(); ++j)
            if (spaces[i].name == spaces[j].name)
                throw ConfigError("world.spaces: duplicate space name " + spaces[i].name);
    if (identical_pipelines)
        for (const SpaceSpec& s : spaces)
            if (s.dim != spaces[0].dim)
                throw ConfigError(
                    "world.identical_pipelines: requires equal dims across spaces");
}

namespace {

// Orthonormalizes the columns of a square matrix in place (Gram-Schmidt).
Matrix orthonormalize_columns(Matrix g) {
    const std::size_t n = g.rows;
    for (std::size_t c = 0; c < n; ++c) {
        for (std::size_t prev = 0; prev < c; ++prev) {
            double dot = 0.0;
            for (std::size_t r = 0; r < n; ++r) dot += g(r, c) * g(r, prev);
            for (std::size_t r = 0; r < n; ++r) g(r, c) -= dot * g(r, prev);
        }
        double norm = 0.0;
        for (std::size_t r = 0; r < n; ++r) norm += g(r, c) * g(r, c);
        norm = std::sqrt(norm);
        if (norm < 1e-9)
            throw DataError("orthonormalize_columns: degenerate random basis");
        for (std::size_t r = 0; r < n; ++r) g(r, c) /= norm;
    }
    return g;
}

Matrix identity_matrix(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

} // namespace

bool World::text_is_home(const Item& text_item, SpaceFamily family) const {
    if (!text_item.text_domain) return false;
    return family_covers(family, *text_item.text_domain);
}

Vec World::observe(Modality m, std::size_t item_index, bool with_noise) const {
    const Vec& z = latents[item_index];
    const std::size_t mi = modality_index(m);
    Vec o(config.latent_dim, 0.0);
    if (modality_mixing[mi].rows == 0) {
        o = z;
    } else {
        const Matrix& r = modality_mixing[mi];
        for (std::size_t i = 0; i < r.rows; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < r.cols; ++j) s += r(i, j) * z[j];
            o[i] = s;
        }
    }
    if (with_noise && config.observation_noise[mi] > 0.0) {
        Rng rng(derive_key(config.seed, Stream::Observation, mi, item_index));
        for (std::size_t j = 0; j < o.size(); ++j)
            o[j] += config.observation_noise[mi] * rng.normal();
    }
    return o;
}

Vec World::encode(std::size_t space_idx, Modality m, std::size_t item_index,
                  bool with_noise) const {
    const SpaceSpec& spec = config.spaces[space_idx];
    if (!family_covers(spec.family, m))
        throw ConfigError("World::encode: space " + spec.name + " does not cover " +
                          modality_name(m));
    const SpaceParams& params = space_params[space_idx];
    const Matrix& b = params.encoder_maps[modality_index(m)];
    const Vec o = observe(m, item_index, with_noise);
    Vec h(spec.dim, 0.0);
    for (std::size_t i = 0; i < spec.dim; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < o.size(); ++j) s += b(i, j) * o[j];
        h[i] = std::tanh(s);
    }
    Vec e(spec.dim, 0.0);
    if (params.basis.rows == 0) {
        e = h;
    } else {
        for (std::size_t i = 0; i < spec.dim; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < spec.dim; ++j) s += params.basis(i, j) * h[j];
            e[i] = s;
        }
    }
    if (with_noise) {
        const Item& item = items[modality_index(m)][item_index];
        const bool home = (m != Modality::Text) || text_is_home(item, spec.family);
        const double sigma = home ? config.encoder_noise_home : config.encoder_noise_away;
        if (sigma > 0.0) {
            Rng rng(derive_key(config.seed, Stream::EncoderNoise, space_idx, modality_index(m),
                               item_index));
            for (std::size_t i = 0; i < spec.dim; ++i) e[i] += sigma * rng.normal();
        }
    }
    return e;
}

World generate_world(const WorldConfig& cfg) {
    cfg.validate();
    World world;
    world.config = cfg;

    const std::size_t max_items =
        *std::max_element(cfg.items_per_modality.begin(), cfg.items_per_modality.end());

    // ground-truth latents: cluster centers plus per-item spread
    world.cluster_centers.resize(cfg.cluster_count);
    for (std::size_t k = 0; k < cfg.cluster_count; ++k) {
        Rng rng(derive_key(cfg.seed, Stream::ClusterCenters, k));
        world.cluster_centers[k] = rng.normal_vec(cfg.latent_dim);
    }
    world.latents.resize(max_items);
    world.clusters.resize(max_items);
    for (std::size_t i = 0; i < max_items; ++i) {
        Rng assign(derive_key(cfg.seed, Stream::ClusterAssign, i));
        const std::size_t k = assign.below(cfg.cluster_count);
        world.clusters[i] = k;
        Rng rng(derive_key(cfg.seed, Stream::Latent, i));
        Vec z = rng.normal_vec(cfg.latent_dim, cfg.cluster_spread);
        for (std::size_t j = 0; j < cfg.latent_dim; ++j) z[j] += world.cluster_centers[k][j];
        world.latents[i] = z;
    }

    // items; text items additionally draw a domain tag
    static const std::array<Modality, 3> kTextDomains = {Modality::Point3D, Modality::Audio,
                                                         Modality::Image};
    for (Modality m : kModalities) {
        const std::size_t mi = modality_index(m);
        const std::size_t n = cfg.items_per_modality[mi];
        auto& list = world.items[mi];
        list.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            Item item;
            item.id = std::string(1, modality_prefix(m)) + std::to_string(i);
            item.modality = m;
            item.index = i;
            item.latent_index = i;
            item.cluster = world.clusters[i];
            if (m == Modality::Text) {
                Rng rng(derive_key(cfg.seed, Stream::TextDomain, i));
                const double u = rng.uniform();
                double acc = 0.0;
                item.text_domain = kTextDomains.back();
                for (std::size_t d = 0; d < kTextDomains.size(); ++d) {
                    acc += cfg.text_domain_mix[d];
                    if (u < acc) {
                        item.text_domain = kTextDomains[d];
                        break;
                    }
                }
            }
            list.push_back(std::move(item));
        }
    }

    // per-modality observation mixing maps (identity unless obs_mixing > 0)
    for (Modality m : kModalities) {
        const std::size_t mi = modality_index(m);
        if (cfg.obs_mixing <= 0.0) {
            world.modality_mixing[mi] = Matrix(); // empty means identity
            continue;
        }
        Rng rng(derive_key(cfg.seed, Stream::ModalityMixing, mi));
        Matrix g = rng.normal_matrix(cfg.latent_dim, cfg.latent_dim, cfg.obs_mixing);
        add_inplace(g, identity_matrix(cfg.latent_dim));
        world.modality_mixing[mi] = orthonormalize_columns(std::move(g));
    }

    // per-space encoder parameters
    world.space_params.resize(cfg.spaces.size());
    // keep the pre-tanh activations mostly in the linear regime so the
    // encoders stay invertible; saturated maps destroy within-cluster detail
    const double map_scale = 0.4 / std::sqrt(static_cast<double>(cfg.latent_dim));
    for (std::size_t s = 0; s < cfg.spaces.size(); ++s) {
        const SpaceSpec& spec = cfg.spaces[s];
        SpaceParams& params = world.space_params[s];
        // shared per-space map; with identical_pipelines every space draws the
        // same one, so matched items land on identical embeddings
        const std::uint64_t map_key =
            derive_key(cfg.seed, Stream::EncoderMap, cfg.identical_pipelines ? 0 : s);
        Rng map_rng(map_key);
        const Matrix base = map_rng.normal_matrix(spec.dim, cfg.latent_dim, map_scale);
        for (Modality m : family_modalities(spec.family)) {
            const std::size_t mi = modality_index(m);
            Matrix b = base;
            if (!cfg.identical_pipelines && cfg.modality_gap > 0.0) {
                Rng gap_rng(derive_key(cfg.seed, Stream::EncoderMap, s, 1 + mi));
                Matrix d = gap_rng.normal_matrix(spec.dim, cfg.latent_dim,
                                                 cfg.modality_gap * map_scale);
                add_inplace(b, d);
            }
            params.encoder_maps[mi] = std::move(b);
        }
        if (cfg.identical_pipelines) {
            params.basis = Matrix(); // empty means identity
        } else {
            Rng basis_rng(derive_key(cfg.seed, Stream::EncoderBasis, s));
            params.basis = orthonormalize_columns(basis_rng.normal_matrix(spec.dim, spec.dim));
        }
    }

    // embeddings into the store, f32-rounded at insertion
    world.store.seed = cfg.seed;
    world.store.spaces = cfg.spaces;
    for (Modality m : kModalities) {
        const std::size_t mi = modality_index(m);
        std::vector<std::string> ids;
        ids.reserve(world.items[mi].size());
        for (const Item& item : world.items[mi]) ids.push_back(item.id);
        world.store.set_item_ids(m, std::move(ids));
    }
    for (std::size_t s = 0; s < cfg.spaces.size(); ++s) {
        const SpaceSpec& spec = cfg.spaces[s];
        for (Modality m : family_modalities(spec.family)) {
            const std::size_t mi = modality_index(m);
            const std::size_t n = cfg.items_per_modality[mi];
            Matrix e(n, spec.dim);
            for (std::size_t i = 0; i < n; ++i) {
                const Vec row = world.encode(s, m, i, /*with_noise=*/true);
                std::copy(row.begin(), row.end(), e.row_ptr(i));
            }
            world.store.put(spec.name, m, std::move(e));
        }
    }
    world.store.validate();
    return world;
}

std::vector<std::vector<std::size_t>> split_indices(std::size_t count,
                                                    const std::vector<double>& fractions,
                                                    std::uint64_t seed) {
    if (count == 0) throw ConfigError("split_items: empty input");
    if (fractions.empty()) throw ConfigError("split_items: fractions must be non-empty");
    double sum = 0.0;
    for (double f : fractions) {
        if (f < 0.0 || f > 1.0)
            throw ConfigError("split_items: fractions must lie in [0, 1]");
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split_items: fractions must sum to 1");

    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_key(seed, Stream::Split));
    rng.shuffle(order);

    // floor allocation, remainder to the largest fractional parts (ties by
    // earlier group) so group sizes are exact when fractions are exact
    const std::size_t groups = fractions.size();
    std::vector<std::size_t> sizes(groups);
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t g = 0; g < groups; ++g) {
        const double exact = fractions[g] * static_cast<double>(count);
        sizes[g] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        assigned += sizes[g];
        remainders.push_back({exact - static_cast<double>(sizes[g]), g});
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; assigned < count; ++r, ++assigned)
        ++sizes[remainders[r % groups].second];

    std::vector<std::vector<std::size_t>> out(groups);
    std::size_t next = 0;
    for (std::size_t g = 0; g < groups; ++g) {
        out[g].assign(order.begin() + next, order.begin() + next + sizes[g]);
        std::sort(out[g].begin(), out[g].end());
        next += sizes[g];
    }
    return out;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_items(
    std::size_t count, double train_fraction, std::uint64_t seed) {
    auto groups = split_indices(count, {train_fraction, 1.0 - train_fraction}, seed);
    return {std::move(groups[0]), std::move(groups[1])};
}

} // namespace spacebind
