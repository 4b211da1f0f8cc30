#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "spacebind/matrix.hpp"
#include "spacebind/modality.hpp"
#include "spacebind/rng.hpp"
#include "spacebind/store.hpp"

namespace spacebind {

struct WorldConfig {
    std::uint64_t seed = 42;
    std::size_t latent_dim = 16;
    std::array<std::size_t, 4> items_per_modality = {2000, 2000, 2000, 2000};
    std::size_t cluster_count = 120;
    double cluster_spread = 1.0;
    // per-modality sigma of the observation o_m = R_m z + eps
    std::array<double, 4> observation_noise = {0.05, 0.05, 0.05, 0.05};
    // encoder-output sigma: home when the space's family covers the item's
    // domain (non-text items are always home for covered modalities)
    double encoder_noise_home = 0.02;
    double encoder_noise_away = 0.3;
    // fractions of text items describing {Point3D, Audio, Image}, in that order
    std::array<double, 3> text_domain_mix = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    // strength of the per-modality mixing map R_m (0 keeps R_m = identity)
    double obs_mixing = 0.0;
    // per-(space, modality) perturbation of the shared space map, as a
    // fraction of the map scale; models a systematic within-space modality gap
    double modality_gap = 0.15;
    // true collapses every space to the same pipeline (shared map, identity
    // basis, no gap) so matched items embed identically across spaces
    bool identical_pipelines = false;
    std::vector<SpaceSpec> spaces = default_spaces();

    static std::vector<SpaceSpec> default_spaces();
    void validate() const;
};

struct Item {
    std::string id;
    Modality modality = Modality::Point3D;
    std::size_t index = 0;        // position in its modality pool
    std::size_t latent_index = 0; // ground-truth latent (matched across pools)
    std::size_t cluster = 0;
    std::optional<Modality> text_domain; // Text items only
};

// Generation-time parameters of one synthetic source space.
struct SpaceParams {
    std::array<Matrix, 4> encoder_maps; // B per modality (empty if uncovered)
    Matrix basis;                       // orthogonal Q; empty means identity
};

struct World {
    WorldConfig config;
    std::array<std::vector<Item>, 4> items; // by modality
    std::vector<Vec> latents;               // by latent index
    std::vector<std::size_t> clusters;      // by latent index
    std::vector<Vec> cluster_centers;
    std::array<Matrix, 4> modality_mixing; // R per modality; empty means identity
    std::vector<SpaceParams> space_params; // aligned with config.spaces
    EmbeddingStore store;

    // o_m for one item; noiseless variant used by specialization checks
    Vec observe(Modality m, std::size_t item_index, bool with_noise) const;
    // full encoder pipeline of one space on one item
    Vec encode(std::size_t space_idx, Modality m, std::size_t item_index,
               bool with_noise) const;
    bool text_is_home(const Item& text_item, SpaceFamily family) const;
};

World generate_world(const WorldConfig& cfg);

// Seed-deterministic disjoint covering split of [0, count): shuffles, then
// allocates group sizes by largest remainder so exact fractions give exact
// sizes. Groups are returned sorted ascending.
std::vector<std::vector<std::size_t>> split_indices(std::size_t count,
                                                    const std::vector<double>& fractions,
                                                    std::uint64_t seed);
// Two-way convenience wrapper: (train, held_out).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_items(
    std::size_t count, double train_fraction, std::uint64_t seed);

} // namespace spacebind
