#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "spacebind/matrix.hpp"
#include "spacebind/modality.hpp"
#include "spacebind/net.hpp"
#include "spacebind/pairing.hpp"
#include "spacebind/store.hpp"

namespace spacebind {

struct BindConfig {
    double temperature = 0.03;
    std::size_t projector_hidden_dim = 0; // 0 -> 4 * anchor_dim
    std::size_t projector_count = 1;
    double learning_rate = 1e-4;
    std::size_t batch_size = 256;
    std::size_t epochs = 20;
    std::uint64_t seed = 1;

    std::size_t resolved_hidden_dim(std::size_t anchor_dim) const {
        return projector_hidden_dim ? projector_hidden_dim : 4 * anchor_dim;
    }
    void validate() const;
};

// A non-anchor source space plus its projector stack into the anchor frame.
struct BoundSpace {
    SpaceSpec source;
    std::size_t anchor_dim = 0;
    std::vector<Perceptron> projectors;
};

// Fresh projectors with seed-deterministic init (keyed on the space name, so
// per-space trainings are order-independent).
BoundSpace make_bound_space(const SpaceSpec& source, std::size_t anchor_dim,
                            const BindConfig& cfg);

// Mean over projectors, then L2 row normalization.
Matrix project(const BoundSpace& bound, const Matrix& embeddings);

// Symmetric InfoNCE over a matched batch: logits (x_i . y_j)/tau, cross
// entropy over rows and columns, averaged with factor 1/(2*batch).
struct InfoNceResult {
    double loss = 0.0;
    Matrix grad_x;
    Matrix grad_y;
};
InfoNceResult info_nce(const Matrix& x, const Matrix& y, double tau,
                       bool with_gradients = true);

// Sum of one InfoNCE term per (projected source modality, anchor modality):
// 4 terms for two-modality families, 6 for three-modality ones.
// source_batches hold raw source embeddings (keyed by the family's
// modalities); anchor_batches hold L2-normalized anchor embeddings for
// Image and Text. All batches are row-matched quadruple slices.
struct BindLossResult {
    double loss = 0.0;
    std::vector<Perceptron::Gradients> projector_grads;
};
BindLossResult bind_loss(const BoundSpace& bound,
                         const std::map<Modality, Matrix>& source_batches,
                         const std::map<Modality, Matrix>& anchor_batches, double tau,
                         bool with_gradients = true);

// Adam over shuffled mini-batches of the quadruples; returns the per-epoch
// mean bind_loss curve.
std::vector<double> train_projector(BoundSpace& bound, const std::vector<PseudoQuadruple>& quads,
                                    const EmbeddingStore& store, const BindConfig& cfg);

// Checkpoints: one manifest JSON per space plus f32 parameter blobs.
void save_bound_space(const BoundSpace& bound, const BindConfig& cfg, const std::string& dir);
BoundSpace load_bound_space(const std::string& dir, const std::string& space_name);

} // namespace spacebind
