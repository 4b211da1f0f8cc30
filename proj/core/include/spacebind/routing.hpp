#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "spacebind/binding.hpp"
#include "spacebind/matrix.hpp"
#include "spacebind/modality.hpp"
#include "spacebind/net.hpp"
#include "spacebind/pairing.hpp"
#include "spacebind/store.hpp"

namespace spacebind {

struct EncoderRef {
    std::string space;
    SpaceFamily family = SpaceFamily::ImageText;
    Modality modality = Modality::Point3D;
    // Text encoders carry the modality their texts describe; used by the
    // decoupling labels. Empty for non-text encoders.
    std::optional<Modality> text_provenance;
};

struct EncoderRegistry {
    // per modality, in canonical order: anchor first, then roster order
    std::array<std::vector<EncoderRef>, 4> encoders;

    // Tri-modal families' text towers have no single obvious provenance; the
    // defaults label point-image-text by its 3D specialty and
    // audio-image-text by its CLIP-derived image side.
    static EncoderRegistry build(const std::vector<SpaceSpec>& spaces,
                                 Modality pvt_text_provenance = Modality::Point3D,
                                 Modality avt_text_provenance = Modality::Image);

    const std::vector<EncoderRef>& for_modality(Modality m) const {
        return encoders[modality_index(m)];
    }
    std::size_t count(Modality m) const { return encoders[modality_index(m)].size(); }
};

struct RouteConfig {
    double temperature = 0.03;
    double lambda = 3.0;
    double learning_rate = 3e-3;
    std::size_t batch_size = 256;
    std::size_t epochs = 20;
    std::size_t router_hidden_dim = 128;
    bool use_align = true;
    bool use_dec = true;
    std::uint64_t seed = 1;

    void validate() const;
};

// Per-modality scoring network: sigmoid-terminated perceptron over the
// concatenated per-encoder slices; combining weights are the softmax of the
// scores. The decoupling loss consumes the raw scores, the ensemble
// combination the weights.
struct Router {
    Modality modality = Modality::Point3D;
    Perceptron net;
};

struct RouterSet {
    std::array<Router, 4> routers; // by modality; unused when count(m) == 0
};

struct ManualWeights {
    std::array<Vec, 4> weights; // by modality, registry order
};

using WeightPolicy = std::variant<RouterSet, ManualWeights>;

enum class ManualPreset { Mean, ATHigh, VTHigh, PVTHigh };

// Mean -> uniform; the high presets put w_high on the favored family's
// encoders (split uniformly) and the remainder on the rest. Degenerates to
// uniform when a modality has no favored or only favored encoders.
ManualWeights manual_policy(ManualPreset preset, const EncoderRegistry& registry,
                            double w_high = 0.6);
// Explicit weights pass through after validation (nonnegative, sum 1).
ManualWeights manual_policy(const std::array<Vec, 4>& weights,
                            const EncoderRegistry& registry);

// Zero-initialized routers (scores 0.5, weights uniform) for the given
// registry; training starts from seed-deterministic Gaussian init instead.
RouterSet make_routers(const EncoderRegistry& registry, std::size_t anchor_dim,
                       const RouteConfig& cfg, bool zero_init = false);

struct EnsembleModel {
    EncoderRegistry registry;
    std::string anchor_name;
    std::size_t anchor_dim = 0;
    std::map<std::string, BoundSpace> bound; // non-anchor spaces by name
    WeightPolicy policy = ManualWeights{};
};

// Per-encoder slices for the given item rows: anchor rows normalized, other
// spaces projected (projection normalizes). Registry order.
std::vector<Matrix> encode_all(const EnsembleModel& model, const EmbeddingStore& store,
                               Modality m, const std::vector<std::size_t>& rows);
// Slices for all items of the modality, cached form used by training/eval.
std::vector<Matrix> encode_all(const EnsembleModel& model, const EmbeddingStore& store,
                               Modality m);

Matrix concat_slices(const std::vector<Matrix>& slices);

struct RouteEval {
    Matrix scores;  // batch x count, sigmoid outputs
    Matrix weights; // batch x count, softmax of scores
    Perceptron::Cache cache;
};
RouteEval route_weights(const Router& router, const std::vector<Matrix>& slices);

// Weighted sum of normalized slices under the model policy, then L2
// normalization.
Matrix embed_slices(const EnsembleModel& model, Modality m,
                    const std::vector<Matrix>& slices);
Matrix embed(const EnsembleModel& model, const EmbeddingStore& store, Modality m,
             const std::vector<std::size_t>& rows);

// Sum of six InfoNCE terms over the unordered modality pairs of the batch's
// ensemble embeddings. Gradients flow only into router parameters.
struct AlignResult {
    double loss = 0.0;
    std::array<Perceptron::Gradients, 4> router_grads;
};
AlignResult l_align(const RouterSet& routers, const std::array<std::vector<Matrix>, 4>& slices,
                    double tau, bool with_gradients = true);

// Mean over the batch of the summed BCE between the text router's sigmoid
// scores and the provenance labels.
struct DecResult {
    double loss = 0.0;
    Perceptron::Gradients router_grad;
};
DecResult l_dec(const Router& text_router, const std::vector<Matrix>& text_slices,
                const Matrix& labels, bool with_gradients = true);

// 0/1 label matrix: labels(i, j) = 1 iff text i's domain matches encoder j's
// provenance. Throws DataError for items without a domain tag.
Matrix decoupling_labels(const EncoderRegistry& registry,
                         const std::vector<std::optional<Modality>>& text_domains);

struct RouterCurves {
    std::vector<double> align;
    std::vector<double> dec;
    std::vector<double> total;
};

// Minimizes lambda * L_dec + L_align over shuffled quadruple mini-batches with
// Adam; only router parameters move (projectors stay frozen). Both components
// are recorded each epoch even when disabled.
RouterCurves train_routers(EnsembleModel& model, const EmbeddingStore& store,
                           const std::vector<PseudoQuadruple>& quads,
                           const std::vector<std::optional<Modality>>& text_domains,
                           const RouteConfig& cfg);

// Fraction of texts whose highest-scoring encoder has the item's own domain
// as provenance.
double provenance_accuracy(const Router& text_router, const EncoderRegistry& registry,
                           const std::vector<Matrix>& text_slices,
                           const std::vector<std::optional<Modality>>& text_domains);

// Router checkpoints: manifest + f32 blobs + registry echo validated on load.
void save_routers(const RouterSet& routers, const EncoderRegistry& registry,
                  const RouteConfig& cfg, const std::string& dir);
RouterSet load_routers(const std::string& dir, const EncoderRegistry& registry);

} // namespace spacebind
