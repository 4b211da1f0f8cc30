#include "spacebind/routing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "spacebind/errors.hpp"
#include "spacebind/io.hpp"
#include "spacebind/optim.hpp"

namespace spacebind {

using nlohmann::json;

EncoderRegistry EncoderRegistry::build(const std::vector<SpaceSpec>& spaces,
                                       Modality pvt_text_provenance,
                                       Modality avt_text_provenance) {
    if (pvt_text_provenance == Modality::Text || avt_text_provenance == Modality::Text)
        throw ConfigError("registry: text provenance must be a non-text modality");
    EncoderRegistry registry;
    std::vector<const SpaceSpec*> ordered;
    for (const SpaceSpec& s : spaces)
        if (s.is_anchor) ordered.push_back(&s);
    for (const SpaceSpec& s : spaces)
        if (!s.is_anchor) ordered.push_back(&s);
    for (const SpaceSpec* s : ordered) {
        for (Modality m : family_modalities(s->family)) {
            EncoderRef ref;
            ref.space = s->name;
            ref.family = s->family;
            ref.modality = m;
            if (m == Modality::Text) {
                switch (s->family) {
                    case SpaceFamily::AudioText: ref.text_provenance = Modality::Audio; break;
                    case SpaceFamily::ImageText: ref.text_provenance = Modality::Image; break;
                    case SpaceFamily::PointImageText:
                        ref.text_provenance = pvt_text_provenance;
                        break;
                    case SpaceFamily::AudioImageText:
                        ref.text_provenance = avt_text_provenance;
                        break;
                }
            }
            registry.encoders[modality_index(m)].push_back(std::move(ref));
        }
    }
    return registry;
}

void RouteConfig::validate() const {
    if (temperature <= 0.0) throw ConfigError("route.temperature: must be positive");
    if (lambda < 0.0) throw ConfigError("route.lambda: must be >= 0");
    if (learning_rate <= 0.0) throw ConfigError("route.learning_rate: must be positive");
    if (batch_size < 2) throw ConfigError("route.batch_size: must be >= 2");
    if (epochs < 1) throw ConfigError("route.epochs: must be >= 1");
    if (router_hidden_dim < 1) throw ConfigError("route.router_hidden_dim: must be >= 1");
}

ManualWeights manual_policy(ManualPreset preset, const EncoderRegistry& registry,
                            double w_high) {
    if (w_high <= 0.0 || w_high >= 1.0)
        throw ConfigError("manual_policy: w_high must lie in (0, 1)");
    ManualWeights manual;
    for (Modality m : kModalities) {
        const auto& refs = registry.for_modality(m);
        Vec& w = manual.weights[modality_index(m)];
        w.assign(refs.size(), 0.0);
        if (refs.empty()) continue;
        if (preset == ManualPreset::Mean) {
            std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(refs.size()));
            continue;
        }
        SpaceFamily favored = SpaceFamily::AudioText;
        if (preset == ManualPreset::VTHigh) favored = SpaceFamily::ImageText;
        if (preset == ManualPreset::PVTHigh) favored = SpaceFamily::PointImageText;
        std::size_t favored_count = 0;
        for (const EncoderRef& ref : refs)
            if (ref.family == favored) ++favored_count;
        if (favored_count == 0 || favored_count == refs.size()) {
            std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(refs.size()));
            continue;
        }
        const double high_each = w_high / static_cast<double>(favored_count);
        const double rest_each =
            (1.0 - w_high) / static_cast<double>(refs.size() - favored_count);
        for (std::size_t j = 0; j < refs.size(); ++j)
            w[j] = refs[j].family == favored ? high_each : rest_each;
    }
    return manual;
}

ManualWeights manual_policy(const std::array<Vec, 4>& weights,
                            const EncoderRegistry& registry) {
    for (Modality m : kModalities) {
        const Vec& w = weights[modality_index(m)];
        const std::size_t count = registry.count(m);
        if (count == 0) {
            if (!w.empty())
                throw ConfigError("manual_policy: weights given for " + modality_name(m) +
                                  " which has no encoders");
            continue;
        }
        if (w.size() != count)
            throw ConfigError("manual_policy: " + modality_name(m) + " has " +
                              std::to_string(count) + " encoders, got " +
                              std::to_string(w.size()) + " weights");
        double sum = 0.0;
        for (double v : w) {
            if (v < 0.0)
                throw ConfigError("manual_policy: negative weight for " + modality_name(m));
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw ConfigError("manual_policy: " + modality_name(m) + " weights sum to " +
                              std::to_string(sum) + ", expected 1");
    }
    ManualWeights manual;
    manual.weights = weights;
    return manual;
}

RouterSet make_routers(const EncoderRegistry& registry, std::size_t anchor_dim,
                       const RouteConfig& cfg, bool zero_init) {
    cfg.validate();
    RouterSet set;
    for (Modality m : kModalities) {
        const std::size_t count = registry.count(m);
        Router& router = set.routers[modality_index(m)];
        router.modality = m;
        if (count == 0) continue;
        router.net = Perceptron(count * anchor_dim, cfg.router_hidden_dim, count,
                                OutputActivation::Sigmoid);
        if (!zero_init) {
            Rng rng(derive_key(cfg.seed, Stream::ParamInit, 0x726f75746572ull,
                               modality_index(m)));
            router.net.init(rng);
        }
    }
    return set;
}

std::vector<Matrix> encode_all(const EnsembleModel& model, const EmbeddingStore& store,
                               Modality m, const std::vector<std::size_t>& rows) {
    const auto& refs = model.registry.for_modality(m);
    if (refs.empty())
        throw ConfigError("encode_all: no encoders registered for " + modality_name(m));
    std::vector<Matrix> slices;
    slices.reserve(refs.size());
    for (const EncoderRef& ref : refs) {
        Matrix raw = gather_rows(store.matrix(ref.space, m), rows);
        if (ref.space == model.anchor_name) {
            slices.push_back(l2_normalize_rows(raw));
        } else {
            const auto it = model.bound.find(ref.space);
            if (it == model.bound.end())
                throw ConfigError("encode_all: space " + ref.space + " is not bound");
            slices.push_back(project(it->second, raw));
        }
    }
    return slices;
}

std::vector<Matrix> encode_all(const EnsembleModel& model, const EmbeddingStore& store,
                               Modality m) {
    std::vector<std::size_t> rows(store.item_count(m));
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return encode_all(model, store, m, rows);
}

Matrix concat_slices(const std::vector<Matrix>& slices) {
    if (slices.empty()) throw ShapeError("concat_slices: no slices");
    const std::size_t rows = slices[0].rows;
    std::size_t cols = 0;
    for (const Matrix& s : slices) {
        if (s.rows != rows) throw ShapeError("concat_slices: row count mismatch");
        cols += s.cols;
    }
    Matrix out(rows, cols);
    std::size_t at = 0;
    for (const Matrix& s : slices) {
        for (std::size_t i = 0; i < rows; ++i)
            std::copy(s.row_ptr(i), s.row_ptr(i) + s.cols, out.row_ptr(i) + at);
        at += s.cols;
    }
    return out;
}

RouteEval route_weights(const Router& router, const std::vector<Matrix>& slices) {
    RouteEval eval;
    const Matrix input = concat_slices(slices);
    if (input.cols != router.net.input_dim)
        throw ShapeError("route_weights: input dim " + std::to_string(input.cols) +
                         " vs router dim " + std::to_string(router.net.input_dim));
    eval.scores = router.net.forward(input, eval.cache);
    eval.weights = softmax_rows(eval.scores);
    return eval;
}

namespace {

Matrix weighted_slice_sum(const std::vector<Matrix>& slices, const Matrix& weights) {
    const std::size_t rows = slices[0].rows;
    const std::size_t dim = slices[0].cols;
    Matrix pre(rows, dim);
    for (std::size_t j = 0; j < slices.size(); ++j) {
        const Matrix& s = slices[j];
        for (std::size_t i = 0; i < rows; ++i) {
            const double w = weights(i, j);
            const double* src = s.row_ptr(i);
            double* dst = pre.row_ptr(i);
            for (std::size_t k = 0; k < dim; ++k) dst[k] += w * src[k];
        }
    }
    return pre;
}

Matrix manual_weight_rows(const Vec& w, std::size_t rows) {
    Matrix m(rows, w.size());
    for (std::size_t i = 0; i < rows; ++i)
        std::copy(w.begin(), w.end(), m.row_ptr(i));
    return m;
}

} // namespace

Matrix embed_slices(const EnsembleModel& model, Modality m,
                    const std::vector<Matrix>& slices) {
    if (slices.empty())
        throw ConfigError("embed: no encoders registered for " + modality_name(m));
    const std::size_t count = model.registry.count(m);
    if (slices.size() != count)
        throw ConfigError("embed: " + std::to_string(slices.size()) + " slices vs " +
                          std::to_string(count) + " registered encoders for " +
                          modality_name(m));
    Matrix weights;
    if (const ManualWeights* manual = std::get_if<ManualWeights>(&model.policy)) {
        const Vec& w = manual->weights[modality_index(m)];
        if (w.size() != count)
            throw ConfigError("embed: manual policy has " + std::to_string(w.size()) +
                              " weights for " + modality_name(m) + ", registry has " +
                              std::to_string(count));
        weights = manual_weight_rows(w, slices[0].rows);
    } else {
        const RouterSet& set = std::get<RouterSet>(model.policy);
        const Router& router = set.routers[modality_index(m)];
        if (router.net.output_dim != count)
            throw ConfigError("embed: router for " + modality_name(m) + " outputs " +
                              std::to_string(router.net.output_dim) + " weights, registry has " +
                              std::to_string(count));
        weights = route_weights(router, slices).weights;
    }
    return l2_normalize_rows(weighted_slice_sum(slices, weights));
}

Matrix embed(const EnsembleModel& model, const EmbeddingStore& store, Modality m,
             const std::vector<std::size_t>& rows) {
    return embed_slices(model, m, encode_all(model, store, m, rows));
}

AlignResult l_align(const RouterSet& routers, const std::array<std::vector<Matrix>, 4>& slices,
                    double tau, bool with_gradients) {
    for (Modality m : kModalities)
        if (slices[modality_index(m)].empty())
            throw ConfigError("l_align: missing slices for " + modality_name(m));

    AlignResult result;
    std::array<RouteEval, 4> evals;
    std::array<Matrix, 4> pre;
    std::array<Matrix, 4> ens;
    for (Modality m : kModalities) {
        const std::size_t mi = modality_index(m);
        evals[mi] = route_weights(routers.routers[mi], slices[mi]);
        pre[mi] = weighted_slice_sum(slices[mi], evals[mi].weights);
        ens[mi] = l2_normalize_rows(pre[mi]);
    }

    std::array<Matrix, 4> dens;
    if (with_gradients)
        for (Modality m : kModalities) {
            const std::size_t mi = modality_index(m);
            dens[mi] = Matrix(ens[mi].rows, ens[mi].cols);
        }

    for (const ModalityPair& pair : all_modality_pairs()) {
        const std::size_t lo = modality_index(pair.lo);
        const std::size_t hi = modality_index(pair.hi);
        InfoNceResult term = info_nce(ens[lo], ens[hi], tau, with_gradients);
        result.loss += term.loss;
        if (with_gradients) {
            add_inplace(dens[lo], term.grad_x);
            add_inplace(dens[hi], term.grad_y);
        }
    }
    if (!with_gradients) return result;

    for (Modality m : kModalities) {
        const std::size_t mi = modality_index(m);
        const Matrix dpre = l2_normalize_rows_backward(pre[mi], dens[mi]);
        const auto& mod_slices = slices[mi];
        // d(weight_ij) = dpre_i . slice_j_i
        Matrix dweights(dpre.rows, mod_slices.size());
        for (std::size_t j = 0; j < mod_slices.size(); ++j)
            for (std::size_t i = 0; i < dpre.rows; ++i)
                dweights(i, j) = row_dot(dpre, i, mod_slices[j], i);
        const Matrix dscores = softmax_rows_backward(evals[mi].weights, dweights);
        result.router_grads[mi] =
            routers.routers[mi].net.backward(evals[mi].cache, dscores);
    }
    return result;
}

DecResult l_dec(const Router& text_router, const std::vector<Matrix>& text_slices,
                const Matrix& labels, bool with_gradients) {
    RouteEval eval = route_weights(text_router, text_slices);
    if (!labels.same_shape(eval.scores))
        throw ShapeError("l_dec: labels are " + std::to_string(labels.rows) + "x" +
                         std::to_string(labels.cols) + ", scores are " +
                         std::to_string(eval.scores.rows) + "x" +
                         std::to_string(eval.scores.cols));
    const std::size_t batch = eval.scores.rows;
    DecResult result;
    for (std::size_t i = 0; i < eval.scores.size(); ++i) {
        // clamp keeps the log finite if a sigmoid saturates in doubles
        const double s = std::clamp(eval.scores.data[i], 1e-12, 1.0 - 1e-12);
        const double y = labels.data[i];
        result.loss -= y * std::log(s) + (1.0 - y) * std::log(1.0 - s);
    }
    result.loss /= static_cast<double>(batch);
    if (!with_gradients) return result;

    // dL/dpre folds the sigmoid derivative analytically: (s - y) / batch
    Matrix pre_grad(eval.scores.rows, eval.scores.cols);
    for (std::size_t i = 0; i < pre_grad.size(); ++i)
        pre_grad.data[i] =
            (eval.scores.data[i] - labels.data[i]) / static_cast<double>(batch);
    result.router_grad = text_router.net.backward_pre_activation(eval.cache, pre_grad);
    return result;
}

Matrix decoupling_labels(const EncoderRegistry& registry,
                         const std::vector<std::optional<Modality>>& text_domains) {
    const auto& refs = registry.for_modality(Modality::Text);
    if (refs.empty()) throw ConfigError("decoupling_labels: no text encoders");
    Matrix labels(text_domains.size(), refs.size());
    for (std::size_t i = 0; i < text_domains.size(); ++i) {
        if (!text_domains[i])
            throw DataError("l_dec: text item at row " + std::to_string(i) +
                            " has no domain label");
        for (std::size_t j = 0; j < refs.size(); ++j)
            labels(i, j) = (refs[j].text_provenance == *text_domains[i]) ? 1.0 : 0.0;
    }
    return labels;
}

RouterCurves train_routers(EnsembleModel& model, const EmbeddingStore& store,
                           const std::vector<PseudoQuadruple>& quads,
                           const std::vector<std::optional<Modality>>& text_domains,
                           const RouteConfig& cfg) {
    cfg.validate();
    if (quads.empty()) throw ConfigError("train_routers: no quadruples");
    RouterSet* routers = std::get_if<RouterSet>(&model.policy);
    if (!routers) throw ConfigError("train_routers: model policy is not routed");
    if (text_domains.size() != store.item_count(Modality::Text))
        throw DataError("train_routers: " + std::to_string(text_domains.size()) +
                        " domain labels for " +
                        std::to_string(store.item_count(Modality::Text)) + " text items");

    // projectors are frozen, so per-encoder slices are precomputed once
    std::array<std::vector<Matrix>, 4> all_slices;
    for (Modality m : kModalities)
        all_slices[modality_index(m)] = encode_all(model, store, m);

    // label rows for the text items actually referenced by the quadruples
    std::vector<std::array<std::size_t, 4>> quad_rows(quads.size());
    for (std::size_t q = 0; q < quads.size(); ++q)
        for (Modality m : kModalities) {
            const std::size_t mi = modality_index(m);
            quad_rows[q][mi] = store.row_of(m, quads[q].ids[mi]);
        }
    const auto& text_refs = model.registry.for_modality(Modality::Text);
    std::vector<Vec> label_rows(store.item_count(Modality::Text));
    std::vector<bool> label_built(label_rows.size(), false);
    auto label_row = [&](std::size_t row) -> const Vec& {
        if (!label_built[row]) {
            if (!text_domains[row])
                throw DataError("l_dec: text item " +
                                store.item_ids(Modality::Text)[row] + " has no domain label");
            Vec& out = label_rows[row];
            out.assign(text_refs.size(), 0.0);
            for (std::size_t j = 0; j < text_refs.size(); ++j)
                out[j] = (text_refs[j].text_provenance == *text_domains[row]) ? 1.0 : 0.0;
            label_built[row] = true;
        }
        return label_rows[row];
    };

    std::vector<std::size_t> sizes;
    std::vector<std::span<double>> params;
    for (Modality m : kModalities) {
        Router& router = routers->routers[modality_index(m)];
        if (router.net.parameter_count() == 0) continue;
        for (std::span<double> view : router.net.parameter_views()) {
            sizes.push_back(view.size());
            params.push_back(view);
        }
    }
    Adam adam(sizes, AdamConfig{cfg.learning_rate, 0.9, 0.999, 1e-8});

    std::vector<std::size_t> order(quads.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    RouterCurves curves;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(derive_key(cfg.seed, Stream::BatchOrder, 0x726f75746572ull, epoch));
        shuffle_rng.shuffle(order);
        double epoch_align = 0.0, epoch_dec = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const std::size_t rows = end - start;

            std::array<std::vector<std::size_t>, 4> batch_rows;
            for (Modality m : kModalities) {
                const std::size_t mi = modality_index(m);
                batch_rows[mi].resize(rows);
                for (std::size_t r = 0; r < rows; ++r)
                    batch_rows[mi][r] = quad_rows[order[start + r]][mi];
            }
            std::array<std::vector<Matrix>, 4> batch_slices;
            for (Modality m : kModalities) {
                const std::size_t mi = modality_index(m);
                for (const Matrix& slice : all_slices[mi])
                    batch_slices[mi].push_back(gather_rows(slice, batch_rows[mi]));
            }

            AlignResult align =
                l_align(*routers, batch_slices, cfg.temperature, cfg.use_align);

            const std::size_t ti = modality_index(Modality::Text);
            Matrix labels(rows, text_refs.size());
            for (std::size_t r = 0; r < rows; ++r) {
                const Vec& lr = label_row(batch_rows[ti][r]);
                std::copy(lr.begin(), lr.end(), labels.row_ptr(r));
            }
            const bool dec_grads = cfg.use_dec && cfg.lambda > 0.0;
            DecResult dec = l_dec(routers->routers[ti], batch_slices[ti], labels, dec_grads);

            std::vector<std::span<const double>> grads;
            std::array<Perceptron::Gradients, 4> combined;
            for (Modality m : kModalities) {
                const std::size_t mi = modality_index(m);
                Router& router = routers->routers[mi];
                if (router.net.parameter_count() == 0) continue;
                combined[mi] = cfg.use_align ? std::move(align.router_grads[mi])
                                             : router.net.zero_gradients();
                if (m == Modality::Text && dec_grads) {
                    dec.router_grad.scale(cfg.lambda);
                    combined[mi].accumulate(dec.router_grad);
                }
                for (std::span<const double> view : Perceptron::gradient_views(combined[mi]))
                    grads.push_back(view);
            }
            adam.step(params, grads);
            epoch_align += align.loss;
            epoch_dec += dec.loss;
            ++batches;
        }
        const double denom = static_cast<double>(batches);
        curves.align.push_back(epoch_align / denom);
        curves.dec.push_back(epoch_dec / denom);
        curves.total.push_back((cfg.use_align ? epoch_align / denom : 0.0) +
                               (cfg.use_dec ? cfg.lambda * epoch_dec / denom : 0.0));
    }
    return curves;
}

double provenance_accuracy(const Router& text_router, const EncoderRegistry& registry,
                           const std::vector<Matrix>& text_slices,
                           const std::vector<std::optional<Modality>>& text_domains) {
    const auto& refs = registry.for_modality(Modality::Text);
    RouteEval eval = route_weights(text_router, text_slices);
    if (text_domains.size() != eval.scores.rows)
        throw DataError("provenance_accuracy: " + std::to_string(text_domains.size()) +
                        " labels for " + std::to_string(eval.scores.rows) + " items");
    std::size_t labeled = 0, correct = 0;
    for (std::size_t i = 0; i < eval.scores.rows; ++i) {
        if (!text_domains[i]) continue;
        ++labeled;
        const double* row = eval.scores.row_ptr(i);
        std::size_t best = 0;
        for (std::size_t j = 1; j < eval.scores.cols; ++j)
            if (row[j] > row[best]) best = j;
        if (refs[best].text_provenance == *text_domains[i]) ++correct;
    }
    if (labeled == 0) throw DataError("provenance_accuracy: no labeled text items");
    return static_cast<double>(correct) / static_cast<double>(labeled);
}

namespace {

std::string router_blob_name(Modality m) { return "router_" + modality_name(m) + ".f32"; }

std::string pack_router(const Perceptron& net) {
    std::string bytes(net.parameter_count() * sizeof(float), '\0');
    float* out = reinterpret_cast<float*>(bytes.data());
    std::size_t at = 0;
    for (std::span<const double> view : net.parameter_views())
        for (double v : view) out[at++] = static_cast<float>(v);
    return bytes;
}

} // namespace

void save_routers(const RouterSet& routers, const EncoderRegistry& registry,
                  const RouteConfig& cfg, const std::string& dir) {
    ensure_dir(dir);
    json manifest;
    manifest["dtype"] = "f32le";
    manifest["config"] = {{"temperature", cfg.temperature},
                          {"lambda", cfg.lambda},
                          {"learning_rate", cfg.learning_rate},
                          {"batch_size", cfg.batch_size},
                          {"epochs", cfg.epochs},
                          {"router_hidden_dim", cfg.router_hidden_dim},
                          {"use_align", cfg.use_align},
                          {"use_dec", cfg.use_dec},
                          {"seed", cfg.seed}};
    json reg = json::object();
    json files = json::object();
    json dims = json::object();
    for (Modality m : kModalities) {
        const std::size_t mi = modality_index(m);
        json refs = json::array();
        for (const EncoderRef& ref : registry.for_modality(m)) {
            json entry = {{"space", ref.space}};
            if (ref.text_provenance) entry["provenance"] = modality_name(*ref.text_provenance);
            refs.push_back(entry);
        }
        reg[modality_name(m)] = refs;
        const Perceptron& net = routers.routers[mi].net;
        if (net.parameter_count() == 0) continue;
        files[modality_name(m)] = router_blob_name(m);
        dims[modality_name(m)] = {{"input_dim", net.input_dim},
                                  {"hidden_dim", net.hidden_dim},
                                  {"output_dim", net.output_dim}};
        write_file_atomic(dir + "/" + router_blob_name(m), pack_router(net));
    }
    manifest["registry"] = reg;
    manifest["files"] = files;
    manifest["dims"] = dims;
    write_file_atomic(dir + "/routers.json", manifest.dump(2) + "\n");
}

RouterSet load_routers(const std::string& dir, const EncoderRegistry& registry) {
    const std::string manifest_path = dir + "/routers.json";
    json manifest;
    try {
        manifest = json::parse(read_file(manifest_path));
    } catch (const json::parse_error& e) {
        throw DataError(manifest_path + ": " + e.what());
    }
    // the checkpoint must describe the same registry it was trained against
    const json& reg = manifest.at("registry");
    for (Modality m : kModalities) {
        const auto& refs = registry.for_modality(m);
        const json& saved = reg.at(modality_name(m));
        if (saved.size() != refs.size())
            throw ConfigError(manifest_path + ": registry echo for " + modality_name(m) +
                              " has " + std::to_string(saved.size()) + " encoders, expected " +
                              std::to_string(refs.size()));
        for (std::size_t j = 0; j < refs.size(); ++j) {
            if (saved[j].at("space").get<std::string>() != refs[j].space)
                throw ConfigError(manifest_path + ": registry echo mismatch at " +
                                  modality_name(m) + "[" + std::to_string(j) + "]");
            const bool has_prov = saved[j].contains("provenance");
            if (has_prov != refs[j].text_provenance.has_value() ||
                (has_prov && modality_from_name(saved[j]["provenance"].get<std::string>()) !=
                                 *refs[j].text_provenance))
                throw ConfigError(manifest_path + ": provenance echo mismatch at " +
                                  modality_name(m) + "[" + std::to_string(j) + "]");
        }
    }
    RouterSet set;
    const json& dims = manifest.at("dims");
    const json& files = manifest.at("files");
    for (Modality m : kModalities) {
        const std::size_t mi = modality_index(m);
        set.routers[mi].modality = m;
        if (!files.contains(modality_name(m))) {
            if (registry.count(m) != 0)
                throw ConfigError(manifest_path + ": missing router blob for " +
                                  modality_name(m));
            continue;
        }
        const json& d = dims.at(modality_name(m));
        Perceptron net(d.at("input_dim").get<std::size_t>(),
                       d.at("hidden_dim").get<std::size_t>(),
                       d.at("output_dim").get<std::size_t>(), OutputActivation::Sigmoid);
        const std::string path = dir + "/" + files.at(modality_name(m)).get<std::string>();
        const std::string bytes = read_file(path);
        if (bytes.size() != net.parameter_count() * sizeof(float))
            throw IoError(path + ": size mismatch, expected " +
                          std::to_string(net.parameter_count() * sizeof(float)) +
                          " bytes, found " + std::to_string(bytes.size()));
        const float* in = reinterpret_cast<const float*>(bytes.data());
        std::size_t at = 0;
        for (std::span<double> view : net.parameter_views())
            for (double& v : view) v = static_cast<double>(in[at++]);
        set.routers[mi].net = std::move(net);
    }
    return set;
}

} // namespace spacebind
