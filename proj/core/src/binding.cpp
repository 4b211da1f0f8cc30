#include "spacebind/binding.hpp"

#include <array>
#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "spacebind/errors.hpp"
#include "spacebind/io.hpp"
#include "spacebind/optim.hpp"

namespace spacebind {

using nlohmann::json;

namespace {

// FNV-1a, used to key per-space RNG streams by name
std::uint64_t name_hash(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

void require_unit_rows(const Matrix& m, const char* which) {
    Vec norms = row_norms(m);
    for (std::size_t i = 0; i < norms.size(); ++i)
        if (std::abs(norms[i] - 1.0) > 1e-6)
            throw DataError(std::string("info_nce: row ") + std::to_string(i) + " of " + which +
                            " is not unit-norm (deviation " +
                            std::to_string(std::abs(norms[i] - 1.0)) + ")");
}

} // namespace

void BindConfig::validate() const {
    if (temperature <= 0.0) throw ConfigError("bind.temperature: must be positive");
    if (projector_count < 1) throw ConfigError("bind.projector_count: must be >= 1");
    if (learning_rate <= 0.0) throw ConfigError("bind.learning_rate: must be positive");
    if (batch_size < 2) throw ConfigError("bind.batch_size: must be >= 2");
    if (epochs < 1) throw ConfigError("bind.epochs: must be >= 1");
}

BoundSpace make_bound_space(const SpaceSpec& source, std::size_t anchor_dim,
                            const BindConfig& cfg) {
    if (source.is_anchor)
        throw ConfigError("make_bound_space: anchor space " + source.name +
                          " needs no projector");
    BoundSpace bound;
    bound.source = source;
    bound.anchor_dim = anchor_dim;
    const std::size_t hidden = cfg.resolved_hidden_dim(anchor_dim);
    for (std::size_t k = 0; k < cfg.projector_count; ++k) {
        Perceptron net(source.dim, hidden, anchor_dim, OutputActivation::Identity);
        Rng rng(derive_key(cfg.seed, Stream::ParamInit, name_hash(source.name), k));
        net.init(rng);
        bound.projectors.push_back(std::move(net));
    }
    return bound;
}

Matrix project(const BoundSpace& bound, const Matrix& embeddings) {
    if (embeddings.cols != bound.source.dim)
        throw ShapeError("project: input has " + std::to_string(embeddings.cols) +
                         " columns, space " + bound.source.name + " has dim " +
                         std::to_string(bound.source.dim));
    Matrix mean(embeddings.rows, bound.anchor_dim);
    for (const Perceptron& net : bound.projectors) add_inplace(mean, net.forward(embeddings));
    scale_inplace(mean, 1.0 / static_cast<double>(bound.projectors.size()));
    return l2_normalize_rows(mean);
}

InfoNceResult info_nce(const Matrix& x, const Matrix& y, double tau, bool with_gradients) {
    if (!x.same_shape(y))
        throw ShapeError("info_nce: x is " + std::to_string(x.rows) + "x" +
                         std::to_string(x.cols) + ", y is " + std::to_string(y.rows) + "x" +
                         std::to_string(y.cols));
    if (x.rows == 0) throw DataError("info_nce: empty batch");
    if (tau <= 0.0) throw ConfigError("info_nce: temperature must be positive");
    require_unit_rows(x, "x");
    require_unit_rows(y, "y");

    const std::size_t b = x.rows;
    Matrix s = matmul_abt(x, y);
    scale_inplace(s, 1.0 / tau);

    // loss via log-sum-exp over rows and columns
    double loss = 0.0;
    const Matrix st = transpose(s);
    const std::array<const Matrix*, 2> directions = {&s, &st};
    for (const Matrix* dir : directions) {
        for (std::size_t i = 0; i < b; ++i) {
            const double* row = dir->row_ptr(i);
            double mx = row[0];
            for (std::size_t j = 1; j < b; ++j) mx = std::max(mx, row[j]);
            double sum = 0.0;
            for (std::size_t j = 0; j < b; ++j) sum += std::exp(row[j] - mx);
            loss += mx + std::log(sum) - row[i];
        }
    }
    InfoNceResult result;
    result.loss = loss / (2.0 * static_cast<double>(b));
    if (!with_gradients) return result;

    // dL/dS = [ (rowsoftmax(S) - I) + (rowsoftmax(S^T) - I)^T ] / (2B)
    Matrix ds = softmax_rows(s);
    const Matrix ct = transpose(softmax_rows(st));
    add_inplace(ds, ct);
    for (std::size_t i = 0; i < b; ++i) ds(i, i) -= 2.0;
    scale_inplace(ds, 1.0 / (2.0 * static_cast<double>(b)));

    result.grad_x = scale(matmul(ds, y), 1.0 / tau);
    result.grad_y = scale(matmul_atb(ds, x), 1.0 / tau);
    return result;
}

BindLossResult bind_loss(const BoundSpace& bound,
                         const std::map<Modality, Matrix>& source_batches,
                         const std::map<Modality, Matrix>& anchor_batches, double tau,
                         bool with_gradients) {
    const std::vector<Modality>& source_mods = family_modalities(bound.source.family);
    for (Modality m : source_mods)
        if (!source_batches.count(m))
            throw ConfigError("bind_loss: missing source batch for " + modality_name(m));
    if (source_batches.size() != source_mods.size())
        throw ConfigError("bind_loss: source batches outside family " +
                          family_name(bound.source.family));
    for (Modality m : {Modality::Image, Modality::Text})
        if (!anchor_batches.count(m))
            throw ConfigError("bind_loss: missing anchor batch for " + modality_name(m));
    if (anchor_batches.size() != 2)
        throw ConfigError("bind_loss: anchor batches must be exactly image and text");

    const std::size_t count = bound.projectors.size();
    BindLossResult result;
    if (with_gradients)
        for (const Perceptron& net : bound.projectors)
            result.projector_grads.push_back(net.zero_gradients());

    for (Modality ms : source_mods) {
        const Matrix& raw = source_batches.at(ms);
        std::vector<Perceptron::Cache> caches(count);
        Matrix mean(raw.rows, bound.anchor_dim);
        for (std::size_t k = 0; k < count; ++k)
            add_inplace(mean, bound.projectors[k].forward(raw, caches[k]));
        scale_inplace(mean, 1.0 / static_cast<double>(count));
        const Matrix projected = l2_normalize_rows(mean);

        Matrix dprojected(raw.rows, bound.anchor_dim);
        for (Modality ma : {Modality::Image, Modality::Text}) {
            InfoNceResult term = info_nce(projected, anchor_batches.at(ma), tau, with_gradients);
            result.loss += term.loss;
            if (with_gradients) add_inplace(dprojected, term.grad_x);
        }
        if (with_gradients) {
            Matrix dmean = l2_normalize_rows_backward(mean, dprojected);
            scale_inplace(dmean, 1.0 / static_cast<double>(count));
            for (std::size_t k = 0; k < count; ++k)
                result.projector_grads[k].accumulate(
                    bound.projectors[k].backward(caches[k], dmean));
        }
    }
    return result;
}

std::vector<double> train_projector(BoundSpace& bound, const std::vector<PseudoQuadruple>& quads,
                                    const EmbeddingStore& store, const BindConfig& cfg) {
    cfg.validate();
    if (quads.empty()) throw ConfigError("train_projector: no quadruples");
    const SpaceSpec& anchor = store.anchor();
    if (anchor.dim != bound.anchor_dim)
        throw ConfigError("train_projector: anchor dim " + std::to_string(anchor.dim) +
                          " vs bound anchor dim " + std::to_string(bound.anchor_dim));

    const std::vector<Modality>& source_mods = family_modalities(bound.source.family);

    // row lookups per quadruple, done once
    std::vector<std::array<std::size_t, 4>> source_rows(quads.size());
    std::vector<std::array<std::size_t, 2>> anchor_rows(quads.size());
    for (std::size_t q = 0; q < quads.size(); ++q) {
        for (Modality m : source_mods)
            source_rows[q][modality_index(m)] =
                store.row_of(m, quads[q].ids[modality_index(m)]);
        anchor_rows[q][0] = store.row_of(Modality::Image, quads[q].v());
        anchor_rows[q][1] = store.row_of(Modality::Text, quads[q].t());
    }
    const Matrix anchor_image = l2_normalize_rows(store.matrix(anchor.name, Modality::Image));
    const Matrix anchor_text = l2_normalize_rows(store.matrix(anchor.name, Modality::Text));

    std::vector<std::size_t> sizes;
    std::vector<std::span<double>> params;
    for (Perceptron& net : bound.projectors)
        for (std::span<double> view : net.parameter_views()) {
            sizes.push_back(view.size());
            params.push_back(view);
        }
    Adam adam(sizes, AdamConfig{cfg.learning_rate, 0.9, 0.999, 1e-8});

    std::vector<std::size_t> order(quads.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::uint64_t space_key = name_hash(bound.source.name);

    std::vector<double> curve;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(derive_key(cfg.seed, Stream::BatchOrder, space_key, epoch));
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const std::size_t rows = end - start;
            std::map<Modality, Matrix> source_batches;
            for (Modality m : source_mods) {
                std::vector<std::size_t> idx(rows);
                for (std::size_t r = 0; r < rows; ++r)
                    idx[r] = source_rows[order[start + r]][modality_index(m)];
                source_batches.emplace(m, gather_rows(store.matrix(bound.source.name, m), idx));
            }
            std::map<Modality, Matrix> anchor_batches;
            {
                std::vector<std::size_t> vi(rows), ti(rows);
                for (std::size_t r = 0; r < rows; ++r) {
                    vi[r] = anchor_rows[order[start + r]][0];
                    ti[r] = anchor_rows[order[start + r]][1];
                }
                anchor_batches.emplace(Modality::Image, gather_rows(anchor_image, vi));
                anchor_batches.emplace(Modality::Text, gather_rows(anchor_text, ti));
            }
            BindLossResult step = bind_loss(bound, source_batches, anchor_batches,
                                            cfg.temperature, /*with_gradients=*/true);
            std::vector<std::span<const double>> grads;
            for (const Perceptron::Gradients& g : step.projector_grads)
                for (std::span<const double> view : Perceptron::gradient_views(g))
                    grads.push_back(view);
            adam.step(params, grads);
            epoch_loss += step.loss;
            ++batches;
        }
        curve.push_back(epoch_loss / static_cast<double>(batches));
    }
    return curve;
}

namespace {

std::string projector_blob_name(const std::string& space, std::size_t k) {
    return space + "_projector_" + std::to_string(k) + ".f32";
}

// flat f32 blob in parameter_views order: w1 | b1 | w2 | b2
std::string pack_params(const Perceptron& net) {
    std::string bytes(net.parameter_count() * sizeof(float), '\0');
    float* out = reinterpret_cast<float*>(bytes.data());
    std::size_t at = 0;
    for (std::span<const double> view : net.parameter_views())
        for (double v : view) out[at++] = static_cast<float>(v);
    return bytes;
}

void unpack_params(Perceptron& net, const std::string& bytes, const std::string& path) {
    if (bytes.size() != net.parameter_count() * sizeof(float))
        throw IoError(path + ": size mismatch, expected " +
                      std::to_string(net.parameter_count() * sizeof(float)) +
                      " bytes, found " + std::to_string(bytes.size()));
    const float* in = reinterpret_cast<const float*>(bytes.data());
    std::size_t at = 0;
    for (std::span<double> view : net.parameter_views())
        for (double& v : view) v = static_cast<double>(in[at++]);
}

} // namespace

void save_bound_space(const BoundSpace& bound, const BindConfig& cfg, const std::string& dir) {
    ensure_dir(dir);
    json manifest;
    manifest["space"] = bound.source.name;
    manifest["family"] = family_name(bound.source.family);
    manifest["source_dim"] = bound.source.dim;
    manifest["anchor_dim"] = bound.anchor_dim;
    manifest["hidden_dim"] = bound.projectors.at(0).hidden_dim;
    manifest["projector_count"] = bound.projectors.size();
    manifest["dtype"] = "f32le";
    manifest["config"] = {{"temperature", cfg.temperature},
                          {"projector_hidden_dim", cfg.projector_hidden_dim},
                          {"projector_count", cfg.projector_count},
                          {"learning_rate", cfg.learning_rate},
                          {"batch_size", cfg.batch_size},
                          {"epochs", cfg.epochs},
                          {"seed", cfg.seed}};
    json files = json::array();
    for (std::size_t k = 0; k < bound.projectors.size(); ++k) {
        const std::string rel = projector_blob_name(bound.source.name, k);
        files.push_back(rel);
        write_file_atomic(dir + "/" + rel, pack_params(bound.projectors[k]));
    }
    manifest["files"] = files;
    write_file_atomic(dir + "/" + bound.source.name + "_projector.json",
                      manifest.dump(2) + "\n");
}

BoundSpace load_bound_space(const std::string& dir, const std::string& space_name) {
    const std::string manifest_path = dir + "/" + space_name + "_projector.json";
    json manifest;
    try {
        manifest = json::parse(read_file(manifest_path));
    } catch (const json::parse_error& e) {
        throw DataError(manifest_path + ": " + e.what());
    }
    BoundSpace bound;
    bound.source.name = manifest.at("space").get<std::string>();
    bound.source.family = family_from_name(manifest.at("family").get<std::string>());
    bound.source.dim = manifest.at("source_dim").get<std::size_t>();
    bound.source.is_anchor = false;
    bound.anchor_dim = manifest.at("anchor_dim").get<std::size_t>();
    const std::size_t hidden = manifest.at("hidden_dim").get<std::size_t>();
    const json& files = manifest.at("files");
    for (const json& rel : files) {
        Perceptron net(bound.source.dim, hidden, bound.anchor_dim, OutputActivation::Identity);
        const std::string path = dir + "/" + rel.get<std::string>();
        unpack_params(net, read_file(path), path);
        bound.projectors.push_back(std::move(net));
    }
    if (bound.projectors.empty()) throw DataError(manifest_path + ": no projector blobs");
    return bound;
}

} // namespace spacebind
