#include "spacebind/store.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "spacebind/errors.hpp"
#include "spacebind/io.hpp"

namespace spacebind {

using nlohmann::json;

void write_file_atomic(const std::string& path, const std::string& bytes) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("write failed for " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("rename " + tmp + " -> " + path + " failed: " + ec.message());
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed for " + path);
    return bytes;
}

void write_f32_matrix(const std::string& path, const Matrix& m) {
    std::string bytes(m.size() * sizeof(float), '\0');
    float* out = reinterpret_cast<float*>(bytes.data());
    for (std::size_t i = 0; i < m.size(); ++i) out[i] = static_cast<float>(m.data[i]);
    write_file_atomic(path, bytes);
}

Matrix read_f32_matrix(const std::string& path, std::size_t rows, std::size_t cols) {
    const std::string bytes = read_file(path);
    const std::size_t expected = rows * cols * sizeof(float);
    if (bytes.size() != expected)
        throw IoError(path + ": size mismatch, expected " + std::to_string(expected) +
                      " bytes for " + std::to_string(rows) + "x" + std::to_string(cols) +
                      ", found " + std::to_string(bytes.size()));
    Matrix m(rows, cols);
    const float* in = reinterpret_cast<const float*>(bytes.data());
    for (std::size_t i = 0; i < m.size(); ++i) m.data[i] = static_cast<double>(in[i]);
    return m;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

void EmbeddingStore::set_item_ids(Modality m, std::vector<std::string> ids) {
    const std::size_t mi = modality_index(m);
    id_to_row_[mi].clear();
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (!id_to_row_[mi].emplace(ids[i], i).second)
            throw DataError("store: duplicate item id " + ids[i]);
    }
    item_ids_[mi] = std::move(ids);
}

const std::vector<std::string>& EmbeddingStore::item_ids(Modality m) const {
    return item_ids_[modality_index(m)];
}

std::size_t EmbeddingStore::item_count(Modality m) const {
    return item_ids_[modality_index(m)].size();
}

std::size_t EmbeddingStore::row_of(Modality m, const std::string& id) const {
    const auto& map = id_to_row_[modality_index(m)];
    const auto it = map.find(id);
    if (it == map.end())
        throw DataError("store: unknown " + modality_name(m) + " item id " + id);
    return it->second;
}

void EmbeddingStore::put(const std::string& space, Modality m, Matrix values) {
    // round to f32 so disk round trips are bit-exact
    for (double& v : values.data) v = static_cast<double>(static_cast<float>(v));
    tables_[space][modality_index(m)] = std::move(values);
}

bool EmbeddingStore::has(const std::string& space, Modality m) const {
    const auto it = tables_.find(space);
    return it != tables_.end() && it->second[modality_index(m)].size() > 0;
}

const Matrix& EmbeddingStore::matrix(const std::string& space, Modality m) const {
    const auto it = tables_.find(space);
    if (it == tables_.end() || it->second[modality_index(m)].size() == 0)
        throw DataError("store: no matrix for space " + space + ", modality " +
                        modality_name(m));
    return it->second[modality_index(m)];
}

const SpaceSpec& EmbeddingStore::space(const std::string& name) const {
    for (const SpaceSpec& s : spaces)
        if (s.name == name) return s;
    throw DataError("store: unknown space " + name);
}

const SpaceSpec& EmbeddingStore::anchor() const {
    for (const SpaceSpec& s : spaces)
        if (s.is_anchor) return s;
    throw DataError("store: no anchor space");
}

void EmbeddingStore::validate() const {
    std::size_t anchors = 0;
    for (const SpaceSpec& s : spaces) {
        if (s.is_anchor) {
            ++anchors;
            if (s.family != SpaceFamily::ImageText)
                throw DataError("store: anchor " + s.name + " must be image-text");
        }
        for (Modality m : family_modalities(s.family)) {
            const Matrix& e = matrix(s.name, m);
            if (e.cols != s.dim)
                throw DataError("store: " + s.name + "/" + modality_name(m) + " has " +
                                std::to_string(e.cols) + " cols, space dim is " +
                                std::to_string(s.dim));
            if (e.rows != item_count(m))
                throw DataError("store: " + s.name + "/" + modality_name(m) + " has " +
                                std::to_string(e.rows) + " rows, item list has " +
                                std::to_string(item_count(m)));
        }
    }
    if (anchors != 1)
        throw DataError("store: exactly one anchor required, found " + std::to_string(anchors));
}

namespace {

std::string matrix_filename(const std::string& space, Modality m) {
    return space + "_" + modality_name(m) + ".f32";
}

} // namespace

void export_store(const EmbeddingStore& store, const std::string& dir) {
    ensure_dir(dir);
    json manifest;
    manifest["version"] = 1;
    manifest["dtype"] = "f32le";
    manifest["seed"] = store.seed;
    manifest["spaces"] = json::array();
    json modalities = json::object();
    json files = json::object();
    for (const SpaceSpec& s : store.spaces) {
        manifest["spaces"].push_back({{"name", s.name},
                                      {"family", family_name(s.family)},
                                      {"dim", s.dim},
                                      {"is_anchor", s.is_anchor}});
        json mods = json::array();
        for (Modality m : family_modalities(s.family)) {
            mods.push_back(modality_name(m));
            const std::string rel = matrix_filename(s.name, m);
            files[s.name + "/" + modality_name(m)] = rel;
            write_f32_matrix(dir + "/" + rel, store.matrix(s.name, m));
        }
        modalities[s.name] = mods;
    }
    manifest["modalities"] = modalities;
    json items = json::object();
    for (Modality m : kModalities) items[modality_name(m)] = store.item_ids(m);
    manifest["items"] = items;
    manifest["files"] = files;
    write_file_atomic(dir + "/manifest.json", manifest.dump(2) + "\n");
}

EmbeddingStore import_store(const std::string& dir) {
    const std::string manifest_path = dir + "/manifest.json";
    json manifest;
    try {
        manifest = json::parse(read_file(manifest_path));
    } catch (const json::parse_error& e) {
        throw DataError(manifest_path + ": " + e.what());
    }
    if (!manifest.contains("version") || manifest["version"].get<int>() != 1)
        throw DataError(manifest_path + ": unsupported manifest version");
    if (manifest.value("dtype", "") != "f32le")
        throw DataError(manifest_path + ": unsupported dtype \"" +
                        manifest.value("dtype", "") + "\"");

    EmbeddingStore store;
    store.seed = manifest.value("seed", std::uint64_t{0});
    for (const json& js : manifest.at("spaces")) {
        SpaceSpec s;
        s.name = js.at("name").get<std::string>();
        s.family = family_from_name(js.at("family").get<std::string>());
        s.dim = js.at("dim").get<std::size_t>();
        s.is_anchor = js.at("is_anchor").get<bool>();
        store.spaces.push_back(std::move(s));
    }
    const json& items = manifest.at("items");
    for (Modality m : kModalities) {
        if (!items.contains(modality_name(m)))
            throw DataError(manifest_path + ": items missing modality " + modality_name(m));
        store.set_item_ids(m, items.at(modality_name(m)).get<std::vector<std::string>>());
    }
    const json& files = manifest.at("files");
    for (const SpaceSpec& s : store.spaces) {
        for (Modality m : family_modalities(s.family)) {
            const std::string key = s.name + "/" + modality_name(m);
            if (!files.contains(key))
                throw DataError(manifest_path + ": files missing entry " + key);
            const std::string rel = files.at(key).get<std::string>();
            Matrix e = read_f32_matrix(dir + "/" + rel, store.item_count(m), s.dim);
            store.put(s.name, m, std::move(e));
        }
    }
    // reject manifests referencing modalities outside a space's family
    const json& modalities = manifest.at("modalities");
    for (const SpaceSpec& s : store.spaces) {
        if (!modalities.contains(s.name))
            throw DataError(manifest_path + ": modalities missing space " + s.name);
        for (const json& name : modalities.at(s.name)) {
            const Modality m = modality_from_name(name.get<std::string>());
            if (!family_covers(s.family, m))
                throw DataError(manifest_path + ": space " + s.name + " lists modality " +
                                modality_name(m) + " outside family " + family_name(s.family));
        }
    }
    store.validate();
    return store;
}

} // namespace spacebind
