#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "spacebind/matrix.hpp"
#include "spacebind/modality.hpp"

namespace spacebind {

// Holds per-(space, modality) embedding matrices with row order following the
// per-modality item-id lists. Values are rounded through 32-bit floats at
// insertion so in-memory contents and the f32 files round-trip bit-exactly.
struct EmbeddingStore {
    std::uint64_t seed = 0;
    std::vector<SpaceSpec> spaces;

    void set_item_ids(Modality m, std::vector<std::string> ids);
    const std::vector<std::string>& item_ids(Modality m) const;
    std::size_t item_count(Modality m) const;
    // row index of an item id; DataError when unknown
    std::size_t row_of(Modality m, const std::string& id) const;

    void put(const std::string& space, Modality m, Matrix values);
    bool has(const std::string& space, Modality m) const;
    const Matrix& matrix(const std::string& space, Modality m) const;

    const SpaceSpec& space(const std::string& name) const;
    const SpaceSpec& anchor() const;

    // checks spec coverage, dims, and row counts against item lists
    void validate() const;

  private:
    std::array<std::vector<std::string>, 4> item_ids_;
    std::array<std::map<std::string, std::size_t>, 4> id_to_row_;
    std::map<std::string, std::array<Matrix, 4>> tables_;
};

// Manifest JSON plus one raw little-endian float32 matrix file per
// (space, modality), row-major, no header.
void export_store(const EmbeddingStore& store, const std::string& dir);
EmbeddingStore import_store(const std::string& dir);

} // namespace spacebind
