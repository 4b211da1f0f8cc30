#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace spacebind {

// Fixed enumeration order; all serialization and canonical iteration follow it.
enum class Modality : int { Point3D = 0, Audio = 1, Image = 2, Text = 3 };

inline constexpr std::array<Modality, 4> kModalities = {Modality::Point3D, Modality::Audio,
                                                        Modality::Image, Modality::Text};

constexpr std::size_t modality_index(Modality m) { return static_cast<std::size_t>(m); }

const std::string& modality_name(Modality m);
Modality modality_from_name(const std::string& name);
// id prefixes: p (point), a (audio), v (image/visual), t (text)
char modality_prefix(Modality m);

enum class SpaceFamily : int { AudioText = 0, ImageText = 1, PointImageText = 2, AudioImageText = 3 };

const std::string& family_name(SpaceFamily f);
SpaceFamily family_from_name(const std::string& name);
// Modalities covered by a family, in canonical modality order.
const std::vector<Modality>& family_modalities(SpaceFamily f);
bool family_covers(SpaceFamily f, Modality m);

struct SpaceSpec {
    std::string name;
    SpaceFamily family = SpaceFamily::ImageText;
    std::size_t dim = 0;
    bool is_anchor = false;
};

// Unordered modality pair, stored with lo < hi in enum order.
struct ModalityPair {
    Modality lo;
    Modality hi;

    ModalityPair(Modality a, Modality b);
    bool operator<(const ModalityPair& o) const;
    bool operator==(const ModalityPair& o) const { return lo == o.lo && hi == o.hi; }
    std::string name() const; // e.g. "audio-text"
};

ModalityPair pair_from_name(const std::string& name);
// The six unordered pairs in canonical order.
const std::vector<ModalityPair>& all_modality_pairs();

} // namespace spacebind
