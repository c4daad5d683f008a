#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "nowcast/tensor.hpp"

namespace nowcast {

// Displacement in grid coordinates: x eastward (columns), y southward (rows).
struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

// One element of the dihedral group D4 acting on the two spatial axes.
// Canonical form: rotate by quarter_turns counterclockwise in the
// i-down / j-right frame, then optionally reverse the row index.
struct GeomTransform {
  int quarter_turns = 0;  // 0..3
  bool vflip = false;

  friend bool operator==(const GeomTransform&, const GeomTransform&) = default;
};

namespace d4 {
inline constexpr GeomTransform identity{0, false};
inline constexpr GeomTransform rot90{1, false};
inline constexpr GeomTransform rot180{2, false};
inline constexpr GeomTransform rot270{3, false};
inline constexpr GeomTransform vflip{0, true};
inline constexpr GeomTransform rot90_vflip{1, true};
inline constexpr GeomTransform rot180_vflip{2, true};
inline constexpr GeomTransform rot270_vflip{3, true};

inline constexpr std::array<GeomTransform, 8> all = {
    identity, rot90,       rot180,       rot270,
    vflip,    rot90_vflip, rot180_vflip, rot270_vflip};
}  // namespace d4

// An ordered set of transforms used for augmentation.
struct AugPolicy {
  std::vector<GeomTransform> members;
  bool include_identity_in_ensemble = true;
};

// The five-member augmentation policy: Rot90, Rot180+VFlip, Rot270,
// Rot270+VFlip, VFlip. Contains neither the identity nor pure Rot180.
const AugPolicy& paper_policy();

// Names accepted by the CLI and configs: id, rot90, rot180, rot270, vflip,
// rot90+vflip, rot180+vflip, rot270+vflip.
std::string to_string(const GeomTransform& g);
GeomTransform parse_transform(std::string_view name);

// Acts on the last two axes of t, identically for every leading index.
// Pure pixel permutation; odd quarter-turns transpose non-square planes.
Tensor apply(const GeomTransform& g, const Tensor& t);

GeomTransform inverse(const GeomTransform& g);

// compose(g2, g1): g1 first, then g2.
GeomTransform compose(const GeomTransform& g2, const GeomTransform& g1);

// Image of a displacement vector under the linear part of g.
Vec2 transform_vector(const GeomTransform& g, Vec2 v);

}  // namespace nowcast
