#include "nowcast/geometry.hpp"

#include "nowcast/error.hpp"

namespace nowcast {

const AugPolicy& paper_policy() {
  static const AugPolicy policy{
      {d4::rot90, d4::rot180_vflip, d4::rot270, d4::rot270_vflip, d4::vflip},
      true};
  return policy;
}

std::string to_string(const GeomTransform& g) {
  std::string name;
  switch (g.quarter_turns) {
    case 0: name = g.vflip ? "" : "id"; break;
    case 1: name = "rot90"; break;
    case 2: name = "rot180"; break;
    case 3: name = "rot270"; break;
    default: throw ContractError("quarter_turns out of range");
  }
  if (g.vflip) name += name.empty() ? "vflip" : "+vflip";
  return name;
}

GeomTransform parse_transform(std::string_view name) {
  for (const GeomTransform& g : d4::all) {
    if (to_string(g) == name) return g;
  }
  throw ConfigError("unknown transform name: " + std::string(name));
}

Tensor apply(const GeomTransform& g, const Tensor& t) {
  if (t.rank() < 2) throw ShapeError("geometry actions require rank >= 2");
  if (g.quarter_turns < 0 || g.quarter_turns > 3)
    throw ContractError("quarter_turns out of range");

  const std::size_t h = t.height();
  const std::size_t w = t.width();
  const bool odd = g.quarter_turns % 2 == 1;
  const std::size_t oh = odd ? w : h;
  const std::size_t ow = odd ? h : w;

  std::vector<std::size_t> out_shape = t.shape();
  out_shape[out_shape.size() - 2] = oh;
  out_shape[out_shape.size() - 1] = ow;
  Tensor out(std::move(out_shape));

  // Pull-back index maps. Rotation first; the optional row reversal applies
  // to the rotated plane, so it enters the pull-back as i -> oh-1-i.
  const std::size_t planes = t.plane_count();
  for (std::size_t pl = 0; pl < planes; ++pl) {
    const double* in = t.data() + pl * h * w;
    double* dst = out.data() + pl * oh * ow;
    for (std::size_t i = 0; i < oh; ++i) {
      const std::size_t ri = g.vflip ? oh - 1 - i : i;
      for (std::size_t j = 0; j < ow; ++j) {
        std::size_t si = 0, sj = 0;
        switch (g.quarter_turns) {
          case 0: si = ri;         sj = j;         break;
          case 1: si = j;          sj = w - 1 - ri; break;
          case 2: si = h - 1 - ri; sj = w - 1 - j; break;
          case 3: si = h - 1 - j;  sj = ri;        break;
        }
        dst[i * ow + j] = in[si * w + sj];
      }
    }
  }
  return out;
}

GeomTransform inverse(const GeomTransform& g) {
  // Reflections are involutions; pure rotations invert by negating the turn.
  if (g.vflip) return g;
  return {(4 - g.quarter_turns) % 4, false};
}

GeomTransform compose(const GeomTransform& g2, const GeomTransform& g1) {
  // With r = quarter turn and s = row flip: r^k s = s r^{-k}.
  if (!g1.vflip) {
    return {(g1.quarter_turns + g2.quarter_turns) % 4, g2.vflip};
  }
  return {(g1.quarter_turns - g2.quarter_turns + 4) % 4, !g2.vflip};
}

Vec2 transform_vector(const GeomTransform& g, Vec2 v) {
  for (int k = 0; k < g.quarter_turns; ++k) v = {v.y, -v.x};
  if (g.vflip) v.y = -v.y;
  return v;
}

}  // namespace nowcast
