#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <set>
#include <vector>

#include "nowcast/error.hpp"
#include "nowcast/geometry.hpp"
#include "nowcast/rng.hpp"

using namespace nowcast;

namespace {

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

Tensor random_tensor(Rng& rng, std::vector<std::size_t> shape) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-5.0, 5.0);
  return t;
}

Tensor plane2x2(double a, double b, double c, double d) {
  return Tensor({2, 2}, {a, b, c, d});
}

}  // namespace

TEST_CASE("identity leaves any tensor unchanged") {
  Rng rng(5);
  const Tensor t = random_tensor(rng, {3, 4, 5, 5});
  CHECK(bitwise_equal(apply(d4::identity, t), t));
}

TEST_CASE("hand-evaluated actions on a 2x2 plane") {
  const Tensor t = plane2x2(1, 2, 3, 4);
  CHECK(bitwise_equal(apply(d4::rot90, t), plane2x2(2, 4, 1, 3)));
  CHECK(bitwise_equal(apply(d4::vflip, t), plane2x2(3, 4, 1, 2)));
  // compose(vflip, rot180) is the horizontal flip.
  const GeomTransform hflip = compose(d4::vflip, d4::rot180);
  CHECK(bitwise_equal(apply(hflip, t), plane2x2(2, 1, 4, 3)));
}

TEST_CASE("apply rejects rank below 2") {
  CHECK_THROWS_AS(apply(d4::rot90, Tensor({4})), ShapeError);
}

TEST_CASE("odd quarter turns transpose non-square planes") {
  Rng rng(6);
  const Tensor t = random_tensor(rng, {2, 3, 5});
  const Tensor r = apply(d4::rot90, t);
  CHECK(r.shape() == std::vector<std::size_t>{2, 5, 3});
  CHECK(bitwise_equal(apply(inverse(d4::rot90), r), t));
}

TEST_CASE("inverse table") {
  CHECK(inverse(d4::rot90) == d4::rot270);
  CHECK(inverse(d4::vflip) == d4::vflip);
  CHECK(inverse(d4::rot270_vflip) == d4::rot270_vflip);
  CHECK(compose(inverse(d4::rot270_vflip), d4::rot270_vflip) == d4::identity);
}

TEST_CASE("group axioms hold on all 8 elements, bitwise on tensors") {
  Rng rng(77);
  const Tensor t = random_tensor(rng, {3, 4, 5, 5});

  // Closure and compose-consistency with sequential application.
  for (const GeomTransform& g1 : d4::all) {
    for (const GeomTransform& g2 : d4::all) {
      const GeomTransform c = compose(g2, g1);
      CHECK(std::count(d4::all.begin(), d4::all.end(), c) == 1);
      CHECK(bitwise_equal(apply(c, t), apply(g2, apply(g1, t))));
    }
  }
  // Identity and inverses.
  for (const GeomTransform& g : d4::all) {
    CHECK(compose(g, d4::identity) == g);
    CHECK(compose(d4::identity, g) == g);
    CHECK(compose(inverse(g), g) == d4::identity);
    CHECK(compose(g, inverse(g)) == d4::identity);
    CHECK(bitwise_equal(apply(inverse(g), apply(g, t)), t));
  }
  // Associativity, spot-checked on random triples.
  Rng pick(123);
  for (int k = 0; k < 64; ++k) {
    const GeomTransform a = d4::all[pick.next_below(8)];
    const GeomTransform b = d4::all[pick.next_below(8)];
    const GeomTransform c = d4::all[pick.next_below(8)];
    CHECK(compose(compose(c, b), a) == compose(c, compose(b, a)));
  }
  CHECK(compose(d4::vflip, d4::vflip) == d4::identity);
  CHECK(compose(d4::rot90, d4::rot90) == d4::rot180);
}

TEST_CASE("apply preserves sums and histograms exactly") {
  Rng rng(31);
  const Tensor t = random_tensor(rng, {2, 6, 6});
  for (const GeomTransform& g : d4::all) {
    const Tensor r = apply(g, t);
    const std::multiset<double> before(t.values().begin(), t.values().end());
    const std::multiset<double> after(r.values().begin(), r.values().end());
    CHECK(before == after);
  }
}

TEST_CASE("transform_vector matches the direction statements") {
  const Vec2 east{1, 0};
  CHECK(transform_vector(d4::identity, east).x == 1.0);
  CHECK(transform_vector(d4::identity, east).y == 0.0);
  // Rot180 sends the motion to the exact opposite direction.
  CHECK(transform_vector(d4::rot180, east).x == -1.0);
  CHECK(transform_vector(d4::rot180, east).y == 0.0);
  // VFlip negates the southward component: (3, 4) -> (3, -4).
  const Vec2 v = transform_vector(d4::vflip, {3, 4});
  CHECK(v.x == 3.0);
  CHECK(v.y == -4.0);
}

TEST_CASE("transform_vector is a homomorphism") {
  Rng rng(41);
  for (const GeomTransform& g1 : d4::all) {
    for (const GeomTransform& g2 : d4::all) {
      const Vec2 v{rng.uniform(-3, 3), rng.uniform(-3, 3)};
      const Vec2 lhs = transform_vector(compose(g2, g1), v);
      const Vec2 rhs = transform_vector(g2, transform_vector(g1, v));
      CHECK(lhs.x == doctest::Approx(rhs.x).epsilon(1e-15));
      CHECK(lhs.y == doctest::Approx(rhs.y).epsilon(1e-15));
    }
  }
}

TEST_CASE("vector map is consistent with the pixel action") {
  // Push two points through apply via one-hot planes and compare the
  // displacement of their argmax positions with transform_vector.
  const std::size_t n = 7;
  for (const GeomTransform& g : d4::all) {
    const std::size_t i0 = 2, j0 = 2, i1 = 4, j1 = 5;  // displacement (3, 2)
    auto locate = [&](std::size_t i, std::size_t j) {
      Tensor plane({n, n});
      plane[i * n + j] = 1.0;
      const Tensor moved = apply(g, plane);
      const std::size_t at = static_cast<std::size_t>(
          std::max_element(moved.values().begin(), moved.values().end()) -
          moved.values().begin());
      return std::pair<double, double>(static_cast<double>(at / n),
                                       static_cast<double>(at % n));
    };
    const auto [pi0, pj0] = locate(i0, j0);
    const auto [pi1, pj1] = locate(i1, j1);
    const Vec2 mapped = transform_vector(
        g, {static_cast<double>(j1 - j0), static_cast<double>(i1 - i0)});
    CHECK(pj1 - pj0 == mapped.x);
    CHECK(pi1 - pi0 == mapped.y);
  }
}

TEST_CASE("the five-member policy is exactly the published list") {
  const AugPolicy& policy = paper_policy();
  const std::vector<GeomTransform> expected = {
      d4::rot90, d4::rot180_vflip, d4::rot270, d4::rot270_vflip, d4::vflip};
  CHECK(policy.members == expected);
  CHECK(std::count(policy.members.begin(), policy.members.end(), d4::identity) == 0);
  CHECK(std::count(policy.members.begin(), policy.members.end(), d4::rot180) == 0);
  for (std::size_t i = 0; i < policy.members.size(); ++i)
    for (std::size_t j = i + 1; j < policy.members.size(); ++j)
      CHECK_FALSE(policy.members[i] == policy.members[j]);
}

TEST_CASE("transform names round-trip") {
  const std::vector<std::string> names = {
      "id",    "rot90",       "rot180",       "rot270",
      "vflip", "rot90+vflip", "rot180+vflip", "rot270+vflip"};
  for (std::size_t k = 0; k < d4::all.size(); ++k) {
    CHECK(to_string(d4::all[k]) == names[k]);
    CHECK(parse_transform(names[k]) == d4::all[k]);
  }
  CHECK_THROWS_AS(parse_transform("rot45"), ConfigError);
}
