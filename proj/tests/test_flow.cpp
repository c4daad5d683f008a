#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "nowcast/error.hpp"
#include "nowcast/flow.hpp"
#include "nowcast/rng.hpp"
#include "nowcast/synthdata.hpp"

using namespace nowcast;
namespace fs = std::filesystem;

namespace {

// Textured frame: smooth random bumps, plenty of variance in every block.
Tensor textured_frame(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Tensor f({n, n});
  for (int k = 0; k < 40; ++k) {
    const double ci = rng.uniform(2.0, n - 2.0);
    const double cj = rng.uniform(2.0, n - 2.0);
    const double amp = rng.uniform(0.5, 2.0);
    const double s = rng.uniform(1.0, 2.5);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double di = i - ci, dj = j - cj;
        f[i * n + j] += amp * std::exp(-(di * di + dj * dj) / (2 * s * s));
      }
    }
  }
  return f;
}

// Integer translation with replicate fill.
Tensor translate(const Tensor& f, int dy, int dx) {
  const std::size_t n = f.height();
  Tensor out({n, n});
  const auto ni = static_cast<std::ptrdiff_t>(n);
  for (std::ptrdiff_t i = 0; i < ni; ++i) {
    for (std::ptrdiff_t j = 0; j < ni; ++j) {
      const std::ptrdiff_t si = std::clamp<std::ptrdiff_t>(i - dy, 0, ni - 1);
      const std::ptrdiff_t sj = std::clamp<std::ptrdiff_t>(j - dx, 0, ni - 1);
      out[i * n + j] = f[si * n + sj];
    }
  }
  return out;
}

DirectionHistogram single_direction_histogram(int bin) {
  DirectionHistogram h;
  h.mass[bin] = 1.0;
  return h;
}

}  // namespace

TEST_CASE("identical frames give zero displacement everywhere, all valid") {
  const Tensor f = textured_frame(24, 3);
  const FlowField flow = block_matching_flow(f, f, 8, 4);
  for (std::size_t i = 0; i < flow.u.size(); ++i) {
    CHECK(flow.u[i] == 0.0);
    CHECK(flow.v[i] == 0.0);
    CHECK(flow.valid[i] == 1.0);
  }
}

TEST_CASE("constructed translation is recovered in the interior") {
  const Tensor a = textured_frame(32, 5);
  const Tensor b = translate(a, 1, 2);  // dy=1 south, dx=2 east
  const FlowField flow = block_matching_flow(a, b, 8, 4);
  const std::size_t n = 32;
  // Interior blocks (one block margin) see the translated texture cleanly.
  for (std::size_t i = 8; i < n - 8; ++i) {
    for (std::size_t j = 8; j < n - 8; ++j) {
      CHECK(flow.u[i * n + j] == 2.0);
      CHECK(flow.v[i * n + j] == 1.0);
    }
  }
}

TEST_CASE("constant frames are fully invalid and the histogram is all-zero") {
  const Tensor a = Tensor::full({16, 16}, 1.0);
  const FlowField flow = block_matching_flow(a, a, 8, 4);
  for (std::size_t i = 0; i < flow.valid.size(); ++i) CHECK(flow.valid[i] == 0.0);
  const DirectionHistogram hist = direction_histogram(flow, 0.5);
  CHECK(hist.empty());
}

TEST_CASE("block matching contract checks") {
  const Tensor a = Tensor::full({16, 16}, 1.0);
  CHECK_THROWS_AS(block_matching_flow(a, Tensor::full({16, 15}, 1.0), 8, 4),
                  ShapeError);
  CHECK_THROWS_AS(block_matching_flow(a, a, 2, 4), ContractError);
  CHECK_THROWS_AS(block_matching_flow(a, a, 8, 0), ContractError);
}

TEST_CASE("direction histogram conventions") {
  const std::size_t n = 8;
  FlowField flow{Tensor({n, n}), Tensor({n, n}), Tensor::full({n, n}, 1.0)};

  SUBCASE("uniform eastward flow lands in the 0-degree bin") {
    for (std::size_t i = 0; i < n * n; ++i) flow.u[i] = 1.0;
    const DirectionHistogram h = direction_histogram(flow, 0.5);
    CHECK(h.mass[0] == 1.0);
  }
  SUBCASE("uniform southward flow lands in the 270-degree bin") {
    for (std::size_t i = 0; i < n * n; ++i) flow.v[i] = 1.0;
    const DirectionHistogram h = direction_histogram(flow, 0.5);
    const int bin270 = static_cast<int>(270.0 / DirectionHistogram::bin_width_deg());
    CHECK(h.mass[bin270] == 1.0);
  }
  SUBCASE("slow pixels and invalid pixels are excluded") {
    for (std::size_t i = 0; i < n * n; ++i) flow.u[i] = 0.25;  // below min speed
    CHECK(direction_histogram(flow, 0.5).empty());
  }
  SUBCASE("mass sums to one when anything is valid") {
    Rng rng(11);
    for (std::size_t i = 0; i < n * n; ++i) {
      flow.u[i] = rng.uniform(-3, 3);
      flow.v[i] = rng.uniform(-3, 3);
    }
    const DirectionHistogram h = direction_histogram(flow, 0.5);
    double total = 0.0;
    for (double m : h.mass) total += m;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("admissibility of hand-built histograms") {
  const FlowParams P;
  const DirectionHistogram east = single_direction_histogram(0);

  // Rot180 maps east to west: the excluded opposite direction.
  CHECK_FALSE(admissible(d4::rot180, east, P.dominance_fraction, P.max_angle_deg));
  CHECK(admissible(d4::identity, east, P.dominance_fraction, P.max_angle_deg));

  // Dominant set {east-ish, southward}: rot180+vflip maps the southward
  // component onto itself.
  DirectionHistogram two;
  two.mass[0] = 0.5;
  const int bin270 = static_cast<int>(270.0 / DirectionHistogram::bin_width_deg());
  two.mass[bin270] = 0.5;
  CHECK(admissible(d4::rot180_vflip, two, P.dominance_fraction, P.max_angle_deg));

  // All-zero histogram admits everything.
  DirectionHistogram none;
  for (const GeomTransform& g : d4::all)
    CHECK(admissible(g, none, P.dominance_fraction, P.max_angle_deg));
}

TEST_CASE("admissible(identity) is always true") {
  Rng rng(21);
  for (int k = 0; k < 32; ++k) {
    DirectionHistogram h;
    double total = 0.0;
    for (double& m : h.mass) {
      m = rng.next_below(3) == 0 ? rng.uniform(0.0, 1.0) : 0.0;
      total += m;
    }
    if (total > 0)
      for (double& m : h.mass) m /= total;
    CHECK(admissible(d4::identity, h, 0.5, 90.0));
  }
}

TEST_CASE("admissibility verdicts are stable under joint rotation") {
  // Rotating all mass by a quarter turn and conjugating a pure rotation
  // leaves the verdict unchanged.
  Rng rng(22);
  for (int trial = 0; trial < 16; ++trial) {
    DirectionHistogram h;
    for (double& m : h.mass) m = rng.next_below(4) == 0 ? rng.uniform(0.1, 1) : 0.0;
    DirectionHistogram rotated;
    const int shift = 4;  // 90 degrees = 4 bins
    for (int b = 0; b < DirectionHistogram::kBins; ++b)
      rotated.mass[(b + shift) % DirectionHistogram::kBins] = h.mass[b];
    for (const GeomTransform& g : {d4::rot90, d4::rot180, d4::rot270}) {
      CHECK(admissible(g, h, 0.5, 90.0) == admissible(g, rotated, 0.5, 90.0));
    }
  }
}

TEST_CASE("single dominant direction with a 90-degree cone") {
  // Exactly the transforms mapping the dominant direction (the bin center,
  // 11.25 degrees) within a quarter turn of itself are admissible.
  const DirectionHistogram east = single_direction_histogram(0);
  const double center = DirectionHistogram::bin_center_deg(0);
  std::array<bool, 8> expected{};
  for (std::size_t k = 0; k < d4::all.size(); ++k) {
    const double rad = center * std::numbers::pi / 180.0;
    const Vec2 mapped =
        transform_vector(d4::all[k], {std::cos(rad), -std::sin(rad)});
    const double deg = std::fmod(
        std::atan2(-mapped.y, mapped.x) * 180.0 / std::numbers::pi + 360.0, 360.0);
    const double dist =
        std::min(std::abs(deg - center), 360.0 - std::abs(deg - center));
    expected[k] = dist <= 90.0 + 1e-9;
  }
  // The inclusive cone admits rot90 and rot270 at exactly 90 degrees and
  // rejects every transform with a rot180 "component" on the east axis.
  CHECK(expected == std::array<bool, 8>{true, true, false, true, true, false,
                                        false, true});
  for (std::size_t k = 0; k < d4::all.size(); ++k)
    CHECK(admissible(d4::all[k], east, 0.5, 90.0) == expected[k]);
}

TEST_CASE("flow is exactly equivariant under all 8 dihedral actions") {
  const std::size_t n = 32;
  const Tensor a = textured_frame(n, 31);
  const Tensor b = translate(a, 1, 2);
  const FlowField base = block_matching_flow(a, b, 8, 4);

  for (const GeomTransform& g : d4::all) {
    const FlowField moved =
        block_matching_flow(apply(g, a), apply(g, b), 8, 4);
    // Expected: permute the pixel planes by g, then map the vectors.
    const Tensor pu = apply(g, base.u);
    const Tensor pv = apply(g, base.v);
    const Tensor pvalid = apply(g, base.valid);
    for (std::size_t i = 0; i < pu.size(); ++i) {
      const Vec2 mapped = transform_vector(g, {pu[i], pv[i]});
      CHECK(moved.u[i] == mapped.x);
      CHECK(moved.v[i] == mapped.y);
      CHECK(moved.valid[i] == pvalid[i]);
    }
  }
}

TEST_CASE("audit over synthetic regions") {
  const fs::path dir = fs::temp_directory_path() / "nowcast_flow_audit";
  fs::remove_all(dir);

  BenchmarkConfig cfg;
  GridLayout L;
  L.channels = 4;
  L.frames_in = 4;
  L.frames_out = 4;
  L.height = L.width = 32;
  L.label_height = L.label_width = 12;
  cfg.layout = L;
  cfg.seed = 5;
  cfg.train_sequences = 6;
  cfg.val_sequences = 1;
  cfg.test_sequences = 2;
  cfg.gen.warmup = 6;

  auto region = [](std::string id, Vec2 wind, double jitter, Split split,
                   std::string year) {
    RegionConfig rc;
    rc.spec.region_id = std::move(id);
    rc.spec.wind_mean = wind;
    rc.spec.wind_jitter = jitter;
    rc.spec.cell_birth_rate = 0.8;
    rc.spec.cell_radius = {2.0, 3.0};
    rc.spec.bias_hotspots = {{16, 16, 8, 1.5}};
    rc.split = split;
    rc.year_tag = std::move(year);
    return rc;
  };
  // Pure eastward wind, fast enough that the first-to-last frame gap is a
  // clean integer displacement.
  cfg.regions = {
      region("east", {1.0, 0.0}, 0.0, Split::train, "y1"),
      region("east2", {1.0, 0.0}, 0.0, Split::train, "y1"),
      region("east3", {1.0, 0.0}, 0.0, Split::train, "y1"),
      region("v", {1.0, 0.0}, 0.0, Split::val, "y1"),
      region("t1", {-1.0, 0.0}, 0.0, Split::test, "y2"),
      region("t2", {0.0, 1.0}, 0.0, Split::test, "y2"),
  };
  const DatasetManifest manifest = build_benchmark(cfg, dir, true, 0);

  const AuditReport report = audit_policy(manifest, paper_policy(), FlowParams{});
  REQUIRE(report.regions.size() == 6);
  const RegionAudit* east = nullptr;
  for (const RegionAudit& r : report.regions)
    if (r.region == "east") east = &r;
  REQUIRE(east != nullptr);

  // Identity admissible, rot180 inadmissible for the eastward region.
  CHECK(east->verdicts[0]);       // identity
  CHECK_FALSE(east->verdicts[2]); // rot180

  // The pooled histogram points east: dominant bins near 0 degrees.
  REQUIRE(!east->dominant_bins_deg.empty());
  for (double d : east->dominant_bins_deg) {
    const double dist = std::min(d, 360.0 - d);
    CHECK(dist <= 30.0);
  }

  const std::string csv = audit_csv(report);
  CHECK(csv.find("region,transform,dominant_bins,verdict") != std::string::npos);
  CHECK(csv.find("east,rot180,") != std::string::npos);
  CHECK(csv.find("inadmissible") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("audit of isotropic winds admits all 8 transforms") {
  const fs::path dir = fs::temp_directory_path() / "nowcast_flow_audit_iso";
  fs::remove_all(dir);

  BenchmarkConfig cfg;
  GridLayout L;
  L.channels = 4;
  L.frames_in = 4;
  L.frames_out = 4;
  L.height = L.width = 32;
  L.label_height = L.label_width = 12;
  cfg.layout = L;
  cfg.seed = 6;
  cfg.train_sequences = 16;
  cfg.val_sequences = 1;
  cfg.test_sequences = 2;
  cfg.gen.warmup = 6;

  // Wind direction scatters isotropically: zero mean, large jitter.
  auto region = [](std::string id, Vec2 wind, double jitter, Split split,
                   std::string year) {
    RegionConfig rc;
    rc.spec.region_id = std::move(id);
    rc.spec.wind_mean = wind;
    rc.spec.wind_jitter = jitter;
    rc.spec.cell_birth_rate = 0.8;
    rc.spec.cell_radius = {2.0, 3.0};
    rc.spec.bias_hotspots = {{16, 16, 10, 1.0}};
    rc.split = split;
    rc.year_tag = std::move(year);
    return rc;
  };
  cfg.regions = {
      region("iso", {0.0, 0.0}, 1.2, Split::train, "y1"),
      region("iso2", {0.0, 0.0}, 1.2, Split::train, "y1"),
      region("iso3", {0.0, 0.0}, 1.2, Split::train, "y1"),
      region("v", {0.0, 0.0}, 1.2, Split::val, "y1"),
      region("t1", {0.0, 0.0}, 1.2, Split::test, "y2"),
      region("t2", {0.0, 0.0}, 1.2, Split::test, "y2"),
  };
  const DatasetManifest manifest = build_benchmark(cfg, dir, true, 0);
  FlowParams params;
  const AuditReport report = audit_policy(manifest, paper_policy(), params);
  const RegionAudit* iso = nullptr;
  for (const RegionAudit& r : report.regions)
    if (r.region == "iso") iso = &r;
  REQUIRE(iso != nullptr);
  for (std::size_t k = 0; k < d4::all.size(); ++k) CHECK(iso->verdicts[k]);
  fs::remove_all(dir);
}

TEST_CASE("empty dataset audit is vacuous and carries a warning") {
  DatasetManifest manifest;
  manifest.layout = GridLayout{};
  manifest.root = fs::temp_directory_path();
  RegionEntry region;
  region.spec.region_id = "hollow";
  region.split = Split::train;
  manifest.regions.push_back(region);

  const AuditReport report = audit_policy(manifest, paper_policy(), FlowParams{});
  REQUIRE(report.regions.size() == 1);
  CHECK(report.regions[0].sequence_count == 0);
  for (std::size_t k = 0; k < d4::all.size(); ++k)
    CHECK(report.regions[0].verdicts[k]);
  CHECK(!report.warnings.empty());
  CHECK(audit_csv(report).find("# warning:") != std::string::npos);
}

TEST_CASE("audit surfaces unreadable files as IoError with the path") {
  DatasetManifest manifest;
  manifest.layout = GridLayout{};
  manifest.root = fs::temp_directory_path() / "nowcast_flow_missing";
  RegionEntry region;
  region.spec.region_id = "ghost";
  region.split = Split::train;
  region.sequences.push_back({"ghost/train/0000.input.nwt",
                              "ghost/train/0000.label.nwt"});
  manifest.regions.push_back(region);
  CHECK_THROWS_WITH_AS(audit_policy(manifest, paper_policy(), FlowParams{}),
                       doctest::Contains("0000.input.nwt"), IoError);
}
