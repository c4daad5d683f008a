#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nowcast/geometry.hpp"
#include "nowcast/tensor.hpp"

namespace nowcast {

struct CellRange {
  double min = 0.0;
  double max = 0.0;
};

struct BiasHotspot {
  double row = 0.0;
  double col = 0.0;
  double sigma = 6.0;
  double gain = 2.0;
};

// Climate of one synthetic region: advection regime, rain-cell statistics,
// seasonality and the spatial birth-probability bias (the regionality knob).
struct RegionSpec {
  std::string region_id;
  Vec2 wind_mean;             // px/frame, (east, south)
  double wind_jitter = 0.0;   // std-dev of the per-frame wind perturbation
  double cell_birth_rate = 0.3;  // expected new cells per frame
  double seasonal_amplitude = 0.0;
  double seasonal_phase = 0.0;
  CellRange cell_intensity{0.6, 2.6};  // peak rain rate, mm/h
  CellRange cell_radius{2.6, 4.2};     // gaussian sigma, px
  std::vector<BiasHotspot> bias_hotspots;
  double bias_floor = 0.25;

  void validate() const;
};

// Nonnegative map scaling the per-pixel birth probability.
Tensor frequency_bias_map(const RegionSpec& spec, std::size_t h, std::size_t w);

enum class Split { train, val, test };
std::string to_string(Split s);
Split parse_split(std::string_view name);

struct SequenceRef {
  std::string input;  // paths relative to the dataset root
  std::string label;
};

struct RegionEntry {
  RegionSpec spec;
  Split split = Split::train;
  std::string year_tag;
  std::string bias_file;
  std::vector<SequenceRef> sequences;
};

struct DatasetManifest {
  GridLayout layout;
  std::uint64_t seed = 0;
  double rain_threshold = 0.2;
  std::filesystem::path root;
  std::vector<RegionEntry> regions;

  const RegionEntry* find_region(std::string_view region_id) const;
};

struct GenOptions {
  int warmup = 8;              // spin-up frames before recording starts
  double rain_threshold = 0.2; // mm/h binarization level for labels
  // Cells planted before the first frame: {row, col, sigma, peak}. Used by
  // tests and demos that need a fully controlled field.
  std::vector<std::array<double, 4>> initial_cells;
};

struct SequenceData {
  Tensor input;  // {C, T_in, H, W}
  Tensor label;  // {1, T_out, h, w}, values in {0, 1}
  Tensor truth;  // {t_total, H, W} continuous rain rate
};

// Advects gaussian rain cells along wind_mean + jitter with seasonally
// modulated births, then derives the four input channels (raw rate, blurred
// rate, one-frame-lagged rate, gradient magnitude) and the binarized label
// crop. Fully determined by (spec, layout, t_total, seed, options).
SequenceData generate_sequence(const RegionSpec& spec, const GridLayout& layout,
                               int t_total, std::uint64_t seed,
                               const GenOptions& options = {});

struct RegionConfig {
  RegionSpec spec;
  Split split = Split::train;
  std::string year_tag;
};

struct BenchmarkConfig {
  GridLayout layout;
  std::uint64_t seed = 7;
  int train_sequences = 200;
  int val_sequences = 48;
  int test_sequences = 64;
  GenOptions gen;
  std::vector<RegionConfig> regions;

  void validate() const;
};

// Three eastward-ish train regions with distinct hotspot maps, one
// validation region, and two test regions whose winds are rotated at least
// a quarter turn from every train wind and whose season phase is shifted.
BenchmarkConfig default_benchmark_config();

// Reads a JSON config mirroring BenchmarkConfig field names; absent fields
// keep their defaults.
BenchmarkConfig load_benchmark_config(const std::filesystem::path& path);

// Generates every sequence and writes <root>/<region>/<split>/<seq>.input.nwt
// / .label.nwt plus manifest.json. Refuses to overwrite an existing dataset
// unless force is set.
DatasetManifest build_benchmark(const BenchmarkConfig& config,
                                const std::filesystem::path& out_dir, bool force,
                                int threads);

void save_manifest(const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::filesystem::path& path);

}  // namespace nowcast
