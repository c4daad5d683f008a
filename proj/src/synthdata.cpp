#include "nowcast/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include <json.hpp>

#include "nowcast/error.hpp"
#include "nowcast/parallel.hpp"
#include "nowcast/rng.hpp"

namespace nowcast {

namespace {

using nlohmann::json;

// Backward warp by one frame of wind: value at (i, j) comes from the
// bilinear sample at (i - wind.y, j - wind.x); samples outside the grid
// read zero, so rain leaves the domain through the downwind boundary.
void advect(const Tensor& src, Tensor& dst, Vec2 wind) {
  const std::size_t h = src.height();
  const std::size_t w = src.width();
  const auto at = [&](std::ptrdiff_t i, std::ptrdiff_t j) -> double {
    if (i < 0 || j < 0 || i >= static_cast<std::ptrdiff_t>(h) ||
        j >= static_cast<std::ptrdiff_t>(w))
      return 0.0;
    return src[static_cast<std::size_t>(i) * w + static_cast<std::size_t>(j)];
  };
  for (std::size_t i = 0; i < h; ++i) {
    const double y = static_cast<double>(i) - wind.y;
    const auto i0 = static_cast<std::ptrdiff_t>(std::floor(y));
    const double fy = y - static_cast<double>(i0);
    for (std::size_t j = 0; j < w; ++j) {
      const double x = static_cast<double>(j) - wind.x;
      const auto j0 = static_cast<std::ptrdiff_t>(std::floor(x));
      const double fx = x - static_cast<double>(j0);
      dst[i * w + j] = (1.0 - fy) * ((1.0 - fx) * at(i0, j0) + fx * at(i0, j0 + 1)) +
                       fy * ((1.0 - fx) * at(i0 + 1, j0) + fx * at(i0 + 1, j0 + 1));
    }
  }
}

void deposit_cell(Tensor& field, double row, double col, double sigma, double peak) {
  const std::size_t h = field.height();
  const std::size_t w = field.width();
  const double cut = 3.5 * sigma;
  const auto i0 = static_cast<std::ptrdiff_t>(std::floor(row - cut));
  const auto i1 = static_cast<std::ptrdiff_t>(std::ceil(row + cut));
  const auto j0 = static_cast<std::ptrdiff_t>(std::floor(col - cut));
  const auto j1 = static_cast<std::ptrdiff_t>(std::ceil(col + cut));
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(0, i0);
       i <= std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(h) - 1, i1); ++i) {
    for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(0, j0);
         j <= std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(w) - 1, j1); ++j) {
      const double di = static_cast<double>(i) - row;
      const double dj = static_cast<double>(j) - col;
      field[static_cast<std::size_t>(i) * w + static_cast<std::size_t>(j)] +=
          peak * std::exp(-(di * di + dj * dj) * inv);
    }
  }
}

Tensor gradient_magnitude(const Tensor& f) {
  const std::size_t h = f.height();
  const std::size_t w = f.width();
  Tensor out(std::vector<std::size_t>(f.shape()));
  for (std::size_t i = 0; i < h; ++i) {
    const std::size_t iu = i == 0 ? 0 : i - 1;
    const std::size_t id = i + 1 >= h ? h - 1 : i + 1;
    for (std::size_t j = 0; j < w; ++j) {
      const std::size_t jl = j == 0 ? 0 : j - 1;
      const std::size_t jr = j + 1 >= w ? w - 1 : j + 1;
      const double gx = (f[i * w + jr] - f[i * w + jl]) / 2.0;
      const double gy = (f[id * w + j] - f[iu * w + j]) / 2.0;
      out[i * w + j] = std::sqrt(gx * gx + gy * gy);
    }
  }
  return out;
}

}  // namespace

void RegionSpec::validate() const {
  if (region_id.empty()) throw ConfigError("region_id must be non-empty");
  if (cell_birth_rate < 0.0) throw ConfigError("cell_birth_rate must be >= 0");
  if (cell_radius.min <= 0.0 || cell_radius.max < cell_radius.min)
    throw ConfigError("cell_radius range invalid");
  if (cell_intensity.max < cell_intensity.min)
    throw ConfigError("cell_intensity range invalid");
  if (wind_jitter < 0.0) throw ConfigError("wind_jitter must be >= 0");
  if (bias_floor < 0.0) throw ConfigError("bias_floor must be >= 0");
  for (const BiasHotspot& hs : bias_hotspots) {
    if (hs.sigma <= 0.0 || hs.gain < 0.0) throw ConfigError("bias hotspot invalid");
  }
}

Tensor frequency_bias_map(const RegionSpec& spec, std::size_t h, std::size_t w) {
  Tensor bias = Tensor::full({h, w}, spec.bias_floor);
  for (const BiasHotspot& hs : spec.bias_hotspots) {
    const double inv = 1.0 / (2.0 * hs.sigma * hs.sigma);
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        const double di = static_cast<double>(i) - hs.row;
        const double dj = static_cast<double>(j) - hs.col;
        bias[i * w + j] += hs.gain * std::exp(-(di * di + dj * dj) * inv);
      }
    }
  }
  return bias;
}

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  throw ContractError("invalid split");
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw ConfigError("unknown split: " + std::string(name));
}

const RegionEntry* DatasetManifest::find_region(std::string_view region_id) const {
  for (const RegionEntry& r : regions) {
    if (r.spec.region_id == region_id) return &r;
  }
  return nullptr;
}

SequenceData generate_sequence(const RegionSpec& spec, const GridLayout& layout,
                               int t_total, std::uint64_t seed,
                               const GenOptions& options) {
  spec.validate();
  layout.validate();
  if (layout.channels != 4)
    throw ConfigError("generator emits exactly 4 input channels");
  if (t_total < static_cast<int>(layout.frames_in + layout.frames_out))
    throw ContractError("t_total must cover frames_in + frames_out");
  if (options.warmup < 0) throw ConfigError("warmup must be >= 0");

  const std::size_t H = layout.height, W = layout.width;
  Rng rng(seed);

  // Season position of this sequence; sequences sample half the seasonal
  // cycle, so a phase shift genuinely changes the rain climate.
  const double season = rng.uniform(0.0, 0.5);
  const double lambda =
      spec.cell_birth_rate *
      std::max(0.0, 1.0 + spec.seasonal_amplitude *
                              std::sin(2.0 * std::numbers::pi * season +
                                       spec.seasonal_phase));

  const Tensor bias = frequency_bias_map(spec, H, W);
  std::vector<double> cdf(bias.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < bias.size(); ++i) {
    acc += bias[i];
    cdf[i] = acc;
  }

  Tensor field({H, W});
  Tensor next_field({H, W});
  Tensor lag0({H, W});
  for (const auto& cell : options.initial_cells)
    deposit_cell(field, cell[0], cell[1], cell[2], cell[3]);

  SequenceData out;
  out.truth = Tensor({static_cast<std::size_t>(t_total), H, W});

  const int total_steps = options.warmup + t_total;
  for (int step = 0; step < total_steps; ++step) {
    if (step > 0) {
      Vec2 wind = spec.wind_mean;
      if (spec.wind_jitter > 0.0) {
        wind.x += rng.normal(0.0, spec.wind_jitter);
        wind.y += rng.normal(0.0, spec.wind_jitter);
      }
      advect(field, next_field, wind);
      std::swap(field, next_field);
    }
    const int births = rng.poisson(lambda);
    for (int b = 0; b < births; ++b) {
      const double u = rng.next_double() * acc;
      const std::size_t idx = static_cast<std::size_t>(
          std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
      const double row = static_cast<double>(idx / W) + rng.next_double();
      const double col = static_cast<double>(idx % W) + rng.next_double();
      const double radius = rng.uniform(spec.cell_radius.min, spec.cell_radius.max);
      const double peak =
          rng.uniform(spec.cell_intensity.min, spec.cell_intensity.max);
      deposit_cell(field, row, col, radius, peak);
    }
    if (step == options.warmup - 1) lag0 = field;
    if (step >= options.warmup) {
      const std::size_t t = static_cast<std::size_t>(step - options.warmup);
      std::copy(field.data(), field.data() + H * W, out.truth.data() + t * H * W);
    }
  }

  // Channels: raw rate, blurred rate (cloud proxy), one-frame-lagged rate,
  // gradient magnitude.
  out.input = Tensor(layout.input_shape());
  const std::size_t plane = H * W;
  for (std::size_t t = 0; t < layout.frames_in; ++t) {
    Tensor frame({H, W},
                 std::vector<double>(out.truth.data() + t * plane,
                                     out.truth.data() + (t + 1) * plane));
    Tensor blurred = box_filter_3x3(box_filter_3x3(frame, KernelMode::mean),
                                    KernelMode::mean);
    Tensor grad = gradient_magnitude(frame);
    double* ch0 = out.input.data() + (0 * layout.frames_in + t) * plane;
    double* ch1 = out.input.data() + (1 * layout.frames_in + t) * plane;
    double* ch2 = out.input.data() + (2 * layout.frames_in + t) * plane;
    double* ch3 = out.input.data() + (3 * layout.frames_in + t) * plane;
    std::copy(frame.data(), frame.data() + plane, ch0);
    std::copy(blurred.data(), blurred.data() + plane, ch1);
    const double* lag =
        t == 0 ? lag0.data() : out.truth.data() + (t - 1) * plane;
    std::copy(lag, lag + plane, ch2);
    std::copy(grad.data(), grad.data() + plane, ch3);
  }

  out.label = Tensor(layout.label_shape());
  const std::size_t r0 = layout.crop_row0(), c0 = layout.crop_col0();
  for (std::size_t to = 0; to < layout.frames_out; ++to) {
    const double* frame = out.truth.data() + (layout.frames_in + to) * plane;
    for (std::size_t i = 0; i < layout.label_height; ++i) {
      for (std::size_t j = 0; j < layout.label_width; ++j) {
        const double v = frame[(r0 + i) * W + (c0 + j)];
        out.label[(to * layout.label_height + i) * layout.label_width + j] =
            v >= options.rain_threshold ? 1.0 : 0.0;
      }
    }
  }
  return out;
}

void BenchmarkConfig::validate() const {
  layout.validate();
  if (gen.rain_threshold < 0.0) throw ConfigError("rain_threshold must be >= 0");
  int train = 0, test = 0;
  std::set<std::string> ids;
  for (const RegionConfig& rc : regions) {
    rc.spec.validate();
    if (!ids.insert(rc.spec.region_id).second)
      throw ConfigError("duplicate region_id: " + rc.spec.region_id);
    if (rc.split == Split::train) ++train;
    if (rc.split == Split::test) ++test;
  }
  if (train < 3 || test < 2)
    throw ConfigError("benchmark needs >= 3 train regions and >= 2 test regions");
  std::set<std::string> train_years, test_years;
  for (const RegionConfig& rc : regions) {
    if (rc.split == Split::train) train_years.insert(rc.year_tag);
    if (rc.split == Split::test) test_years.insert(rc.year_tag);
  }
  for (const std::string& y : test_years) {
    if (train_years.count(y))
      throw ConfigError("test year-tag also appears in train: " + y);
  }
  if (train_sequences < 1 || val_sequences < 0 || test_sequences < 1)
    throw ConfigError("sequence counts invalid");
}

BenchmarkConfig default_benchmark_config() {
  BenchmarkConfig cfg;
  cfg.layout = GridLayout{};  // 4 x 4 x 48 x 48 -> 1 x 8 x 16 x 16
  cfg.seed = 7;

  auto region = [](std::string id, Vec2 wind, double phase,
                   std::vector<BiasHotspot> hotspots) {
    RegionSpec s;
    s.region_id = std::move(id);
    s.wind_mean = wind;
    s.wind_jitter = 0.07;
    s.cell_birth_rate = 0.30;
    s.seasonal_amplitude = 0.6;
    s.seasonal_phase = phase;
    s.bias_hotspots = std::move(hotspots);
    return s;
  };
  const double pi = std::numbers::pi;
  cfg.regions = {
      {region("tr_east", {0.55, 0.0}, 0.0, {{22, 20, 7, 2.6}}), Split::train, "y1"},
      {region("tr_southeast", {0.40, 0.40}, 0.0, {{18, 26, 6, 2.2}, {30, 14, 5, 1.6}}),
       Split::train, "y1"},
      {region("tr_northeast", {0.40, -0.40}, 0.0, {{28, 22, 6, 2.4}}), Split::train,
       "y1"},
      {region("va_east", {0.52, 0.10}, 0.0, {{24, 24, 7, 2.0}}), Split::val, "y1"},
      {region("te_west", {-0.55, 0.0}, pi, {{20, 28, 6, 2.4}}), Split::test, "y2"},
      {region("te_southwest", {-0.40, 0.40}, pi, {{26, 18, 6, 2.2}}), Split::test,
       "y2"},
  };
  return cfg;
}

namespace {

json spec_to_json(const RegionSpec& s) {
  json hotspots = json::array();
  for (const BiasHotspot& h : s.bias_hotspots)
    hotspots.push_back({h.row, h.col, h.sigma, h.gain});
  return {{"region_id", s.region_id},
          {"wind_mean", {s.wind_mean.x, s.wind_mean.y}},
          {"wind_jitter", s.wind_jitter},
          {"cell_birth_rate", s.cell_birth_rate},
          {"seasonal_amplitude", s.seasonal_amplitude},
          {"seasonal_phase", s.seasonal_phase},
          {"cell_intensity", {s.cell_intensity.min, s.cell_intensity.max}},
          {"cell_radius", {s.cell_radius.min, s.cell_radius.max}},
          {"bias_floor", s.bias_floor},
          {"bias_hotspots", hotspots}};
}

RegionSpec spec_from_json(const json& j) {
  RegionSpec s;
  s.region_id = j.at("region_id").get<std::string>();
  s.wind_mean = {j.at("wind_mean").at(0).get<double>(),
                 j.at("wind_mean").at(1).get<double>()};
  s.wind_jitter = j.value("wind_jitter", s.wind_jitter);
  s.cell_birth_rate = j.value("cell_birth_rate", s.cell_birth_rate);
  s.seasonal_amplitude = j.value("seasonal_amplitude", s.seasonal_amplitude);
  s.seasonal_phase = j.value("seasonal_phase", s.seasonal_phase);
  if (j.contains("cell_intensity"))
    s.cell_intensity = {j.at("cell_intensity").at(0).get<double>(),
                        j.at("cell_intensity").at(1).get<double>()};
  if (j.contains("cell_radius"))
    s.cell_radius = {j.at("cell_radius").at(0).get<double>(),
                     j.at("cell_radius").at(1).get<double>()};
  s.bias_floor = j.value("bias_floor", s.bias_floor);
  if (j.contains("bias_hotspots")) {
    s.bias_hotspots.clear();
    for (const auto& h : j.at("bias_hotspots"))
      s.bias_hotspots.push_back({h.at(0).get<double>(), h.at(1).get<double>(),
                                 h.at(2).get<double>(), h.at(3).get<double>()});
  }
  return s;
}

json layout_to_json(const GridLayout& L) {
  return {{"channels", L.channels},       {"frames_in", L.frames_in},
          {"frames_out", L.frames_out},   {"height", L.height},
          {"width", L.width},             {"label_height", L.label_height},
          {"label_width", L.label_width}};
}

GridLayout layout_from_json(const json& j, GridLayout base) {
  base.channels = j.value("channels", base.channels);
  base.frames_in = j.value("frames_in", base.frames_in);
  base.frames_out = j.value("frames_out", base.frames_out);
  base.height = j.value("height", base.height);
  base.width = j.value("width", base.width);
  base.label_height = j.value("label_height", base.label_height);
  base.label_width = j.value("label_width", base.label_width);
  return base;
}

}  // namespace

BenchmarkConfig load_benchmark_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read config: " + path.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw FormatError("config parse error: " + std::string(e.what()));
  }
  BenchmarkConfig cfg = default_benchmark_config();
  try {
    if (j.contains("layout")) cfg.layout = layout_from_json(j.at("layout"), cfg.layout);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.train_sequences = j.value("train_sequences", cfg.train_sequences);
    cfg.val_sequences = j.value("val_sequences", cfg.val_sequences);
    cfg.test_sequences = j.value("test_sequences", cfg.test_sequences);
    cfg.gen.warmup = j.value("warmup", cfg.gen.warmup);
    cfg.gen.rain_threshold = j.value("rain_threshold", cfg.gen.rain_threshold);
    if (j.contains("regions")) {
      cfg.regions.clear();
      for (const auto& r : j.at("regions")) {
        RegionConfig rc;
        rc.spec = spec_from_json(r);
        rc.split = parse_split(r.at("split").get<std::string>());
        rc.year_tag = r.value("year_tag", std::string("y1"));
        cfg.regions.push_back(std::move(rc));
      }
    }
  } catch (const json::exception& e) {
    throw FormatError("config field error: " + std::string(e.what()));
  }
  return cfg;
}

DatasetManifest build_benchmark(const BenchmarkConfig& config,
                                const std::filesystem::path& out_dir, bool force,
                                int threads) {
  config.validate();
  const std::filesystem::path manifest_path = out_dir / "manifest.json";
  if (std::filesystem::exists(manifest_path) && !force)
    throw ConfigError("refusing to overwrite existing dataset at " +
                      manifest_path.string() + " (pass --force)");
  std::filesystem::create_directories(out_dir);

  DatasetManifest manifest;
  manifest.layout = config.layout;
  manifest.seed = config.seed;
  manifest.rain_threshold = config.gen.rain_threshold;
  manifest.root = out_dir;

  struct Job {
    std::size_t region_index;
    int seq_index;
  };
  std::vector<Job> jobs;
  for (std::size_t r = 0; r < config.regions.size(); ++r) {
    const RegionConfig& rc = config.regions[r];
    RegionEntry entry;
    entry.spec = rc.spec;
    entry.split = rc.split;
    entry.year_tag = rc.year_tag;
    entry.bias_file = rc.spec.region_id + "/bias.nwt";
    const int n = rc.split == Split::train  ? config.train_sequences
                  : rc.split == Split::val ? config.val_sequences
                                           : config.test_sequences;
    const std::filesystem::path dir =
        out_dir / rc.spec.region_id / to_string(rc.split);
    std::filesystem::create_directories(dir);
    for (int s = 0; s < n; ++s) {
      char name[32];
      std::snprintf(name, sizeof(name), "%04d", s);
      SequenceRef ref;
      ref.input = rc.spec.region_id + "/" + to_string(rc.split) + "/" +
                  name + ".input.nwt";
      ref.label = rc.spec.region_id + "/" + to_string(rc.split) + "/" +
                  name + ".label.nwt";
      entry.sequences.push_back(std::move(ref));
      jobs.push_back({r, s});
    }
    write_tensor(frequency_bias_map(rc.spec, config.layout.height,
                                    config.layout.width),
                 out_dir / entry.bias_file);
    manifest.regions.push_back(std::move(entry));
  }

  const int t_total =
      static_cast<int>(config.layout.frames_in + config.layout.frames_out);
  parallel_for(jobs.size(), threads, [&](std::size_t k) {
    const Job& job = jobs[k];
    const RegionEntry& entry = manifest.regions[job.region_index];
    // Each sequence owns a stream derived from (seed, region, index), so
    // generation order and thread count never matter.
    const std::uint64_t stream =
        mix64(mix64(config.seed ^ mix64(fnv1a(entry.spec.region_id))) ^
              mix64(static_cast<std::uint64_t>(job.seq_index)));
    SequenceData data = generate_sequence(entry.spec, config.layout, t_total,
                                          stream, config.gen);
    const SequenceRef& ref = entry.sequences[static_cast<std::size_t>(job.seq_index)];
    write_tensor(data.input, out_dir / ref.input);
    write_tensor(data.label, out_dir / ref.label);
  });

  save_manifest(manifest);
  return manifest;
}

void save_manifest(const DatasetManifest& manifest) {
  json j;
  j["format"] = "nowcast-dataset-v1";
  j["layout"] = layout_to_json(manifest.layout);
  j["seed"] = manifest.seed;
  j["rain_threshold"] = manifest.rain_threshold;
  json regions = json::array();
  for (const RegionEntry& r : manifest.regions) {
    json jr;
    jr["spec"] = spec_to_json(r.spec);
    jr["split"] = to_string(r.split);
    jr["year_tag"] = r.year_tag;
    jr["bias_file"] = r.bias_file;
    json seqs = json::array();
    for (const SequenceRef& s : r.sequences)
      seqs.push_back({{"input", s.input}, {"label", s.label}});
    jr["sequences"] = seqs;
    regions.push_back(std::move(jr));
  }
  j["regions"] = regions;
  const std::filesystem::path path = manifest.root / "manifest.json";
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::filesystem::path file = path;
  if (std::filesystem::is_directory(file)) file /= "manifest.json";
  std::ifstream is(file);
  if (!is) throw IoError("cannot read manifest: " + file.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw FormatError("manifest parse error: " + std::string(e.what()));
  }
  DatasetManifest m;
  m.root = file.parent_path();
  try {
    m.layout = layout_from_json(j.at("layout"), m.layout);
    m.seed = j.value("seed", std::uint64_t{0});
    m.rain_threshold = j.value("rain_threshold", 0.2);
    for (const auto& jr : j.at("regions")) {
      RegionEntry r;
      r.spec = spec_from_json(jr.at("spec"));
      r.split = parse_split(jr.at("split").get<std::string>());
      r.year_tag = jr.value("year_tag", std::string());
      r.bias_file = jr.value("bias_file", std::string());
      for (const auto& js : jr.at("sequences")) {
        r.sequences.push_back({js.at("input").get<std::string>(),
                               js.at("label").get<std::string>()});
      }
      m.regions.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw FormatError("manifest field error: " + std::string(e.what()));
  }
  m.layout.validate();
  return m;
}

}  // namespace nowcast
