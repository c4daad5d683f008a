#include "nowcast/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "nowcast/error.hpp"
#include "nowcast/parallel.hpp"
#include "nowcast/reduce.hpp"
#include "nowcast/synthdata.hpp"

namespace nowcast {

namespace {

double block_variance(const Tensor& frame, std::size_t i0, std::size_t i1,
                      std::size_t j0, std::size_t j1) {
  const std::size_t w = frame.width();
  std::vector<double> vals;
  vals.reserve((i1 - i0) * (j1 - j0));
  for (std::size_t i = i0; i < i1; ++i)
    for (std::size_t j = j0; j < j1; ++j) vals.push_back(frame[i * w + j]);
  const double n = static_cast<double>(vals.size());
  std::vector<double> scratch = vals;
  const double mean = multiset_sum(scratch) / n;
  for (std::size_t k = 0; k < vals.size(); ++k) {
    const double d = vals[k] - mean;
    scratch[k] = d * d;
  }
  return multiset_sum(scratch) / n;
}

double angle_deg_of(double u, double v) {
  double deg = std::atan2(-v, u) * 180.0 / std::numbers::pi;
  if (deg < 0.0) deg += 360.0;
  if (deg >= 360.0) deg -= 360.0;
  return deg;
}

double circular_distance_deg(double a, double b) {
  double d = std::abs(a - b);
  d = std::fmod(d, 360.0);
  return d > 180.0 ? 360.0 - d : d;
}

}  // namespace

bool DirectionHistogram::empty() const {
  for (double m : mass)
    if (m != 0.0) return false;
  return true;
}

FlowField block_matching_flow(const Tensor& frame_a, const Tensor& frame_b,
                              int block, int search_radius,
                              double texture_threshold) {
  if (frame_a.rank() != 2 || frame_b.rank() != 2)
    throw ShapeError("block_matching_flow expects rank-2 frames");
  if (!frame_a.same_shape(frame_b))
    throw ShapeError("block_matching_flow: frame shapes differ");
  if (block < 3) throw ContractError("block size must be >= 3");
  if (search_radius < 1) throw ContractError("search radius must be >= 1");

  const std::size_t h = frame_a.height();
  const std::size_t w = frame_a.width();
  FlowField out{Tensor({h, w}), Tensor({h, w}), Tensor({h, w})};

  const auto hi = static_cast<std::ptrdiff_t>(h);
  const auto wi = static_cast<std::ptrdiff_t>(w);
  std::vector<double> diffs;
  for (std::size_t bi = 0; bi * block < h; ++bi) {
    const std::size_t i0 = bi * block;
    const std::size_t i1 = std::min(h, i0 + block);
    for (std::size_t bj = 0; bj * block < w; ++bj) {
      const std::size_t j0 = bj * block;
      const std::size_t j1 = std::min(w, j0 + block);

      const bool textured =
          block_variance(frame_a, i0, i1, j0, j1) >= texture_threshold;
      int best_dy = 0, best_dx = 0;
      if (textured) {
        double best_ssd = 0.0;
        long best_mag = 0;
        bool first = true;
        for (int dy = -search_radius; dy <= search_radius; ++dy) {
          for (int dx = -search_radius; dx <= search_radius; ++dx) {
            diffs.clear();
            for (std::size_t i = i0; i < i1; ++i) {
              const std::ptrdiff_t si = std::clamp<std::ptrdiff_t>(
                  static_cast<std::ptrdiff_t>(i) + dy, 0, hi - 1);
              for (std::size_t j = j0; j < j1; ++j) {
                const std::ptrdiff_t sj = std::clamp<std::ptrdiff_t>(
                    static_cast<std::ptrdiff_t>(j) + dx, 0, wi - 1);
                const double d = frame_a[i * w + j] -
                                 frame_b[static_cast<std::size_t>(si) * w +
                                         static_cast<std::size_t>(sj)];
                diffs.push_back(d * d);
              }
            }
            const double ssd = multiset_sum(diffs);
            const long mag = static_cast<long>(dy) * dy + static_cast<long>(dx) * dx;
            const bool better =
                first || ssd < best_ssd ||
                (ssd == best_ssd &&
                 (mag < best_mag ||
                  (mag == best_mag &&
                   (dy < best_dy || (dy == best_dy && dx < best_dx)))));
            if (better) {
              first = false;
              best_ssd = ssd;
              best_mag = mag;
              best_dy = dy;
              best_dx = dx;
            }
          }
        }
      }
      for (std::size_t i = i0; i < i1; ++i) {
        for (std::size_t j = j0; j < j1; ++j) {
          out.u[i * w + j] = textured ? static_cast<double>(best_dx) : 0.0;
          out.v[i * w + j] = textured ? static_cast<double>(best_dy) : 0.0;
          out.valid[i * w + j] = textured ? 1.0 : 0.0;
        }
      }
    }
  }
  return out;
}

DirectionHistogram direction_histogram(const FlowField& f, double min_speed) {
  if (!f.u.same_shape(f.v) || !f.u.same_shape(f.valid))
    throw ShapeError("flow field components must share one shape");
  DirectionHistogram hist;
  double total = 0.0;
  for (std::size_t i = 0; i < f.u.size(); ++i) {
    if (f.valid[i] == 0.0) continue;
    const double speed = std::hypot(f.u[i], f.v[i]);
    if (speed < min_speed) continue;
    const double deg = angle_deg_of(f.u[i], f.v[i]);
    int bin = static_cast<int>(deg / DirectionHistogram::bin_width_deg());
    bin = std::clamp(bin, 0, DirectionHistogram::kBins - 1);
    hist.mass[bin] += speed;
    total += speed;
  }
  if (total > 0.0) {
    for (double& m : hist.mass) m /= total;
  }
  return hist;
}

std::vector<double> dominant_directions(const DirectionHistogram& hist,
                                        double dominance_fraction) {
  double peak = 0.0;
  for (double m : hist.mass) peak = std::max(peak, m);
  std::vector<double> dirs;
  if (peak <= 0.0) return dirs;
  for (int b = 0; b < DirectionHistogram::kBins; ++b) {
    if (hist.mass[b] >= dominance_fraction * peak)
      dirs.push_back(DirectionHistogram::bin_center_deg(b));
  }
  return dirs;
}

bool admissible(const GeomTransform& g, const DirectionHistogram& hist,
                double dominance_fraction, double max_angle_deg) {
  if (hist.empty()) return true;  // no motion evidence against any transform
  const std::vector<double> dominant =
      dominant_directions(hist, dominance_fraction);
  for (double d : dominant) {
    const double rad = d * std::numbers::pi / 180.0;
    const Vec2 mapped = transform_vector(g, {std::cos(rad), -std::sin(rad)});
    const double mapped_deg = angle_deg_of(mapped.x, mapped.y);
    for (double d2 : dominant) {
      if (circular_distance_deg(mapped_deg, d2) <= max_angle_deg + 1e-9)
        return true;
    }
  }
  return false;
}

AuditReport audit_policy(const DatasetManifest& manifest, const AugPolicy& policy,
                         const FlowParams& params) {
  AuditReport report;
  std::size_t total_sequences = 0;
  const GridLayout& L = manifest.layout;
  const std::size_t plane = L.height * L.width;

  for (const RegionEntry& region : manifest.regions) {
    RegionAudit audit;
    audit.region = region.spec.region_id;
    audit.sequence_count = region.sequences.size();
    total_sequences += region.sequences.size();

    // One raw (unnormalized) histogram per sequence, merged in sequence
    // order so threading cannot change the pooled result.
    std::vector<std::array<double, DirectionHistogram::kBins>> partial(
        region.sequences.size());
    parallel_for(region.sequences.size(), 0, [&](std::size_t s) {
      const Tensor input = read_tensor(manifest.root / region.sequences[s].input);
      if (input.shape() != L.input_shape())
        throw ShapeError("sequence does not match manifest layout: " +
                         region.sequences[s].input);
      // Channel 0 (raw rate), first and last input frames.
      const double* base = input.data();
      Tensor first({L.height, L.width},
                   std::vector<double>(base, base + plane));
      const double* lastp = base + (L.frames_in - 1) * plane;
      Tensor last({L.height, L.width},
                  std::vector<double>(lastp, lastp + plane));
      const FlowField flow = block_matching_flow(
          first, last, params.block, params.search_radius,
          params.texture_threshold);
      std::array<double, DirectionHistogram::kBins> bins{};
      for (std::size_t i = 0; i < flow.u.size(); ++i) {
        if (flow.valid[i] == 0.0) continue;
        const double speed = std::hypot(flow.u[i], flow.v[i]);
        if (speed < params.min_speed) continue;
        const double deg = angle_deg_of(flow.u[i], flow.v[i]);
        int bin = static_cast<int>(deg / DirectionHistogram::bin_width_deg());
        bin = std::clamp(bin, 0, DirectionHistogram::kBins - 1);
        bins[bin] += speed;
      }
      partial[s] = bins;
    });

    std::array<double, DirectionHistogram::kBins> pooled{};
    for (const auto& bins : partial)
      for (int b = 0; b < DirectionHistogram::kBins; ++b) pooled[b] += bins[b];
    double total = 0.0;
    for (double m : pooled) total += m;
    if (total > 0.0) {
      for (int b = 0; b < DirectionHistogram::kBins; ++b)
        audit.histogram.mass[b] = pooled[b] / total;
    }

    audit.dominant_bins_deg =
        dominant_directions(audit.histogram, params.dominance_fraction);
    for (std::size_t k = 0; k < d4::all.size(); ++k) {
      audit.verdicts[k] = admissible(d4::all[k], audit.histogram,
                                     params.dominance_fraction,
                                     params.max_angle_deg);
    }
    if (region.sequences.empty()) {
      report.warnings.push_back("region " + audit.region +
                                " has no sequences; verdicts are vacuous");
    }
    for (const GeomTransform& member : policy.members) {
      const std::size_t k = static_cast<std::size_t>(
          std::find(d4::all.begin(), d4::all.end(), member) - d4::all.begin());
      if (k < d4::all.size() && !audit.verdicts[k]) {
        report.warnings.push_back("policy member " + to_string(member) +
                                  " is inadmissible for region " + audit.region);
      }
    }
    report.regions.push_back(std::move(audit));
  }
  if (total_sequences == 0)
    report.warnings.push_back("dataset contains no sequences");
  return report;
}

std::string audit_csv(const AuditReport& report) {
  std::ostringstream os;
  for (const std::string& warning : report.warnings)
    os << "# warning: " << warning << '\n';
  os << "region,transform,dominant_bins,verdict\n";
  for (const RegionAudit& audit : report.regions) {
    std::string bins;
    for (std::size_t i = 0; i < audit.dominant_bins_deg.size(); ++i) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.2f", audit.dominant_bins_deg[i]);
      if (i) bins += ';';
      bins += buf;
    }
    for (std::size_t k = 0; k < d4::all.size(); ++k) {
      os << audit.region << ',' << to_string(d4::all[k]) << ',' << bins << ','
         << (audit.verdicts[k] ? "admissible" : "inadmissible") << '\n';
    }
  }
  return os.str();
}

void write_audit_csv(const AuditReport& report, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << audit_csv(report);
}

}  // namespace nowcast
