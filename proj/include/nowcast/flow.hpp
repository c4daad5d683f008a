#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "nowcast/geometry.hpp"
#include "nowcast/tensor.hpp"

namespace nowcast {

struct DatasetManifest;

// Dense per-pixel motion estimate; every pixel of a block carries the
// block's displacement. valid is 1 where the block had enough texture.
struct FlowField {
  Tensor u;      // eastward displacement, px per frame gap
  Tensor v;      // southward displacement
  Tensor valid;  // {0, 1}
};

struct FlowParams {
  int block = 8;
  int search_radius = 4;
  double texture_threshold = 1e-6;  // minimum block intensity variance
  double min_speed = 0.5;           // px; slower pixels are dropped
  double dominance_fraction = 0.5;  // of the maximum bin mass
  double max_angle_deg = 90.0;      // admissibility cone, inclusive
};

// 16 equal angular bins over [0°, 360°); 0° = east, counterclockwise
// (atan2(-v, u)). mass sums to 1 when any pixel contributes.
struct DirectionHistogram {
  static constexpr int kBins = 16;
  std::array<double, kBins> mass{};

  static constexpr double bin_width_deg() { return 360.0 / kBins; }
  static constexpr double bin_center_deg(int b) {
    return (static_cast<double>(b) + 0.5) * bin_width_deg();
  }
  bool empty() const;
};

// Exhaustive integer block matching: per block, the displacement minimizing
// the sum of squared differences in the search window; ties break toward
// the smallest magnitude, then smallest dy, then dx. Out-of-range reads of
// frame_b replicate the edge.
FlowField block_matching_flow(const Tensor& frame_a, const Tensor& frame_b,
                              int block, int search_radius,
                              double texture_threshold = 1e-6);

DirectionHistogram direction_histogram(const FlowField& f, double min_speed);

// Bin centers whose mass is at least dominance_fraction of the maximum.
std::vector<double> dominant_directions(const DirectionHistogram& hist,
                                        double dominance_fraction);

// True iff some dominant direction, pushed through g, stays within
// max_angle of some dominant direction. An all-zero histogram admits
// every transform.
bool admissible(const GeomTransform& g, const DirectionHistogram& hist,
                double dominance_fraction, double max_angle_deg);

struct RegionAudit {
  std::string region;
  std::size_t sequence_count = 0;
  DirectionHistogram histogram;
  std::vector<double> dominant_bins_deg;
  std::array<bool, 8> verdicts{};  // indexed like d4::all
};

struct AuditReport {
  std::vector<RegionAudit> regions;
  std::vector<std::string> warnings;
};

// Pools per-region direction histograms over every sequence (flow between
// the first and last input frame of channel 0) and judges all 8 dihedral
// elements. The policy argument is advisory: members found inadmissible are
// reported as warnings, the verdict table always covers the full group.
AuditReport audit_policy(const DatasetManifest& manifest, const AugPolicy& policy,
                         const FlowParams& params);

// CSV rows `region,transform,dominant_bins,verdict`; warnings are emitted
// as leading `# warning: ...` comment lines.
std::string audit_csv(const AuditReport& report);
void write_audit_csv(const AuditReport& report, const std::filesystem::path& path);

}  // namespace nowcast
