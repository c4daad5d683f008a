#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nowcast/forecaster.hpp"
#include "nowcast/synthdata.hpp"
#include "nowcast/tta.hpp"

namespace nowcast {

// TP / (TP + FP + FN); nullopt when the union is empty (no positives in
// either mask). Undefined values are excluded from every mean.
std::optional<double> iou(const Tensor& pred_binary, const Tensor& gt_binary);

struct LeadCounts {
  long long tp = 0, fp = 0, fn = 0, tn = 0;
  std::optional<double> iou;
};

struct RegionEval {
  std::string region;
  std::vector<LeadCounts> leads;            // one entry per lead time
  std::optional<double> miou;               // mean of defined lead IoUs
};

struct EvalReport {
  std::vector<RegionEval> regions;
  std::optional<double> overall_miou;       // mean of defined region mIoUs
  double prob_threshold = 0.5;
  std::string split;
};

// Runs the model (optionally through the geometric-augmentation ensemble)
// over every sequence of the split, binarizes probabilities at
// prob_threshold, and pools per-(region, lead) confusion counts. mIoU
// averages defined IoUs over lead times first, then over regions.
EvalReport evaluate(const ForwardFn& model, const DatasetManifest& manifest,
                    Split split, const std::optional<EnsembleConfig>& ensemble,
                    double prob_threshold = 0.5, int threads = 0);

// Per-pixel fraction of label frames with rain for one region.
Tensor rain_frequency_map(const DatasetManifest& manifest,
                          const std::string& region_id);

// `region,lead,tp,fp,fn,tn,iou` (iou empty when undefined).
std::string eval_csv(const EvalReport& report);
void write_eval_csv(const EvalReport& report, const std::filesystem::path& path);

// Leaderboard-style summary: `method,<region>...,miou`, one row per report.
std::string summary_csv(const std::vector<std::pair<std::string, EvalReport>>& rows);

}  // namespace nowcast
