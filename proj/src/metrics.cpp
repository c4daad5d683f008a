#include "nowcast/metrics.hpp"

#include <fstream>
#include <sstream>

#include "nowcast/error.hpp"
#include "nowcast/parallel.hpp"

namespace nowcast {

std::optional<double> iou(const Tensor& pred_binary, const Tensor& gt_binary) {
  if (!pred_binary.same_shape(gt_binary)) throw ContractError("iou: shape mismatch");
  long long tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < pred_binary.size(); ++i) {
    const double p = pred_binary[i];
    const double g = gt_binary[i];
    if ((p != 0.0 && p != 1.0) || (g != 0.0 && g != 1.0))
      throw ContractError("iou: inputs must be binary");
    if (p == 1.0 && g == 1.0) ++tp;
    else if (p == 1.0) ++fp;
    else if (g == 1.0) ++fn;
  }
  const long long denom = tp + fp + fn;
  if (denom == 0) return std::nullopt;
  return static_cast<double>(tp) / static_cast<double>(denom);
}

namespace {

std::optional<double> lead_iou(const LeadCounts& c) {
  const long long denom = c.tp + c.fp + c.fn;
  if (denom == 0) return std::nullopt;
  return static_cast<double>(c.tp) / static_cast<double>(denom);
}

std::optional<double> mean_of_defined(const std::vector<std::optional<double>>& xs) {
  double acc = 0.0;
  int n = 0;
  for (const auto& x : xs) {
    if (x) {
      acc += *x;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return acc / static_cast<double>(n);
}

}  // namespace

EvalReport evaluate(const ForwardFn& model, const DatasetManifest& manifest,
                    Split split, const std::optional<EnsembleConfig>& ensemble,
                    double prob_threshold, int threads) {
  const GridLayout& L = manifest.layout;
  const std::size_t lead_count = L.frames_out;
  const std::size_t frame_px = L.label_height * L.label_width;

  // Fail early, listing every missing file.
  std::vector<std::string> missing;
  bool any = false;
  for (const RegionEntry& region : manifest.regions) {
    if (region.split != split) continue;
    any = true;
    for (const SequenceRef& ref : region.sequences) {
      if (!std::filesystem::exists(manifest.root / ref.input))
        missing.push_back((manifest.root / ref.input).string());
      if (!std::filesystem::exists(manifest.root / ref.label))
        missing.push_back((manifest.root / ref.label).string());
    }
  }
  if (!any) throw ConfigError("split has no regions: " + to_string(split));
  if (!missing.empty()) {
    std::string msg = "missing dataset files:";
    for (const std::string& m : missing) msg += "\n  " + m;
    throw IoError(msg);
  }

  EvalReport report;
  report.prob_threshold = prob_threshold;
  report.split = to_string(split);

  for (const RegionEntry& region : manifest.regions) {
    if (region.split != split) continue;
    RegionEval eval;
    eval.region = region.spec.region_id;
    eval.leads.resize(lead_count);

    // Per-sequence counts into slots; pooled in sequence order afterwards.
    std::vector<std::vector<LeadCounts>> partial(region.sequences.size());
    parallel_for(region.sequences.size(), threads, [&](std::size_t s) {
      const SequenceRef& ref = region.sequences[s];
      const Tensor input = read_tensor(manifest.root / ref.input);
      const Tensor label = read_tensor(manifest.root / ref.label);
      if (input.shape() != L.input_shape() || label.shape() != L.label_shape())
        throw ShapeError("sequence does not match manifest layout: " + ref.input);
      const Tensor prob = ensemble ? ensemble_predict(model, input, *ensemble)
                                   : sigmoid(model(input));
      if (prob.shape() != L.label_shape())
        throw ShapeError("prediction does not match the label layout");
      std::vector<LeadCounts> counts(lead_count);
      for (std::size_t lead = 0; lead < lead_count; ++lead) {
        LeadCounts& c = counts[lead];
        const double* pp = prob.data() + lead * frame_px;
        const double* gg = label.data() + lead * frame_px;
        for (std::size_t i = 0; i < frame_px; ++i) {
          const bool p = pp[i] >= prob_threshold;
          if (gg[i] != 0.0 && gg[i] != 1.0)
            throw ContractError("labels must be binary: " + ref.label);
          const bool g = gg[i] == 1.0;
          if (p && g) ++c.tp;
          else if (p) ++c.fp;
          else if (g) ++c.fn;
          else ++c.tn;
        }
      }
      partial[s] = std::move(counts);
    });

    for (const auto& counts : partial) {
      for (std::size_t lead = 0; lead < lead_count; ++lead) {
        eval.leads[lead].tp += counts[lead].tp;
        eval.leads[lead].fp += counts[lead].fp;
        eval.leads[lead].fn += counts[lead].fn;
        eval.leads[lead].tn += counts[lead].tn;
      }
    }
    std::vector<std::optional<double>> lead_ious;
    for (LeadCounts& c : eval.leads) {
      c.iou = lead_iou(c);
      lead_ious.push_back(c.iou);
    }
    eval.miou = mean_of_defined(lead_ious);
    report.regions.push_back(std::move(eval));
  }

  std::vector<std::optional<double>> region_mious;
  for (const RegionEval& r : report.regions) region_mious.push_back(r.miou);
  report.overall_miou = mean_of_defined(region_mious);
  return report;
}

Tensor rain_frequency_map(const DatasetManifest& manifest,
                          const std::string& region_id) {
  const RegionEntry* region = manifest.find_region(region_id);
  if (!region) throw ConfigError("unknown region: " + region_id);
  const GridLayout& L = manifest.layout;
  Tensor freq({L.label_height, L.label_width});
  std::size_t frames = 0;
  for (const SequenceRef& ref : region->sequences) {
    const Tensor label = read_tensor(manifest.root / ref.label);
    if (label.shape() != L.label_shape())
      throw ShapeError("label does not match manifest layout: " + ref.label);
    for (std::size_t t = 0; t < L.frames_out; ++t) {
      const double* frame = label.data() + t * freq.size();
      for (std::size_t i = 0; i < freq.size(); ++i) {
        if (frame[i] == 1.0) freq[i] += 1.0;
      }
    }
    frames += L.frames_out;
  }
  if (frames > 0) {
    for (double& v : freq.values()) v /= static_cast<double>(frames);
  }
  return freq;
}

std::string eval_csv(const EvalReport& report) {
  std::ostringstream os;
  os.precision(17);
  os << "region,lead,tp,fp,fn,tn,iou\n";
  for (const RegionEval& r : report.regions) {
    for (std::size_t lead = 0; lead < r.leads.size(); ++lead) {
      const LeadCounts& c = r.leads[lead];
      os << r.region << ',' << lead << ',' << c.tp << ',' << c.fp << ',' << c.fn
         << ',' << c.tn << ',';
      if (c.iou) os << *c.iou;
      os << '\n';
    }
  }
  return os.str();
}

void write_eval_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << eval_csv(report);
}

std::string summary_csv(const std::vector<std::pair<std::string, EvalReport>>& rows) {
  std::ostringstream os;
  os.precision(10);
  os << "method";
  if (!rows.empty()) {
    for (const RegionEval& r : rows.front().second.regions) os << ',' << r.region;
  }
  os << ",miou\n";
  for (const auto& [name, report] : rows) {
    os << name;
    for (const RegionEval& r : report.regions) {
      os << ',';
      if (r.miou) os << *r.miou;
    }
    os << ',';
    if (report.overall_miou) os << *report.overall_miou;
    os << '\n';
  }
  return os.str();
}

}  // namespace nowcast
