// Command-line surface: dataset generation, training, evaluation, the
// test-time-ensemble comparison, the augmentation audit, gradient checking,
// the ablation harness and static plot emission.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nowcast/error.hpp"
#include "nowcast/flow.hpp"
#include "nowcast/forecaster.hpp"
#include "nowcast/losses.hpp"
#include "nowcast/metrics.hpp"
#include "nowcast/plots.hpp"
#include "nowcast/rng.hpp"
#include "nowcast/synthdata.hpp"
#include "nowcast/tensor.hpp"
#include "nowcast/trainer.hpp"
#include "nowcast/tta.hpp"

namespace fs = std::filesystem;
using namespace nowcast;

namespace {

// ---------------------------------------------------------------------------
// gen-data

struct GenDataOpts {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
  bool force = false;
  int train_sequences = -1, val_sequences = -1, test_sequences = -1;
};

int run_gen_data(const GenDataOpts& opts) {
  BenchmarkConfig cfg = opts.config.empty() ? default_benchmark_config()
                                            : load_benchmark_config(opts.config);
  if (opts.seed_set) cfg.seed = opts.seed;
  if (opts.train_sequences >= 0) cfg.train_sequences = opts.train_sequences;
  if (opts.val_sequences >= 0) cfg.val_sequences = opts.val_sequences;
  if (opts.test_sequences >= 0) cfg.test_sequences = opts.test_sequences;
  const DatasetManifest manifest =
      build_benchmark(cfg, opts.out, opts.force, opts.threads);
  std::size_t sequences = 0;
  for (const RegionEntry& r : manifest.regions) sequences += r.sequences.size();
  std::cout << "wrote " << sequences << " sequences across "
            << manifest.regions.size() << " regions to " << opts.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainOpts {
  std::string data;
  std::string out;
  std::string config;
  TrainConfig cfg;
  std::string aug = "paper";
  std::size_t features = 8;
  double dropout = 0.4;
  std::string kernel_mode = "mean";
  std::string norm_mode = "l1";
};

TrainConfig merge_train_flags(const TrainOpts& opts, const CLI::App* cmd) {
  TrainConfig cfg =
      opts.config.empty() ? TrainConfig{} : load_train_config(opts.config);
  auto overridden = [&](const std::string& flag) {
    return cmd->count(flag) > 0;
  };
  if (overridden("--aug")) cfg.aug = parse_aug_mode(opts.aug);
  else if (opts.config.empty()) cfg.aug = parse_aug_mode(opts.aug);
  if (overridden("--alpha")) cfg.loss.alpha = opts.cfg.loss.alpha;
  if (overridden("--beta")) cfg.loss.beta = opts.cfg.loss.beta;
  if (overridden("--pos-weight")) cfg.loss.pos_weight = opts.cfg.loss.pos_weight;
  if (overridden("--lr")) cfg.lr = opts.cfg.lr;
  if (overridden("--weight-decay")) cfg.weight_decay = opts.cfg.weight_decay;
  if (overridden("--batch-size")) cfg.batch_size = opts.cfg.batch_size;
  if (overridden("--epochs")) cfg.epochs = opts.cfg.epochs;
  if (overridden("--seed")) cfg.seed = opts.cfg.seed;
  if (overridden("--threads")) cfg.threads = opts.cfg.threads;
  if (overridden("--kernel-mode")) {
    cfg.loss.kernel_mode =
        opts.kernel_mode == "sum" ? KernelMode::sum : KernelMode::mean;
  }
  if (overridden("--norm-mode")) {
    cfg.loss.norm_mode = opts.norm_mode == "l2" ? NormMode::l2 : NormMode::l1;
  }
  return cfg;
}

int run_train(const TrainOpts& opts, const CLI::App* cmd) {
  const DatasetManifest manifest = load_manifest(opts.data);
  const TrainConfig cfg = merge_train_flags(opts, cmd);
  const ModelParams init =
      init_params(manifest.layout, opts.features, opts.dropout, cfg.seed);
  const TrainResult result = train(init, manifest, cfg);
  fs::create_directories(opts.out);
  save_params(result.params, fs::path(opts.out) / "checkpoint");
  write_train_log_csv(result.log, fs::path(opts.out) / "trainlog.csv");
  if (!result.log.rows.empty()) {
    const TrainLogRow& last = result.log.rows.back();
    std::cout << "epoch " << last.epoch << ": train total " << last.total
              << ", val total " << last.val_total << ", lr " << last.lr << "\n";
  }
  std::cout << "checkpoint written to " << (fs::path(opts.out) / "checkpoint")
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval / tta-compare

struct EvalOpts {
  std::string data;
  std::string model;
  std::string out;
  std::string split = "test";
  std::string ensemble = "identity";
  double prob_threshold = 0.5;
  int threads = 0;
};

int run_eval(const EvalOpts& opts) {
  const DatasetManifest manifest = load_manifest(opts.data);
  const ModelParams params = load_params(fs::path(opts.model));
  const ForwardFn fn = make_forward_fn(params);
  const EnsembleConfig ensemble = ensemble_preset(opts.ensemble);
  const EvalReport report =
      evaluate(fn, manifest, parse_split(opts.split),
               std::optional<EnsembleConfig>(ensemble), opts.prob_threshold,
               opts.threads);
  fs::create_directories(opts.out);
  write_eval_csv(report, fs::path(opts.out) / "eval.csv");
  write_text_file(summary_csv({{opts.ensemble, report}}),
                  fs::path(opts.out) / "summary.csv");
  if (report.overall_miou)
    std::cout << "overall mIoU (" << opts.split << ", " << opts.ensemble
              << "): " << 100.0 * *report.overall_miou << "\n";
  else
    std::cout << "overall mIoU undefined (no positives in any region)\n";
  return 0;
}

int run_tta_compare(const EvalOpts& opts) {
  const DatasetManifest manifest = load_manifest(opts.data);
  const ModelParams params = load_params(fs::path(opts.model));
  const ForwardFn fn = make_forward_fn(params);
  std::vector<std::pair<std::string, EvalReport>> rows;
  for (const char* preset : {"identity", "paper_main", "paper_full"}) {
    rows.emplace_back(
        preset, evaluate(fn, manifest, parse_split(opts.split),
                         std::optional<EnsembleConfig>(ensemble_preset(preset)),
                         opts.prob_threshold, opts.threads));
    const auto& miou = rows.back().second.overall_miou;
    std::cout << preset << ": mIoU "
              << (miou ? std::to_string(100.0 * *miou) : "undefined") << "\n";
  }
  fs::create_directories(opts.out);
  write_text_file(summary_csv(rows), fs::path(opts.out) / "tta_compare.csv");
  return 0;
}

// ---------------------------------------------------------------------------
// audit-aug

struct AuditOpts {
  std::string data;
  std::string out;
};

int run_audit(const AuditOpts& opts) {
  const DatasetManifest manifest = load_manifest(opts.data);
  const AuditReport report =
      audit_policy(manifest, paper_policy(), FlowParams{});
  fs::create_directories(opts.out);
  write_audit_csv(report, fs::path(opts.out) / "audit.csv");
  for (const std::string& warning : report.warnings)
    std::cerr << "warning: " << warning << "\n";
  std::cout << audit_csv(report);
  return 0;
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradcheckOpts {
  int seeds = 20;
  double step = 1e-5;
  double tolerance = 1e-4;
};

double rel_err(double analytic, double numeric) {
  const double scale = std::max({1e-6, std::abs(analytic), std::abs(numeric)});
  return std::abs(analytic - numeric) / scale;
}

template <class F>
double fd_max_rel_err(Tensor& x, const Tensor& analytic_grad, double step, F&& f) {
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + step;
    const double up = f();
    x[i] = keep - step;
    const double down = f();
    x[i] = keep;
    worst = std::max(worst, rel_err(analytic_grad[i], (up - down) / (2.0 * step)));
  }
  return worst;
}

int run_gradcheck(const GradcheckOpts& opts) {
  LossConfig loss_cfg;  // paper defaults: alpha=beta=0.1, pos_weight=4
  const std::vector<std::size_t> shape = {1, 2, 5, 5};
  double worst_bce = 0, worst_spatial = 0, worst_temporal = 0, worst_total = 0;

  for (int s = 0; s < opts.seeds; ++s) {
    Rng rng = Rng::stream(0xC0FFEE, {static_cast<std::uint64_t>(s)});
    Tensor logits(shape);
    Tensor labels(shape);
    Tensor prob(shape);
    for (std::size_t i = 0; i < logits.size(); ++i) {
      logits[i] = rng.uniform(-3.0, 3.0);
      labels[i] = rng.next_below(2) ? 1.0 : 0.0;
      prob[i] = rng.uniform(0.05, 0.95);
    }

    const LossValue bce = bce_loss(logits, labels, loss_cfg);
    worst_bce = std::max(
        worst_bce, fd_max_rel_err(logits, bce.grad, opts.step, [&] {
          return bce_loss(logits, labels, loss_cfg).value;
        }));

    const LossValue spatial = spatial_smooth_loss(prob, loss_cfg);
    worst_spatial = std::max(
        worst_spatial, fd_max_rel_err(prob, spatial.grad, opts.step, [&] {
          return spatial_smooth_loss(prob, loss_cfg).value;
        }));

    const LossValue temporal = temporal_smooth_loss(prob, loss_cfg);
    worst_temporal = std::max(
        worst_temporal, fd_max_rel_err(prob, temporal.grad, opts.step, [&] {
          return temporal_smooth_loss(prob, loss_cfg).value;
        }));

    const LossReport total = total_loss(logits, labels, loss_cfg);
    worst_total = std::max(
        worst_total, fd_max_rel_err(logits, total.grad_logits, opts.step, [&] {
          return total_loss(logits, labels, loss_cfg).total;
        }));
  }

  // End-to-end model check on the micro configuration, eval mode.
  GridLayout micro;
  micro.channels = 2;
  micro.frames_in = 2;
  micro.frames_out = 2;
  micro.height = micro.width = 8;
  micro.label_height = micro.label_width = 4;
  ModelParams params = init_params(micro, 4, 0.0, 11);
  Rng rng = Rng::stream(0xC0FFEE, {fnv1a("end2end")});
  Tensor x(micro.input_shape());
  Tensor y(micro.label_shape());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1.0, 1.0);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = rng.next_below(2) ? 1.0 : 0.0;

  auto model_loss = [&]() {
    return total_loss(eval_forward(params, x), y, loss_cfg).total;
  };
  auto [logits, trace] = forward(params, x, ForwardMode::eval());
  const LossReport report = total_loss(logits, y, loss_cfg);
  const ParamSet analytic = backward(params, trace, report.grad_logits);
  double worst_model = 0.0;
  for_each_param(params.w, [&](const char* name, Tensor& p) {
    const Tensor* g = nullptr;
    for_each_param(analytic, [&](const char* gname, const Tensor& gt) {
      if (std::string_view(gname) == name) g = &gt;
    });
    worst_model =
        std::max(worst_model, fd_max_rel_err(p, *g, opts.step, model_loss));
  });

  std::printf("bce       max rel err %.3e\n", worst_bce);
  std::printf("spatial   max rel err %.3e\n", worst_spatial);
  std::printf("temporal  max rel err %.3e\n", worst_temporal);
  std::printf("total     max rel err %.3e\n", worst_total);
  std::printf("model     max rel err %.3e\n", worst_model);
  const bool ok = worst_bce <= opts.tolerance && worst_spatial <= opts.tolerance &&
                  worst_temporal <= opts.tolerance &&
                  worst_total <= opts.tolerance && worst_model <= opts.tolerance;
  std::printf("%s (tolerance %.1e)\n", ok ? "PASS" : "FAIL", opts.tolerance);
  return ok ? 0 : 1;
}

// ---------------------------------------------------------------------------
// ablate

struct AblateOpts {
  std::string data;
  std::string out;
  int seeds = 3;
  std::uint64_t base_seed = 1;
  int epochs = 15;
  int threads = 0;
  std::size_t features = 8;
};

struct AblationCell {
  std::string label;
  bool stl = false;
  AugMode ap = AugMode::none;
  std::string gae = "identity";
  double paper_gain = std::numeric_limits<double>::quiet_NaN();
};

// The four component rows plus the two policy-study rows.
std::vector<AblationCell> default_ablation_plan() {
  return {
      {"baseline", false, AugMode::none, "identity", 0.0},
      {"+STL", true, AugMode::none, "identity", 0.8},
      {"+STL+AP", true, AugMode::paper, "identity", 2.0},
      {"+STL+AP+GAE", true, AugMode::paper, "paper_main", 2.9},
      {"random", true, AugMode::random_d4, "identity",
       std::numeric_limits<double>::quiet_NaN()},
      {"inverse", true, AugMode::inverse, "identity",
       std::numeric_limits<double>::quiet_NaN()},
  };
}

int run_ablate(const AblateOpts& opts) {
  const DatasetManifest manifest = load_manifest(opts.data);
  const std::vector<AblationCell> plan = default_ablation_plan();
  fs::create_directories(opts.out);

  std::ofstream runs(fs::path(opts.out) / "ablation_runs.csv", std::ios::trunc);
  if (!runs) throw IoError("cannot write ablation_runs.csv");
  runs << "stl,ap,gae,seed,miou\n" << std::flush;

  // Cells that share (stl, ap, seed) reuse the trained model; the ensemble
  // only changes evaluation.
  std::map<std::string, ModelParams> trained;
  std::map<std::string, std::vector<double>> cell_scores;

  for (const AblationCell& cell : plan) {
    for (int s = 0; s < opts.seeds; ++s) {
      const std::uint64_t seed = opts.base_seed + static_cast<std::uint64_t>(s);
      const std::string train_key =
          std::string(cell.stl ? "stl" : "nostl") + "/" + to_string(cell.ap) +
          "/" + std::to_string(seed);
      auto it = trained.find(train_key);
      if (it == trained.end()) {
        TrainConfig cfg;
        cfg.epochs = opts.epochs;
        cfg.aug = cell.ap;
        cfg.threads = opts.threads;
        cfg.seed = seed;
        if (!cell.stl) {
          cfg.loss.alpha = 0.0;
          cfg.loss.beta = 0.0;
        }
        const ModelParams init =
            init_params(manifest.layout, opts.features, 0.4, seed);
        it = trained.emplace(train_key, train(init, manifest, cfg).params).first;
      }
      const ForwardFn fn = make_forward_fn(it->second);
      const EvalReport report = evaluate(
          fn, manifest, Split::test,
          std::optional<EnsembleConfig>(ensemble_preset(cell.gae)), 0.5,
          opts.threads);
      const double miou = report.overall_miou ? 100.0 * *report.overall_miou : 0.0;
      cell_scores[cell.label].push_back(miou);
      runs << (cell.stl ? "on" : "off") << ',' << to_string(cell.ap) << ','
           << cell.gae << ',' << seed << ',' << miou << "\n"
           << std::flush;
      std::cout << cell.label << " seed " << seed << ": mIoU " << miou << "\n";
    }
  }

  std::ostringstream summary;
  summary.precision(10);
  summary << "label,stl,ap,gae,mean_miou,spread,gain,paper_gain\n";
  const std::vector<double>& base = cell_scores.at("baseline");
  const double base_mean =
      std::accumulate(base.begin(), base.end(), 0.0) / base.size();
  for (const AblationCell& cell : plan) {
    const std::vector<double>& xs = cell_scores.at(cell.label);
    const double mean =
        std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    const double spread = xs.size() > 1 ? std::sqrt(var / (xs.size() - 1)) : 0.0;
    summary << cell.label << ',' << (cell.stl ? "on" : "off") << ','
            << to_string(cell.ap) << ',' << cell.gae << ',' << mean << ','
            << spread << ',' << mean - base_mean << ',';
    if (!std::isnan(cell.paper_gain)) summary << cell.paper_gain;
    summary << '\n';
  }
  write_text_file(summary.str(), fs::path(opts.out) / "ablation_summary.csv");
  std::cout << summary.str();
  return 0;
}

// ---------------------------------------------------------------------------
// plot

struct PlotOpts {
  std::string kind;
  std::string input;
  std::string labels;
  std::string frame_a, frame_b;
  std::string data;
  std::string region;
  std::string out;
  int frame = 0;
};

Tensor extract_frame(const Tensor& t, int frame) {
  if (t.rank() < 2) throw ShapeError("tensor has no spatial plane");
  const std::size_t h = t.height(), w = t.width();
  const std::size_t planes = t.plane_count();
  if (frame < 0 || static_cast<std::size_t>(frame) >= planes)
    throw ConfigError("frame index out of range");
  const double* base = t.data() + static_cast<std::size_t>(frame) * h * w;
  return Tensor({h, w}, std::vector<double>(base, base + h * w));
}

int run_plot(const PlotOpts& opts) {
  if (opts.kind == "prob") {
    const Tensor prob = read_tensor(opts.input);
    const Tensor frame = extract_frame(prob, opts.frame);
    std::optional<Tensor> label;
    if (!opts.labels.empty())
      label = extract_frame(read_tensor(opts.labels), opts.frame);
    write_text_file(render_prob_ppm(frame, label ? &*label : nullptr), opts.out);
  } else if (opts.kind == "flow") {
    const Tensor a = read_tensor(opts.frame_a);
    const Tensor b = read_tensor(opts.frame_b);
    const FlowParams params;
    const FlowField flow = block_matching_flow(a, b, params.block,
                                               params.search_radius,
                                               params.texture_threshold);
    write_text_file(render_flow_svg(flow, params.block), opts.out);
  } else if (opts.kind == "freq") {
    const DatasetManifest manifest = load_manifest(opts.data);
    write_text_file(render_frequency_ppm(rain_frequency_map(manifest, opts.region)),
                    opts.out);
  } else {
    throw ConfigError("unknown plot kind: " + opts.kind);
  }
  std::cout << "wrote " << opts.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Training-strategy toolkit for shift-robust precipitation "
               "nowcasting on a synthetic advective-rain benchmark"};
  app.require_subcommand(1);
  int rc = 0;

  GenDataOpts gen_opts;
  CLI::App* gen = app.add_subcommand(
      "gen-data", "Generate the synthetic benchmark dataset");
  gen->add_option("--config", gen_opts.config, "Benchmark config JSON");
  gen->add_option("--out", gen_opts.out, "Output directory")->required();
  gen->add_option("--seed", gen_opts.seed, "Dataset seed")
      ->each([&](const std::string&) { gen_opts.seed_set = true; });
  gen->add_option("--threads", gen_opts.threads, "Worker threads (0 = auto)");
  gen->add_flag("--force", gen_opts.force, "Overwrite an existing dataset");
  gen->add_option("--train-sequences", gen_opts.train_sequences,
                  "Sequences per train region");
  gen->add_option("--val-sequences", gen_opts.val_sequences,
                  "Sequences per validation region");
  gen->add_option("--test-sequences", gen_opts.test_sequences,
                  "Sequences per test region");
  gen->callback([&] { rc = run_gen_data(gen_opts); });

  TrainOpts train_opts;
  CLI::App* tr = app.add_subcommand("train", "Train the reference forecaster");
  tr->add_option("--data", train_opts.data, "Dataset manifest or directory")
      ->required();
  tr->add_option("--out", train_opts.out, "Output directory")->required();
  tr->add_option("--config", train_opts.config, "Train config JSON");
  tr->add_option("--aug", train_opts.aug,
                 "Augmentation policy: none|paper|random_d4|inverse");
  tr->add_option("--alpha", train_opts.cfg.loss.alpha, "Spatial loss weight");
  tr->add_option("--beta", train_opts.cfg.loss.beta, "Temporal loss weight");
  tr->add_option("--pos-weight", train_opts.cfg.loss.pos_weight,
                 "BCE positive-class weight");
  tr->add_option("--lr", train_opts.cfg.lr, "Initial learning rate");
  tr->add_option("--weight-decay", train_opts.cfg.weight_decay, "AdamW decay");
  tr->add_option("--batch-size", train_opts.cfg.batch_size, "Batch size");
  tr->add_option("--epochs", train_opts.cfg.epochs, "Training epochs");
  tr->add_option("--seed", train_opts.cfg.seed, "Training seed");
  tr->add_option("--threads", train_opts.cfg.threads, "Worker threads");
  tr->add_option("--features", train_opts.features, "Hidden feature planes");
  tr->add_option("--dropout", train_opts.dropout, "Dropout rate");
  tr->add_option("--kernel-mode", train_opts.kernel_mode,
                 "Spatial kernel: mean|sum");
  tr->add_option("--norm-mode", train_opts.norm_mode, "Smooth norm: l1|l2");
  tr->callback([&] { rc = run_train(train_opts, tr); });

  EvalOpts eval_opts;
  CLI::App* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  ev->add_option("--data", eval_opts.data, "Dataset manifest or directory")
      ->required();
  ev->add_option("--model", eval_opts.model, "Checkpoint directory")->required();
  ev->add_option("--out", eval_opts.out, "Output directory")->required();
  ev->add_option("--split", eval_opts.split, "Split: train|val|test");
  ev->add_option("--ensemble", eval_opts.ensemble,
                 "Ensemble preset: identity|paper_main|paper_full");
  ev->add_option("--prob-threshold", eval_opts.prob_threshold,
                 "Probability binarization threshold");
  ev->add_option("--threads", eval_opts.threads, "Worker threads");
  ev->callback([&] { rc = run_eval(eval_opts); });

  EvalOpts tta_opts;
  CLI::App* tta = app.add_subcommand(
      "tta-compare", "Evaluate every ensemble preset side by side");
  tta->add_option("--data", tta_opts.data, "Dataset manifest or directory")
      ->required();
  tta->add_option("--model", tta_opts.model, "Checkpoint directory")->required();
  tta->add_option("--out", tta_opts.out, "Output directory")->required();
  tta->add_option("--split", tta_opts.split, "Split: train|val|test");
  tta->add_option("--prob-threshold", tta_opts.prob_threshold,
                  "Probability binarization threshold");
  tta->add_option("--threads", tta_opts.threads, "Worker threads");
  tta->callback([&] { rc = run_tta_compare(tta_opts); });

  AuditOpts audit_opts;
  CLI::App* audit = app.add_subcommand(
      "audit-aug", "Audit transform admissibility against dataset motion");
  audit->add_option("--data", audit_opts.data, "Dataset manifest or directory")
      ->required();
  audit->add_option("--out", audit_opts.out, "Output directory")->required();
  audit->callback([&] { rc = run_audit(audit_opts); });

  GradcheckOpts grad_opts;
  CLI::App* grad = app.add_subcommand(
      "gradcheck", "Check analytic gradients against finite differences");
  grad->add_option("--seeds", grad_opts.seeds, "Number of random instances");
  grad->add_option("--step", grad_opts.step, "Finite-difference step");
  grad->add_option("--tolerance", grad_opts.tolerance, "Max relative error");
  grad->callback([&] { rc = run_gradcheck(grad_opts); });

  AblateOpts ablate_opts;
  CLI::App* ablate = app.add_subcommand(
      "ablate", "Run the component and policy ablation grid");
  ablate->add_option("--data", ablate_opts.data, "Dataset manifest or directory")
      ->required();
  ablate->add_option("--out", ablate_opts.out, "Output directory")->required();
  ablate->add_option("--seeds", ablate_opts.seeds, "Seeds per cell");
  ablate->add_option("--seed", ablate_opts.base_seed, "Base seed");
  ablate->add_option("--epochs", ablate_opts.epochs, "Epochs per run");
  ablate->add_option("--threads", ablate_opts.threads, "Worker threads");
  ablate->add_option("--features", ablate_opts.features, "Hidden feature planes");
  ablate->callback([&] { rc = run_ablate(ablate_opts); });

  PlotOpts plot_opts;
  CLI::App* plot = app.add_subcommand("plot", "Emit static PPM/SVG figures");
  plot->add_option("--kind", plot_opts.kind, "prob|flow|freq")->required();
  plot->add_option("--input", plot_opts.input, "Probability tensor (NWT1)");
  plot->add_option("--labels", plot_opts.labels, "Label tensor (NWT1)");
  plot->add_option("--frame", plot_opts.frame, "Frame index");
  plot->add_option("--a", plot_opts.frame_a, "First frame (NWT1, rank 2)");
  plot->add_option("--b", plot_opts.frame_b, "Second frame (NWT1, rank 2)");
  plot->add_option("--data", plot_opts.data, "Dataset manifest or directory");
  plot->add_option("--region", plot_opts.region, "Region id");
  plot->add_option("--out", plot_opts.out, "Output file")->required();
  plot->callback([&] { rc = run_plot(plot_opts); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    std::cerr << app.help() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}
