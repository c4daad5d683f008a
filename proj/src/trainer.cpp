#include "nowcast/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "nowcast/error.hpp"
#include "nowcast/geometry.hpp"
#include "nowcast/parallel.hpp"

namespace nowcast {

std::string to_string(AugMode mode) {
  switch (mode) {
    case AugMode::none: return "none";
    case AugMode::paper: return "paper";
    case AugMode::random_d4: return "random_d4";
    case AugMode::inverse: return "inverse";
  }
  throw ContractError("invalid augmentation mode");
}

AugMode parse_aug_mode(std::string_view name) {
  if (name == "none") return AugMode::none;
  if (name == "paper") return AugMode::paper;
  if (name == "random_d4") return AugMode::random_d4;
  if (name == "inverse") return AugMode::inverse;
  throw ConfigError("unknown augmentation mode: " + std::string(name));
}

void TrainConfig::validate() const {
  if (lr <= 0.0) throw ConfigError("lr must be > 0");
  if (!(lr_decay_factor > 0.0 && lr_decay_factor < 1.0))
    throw ConfigError("lr_decay_factor must be in (0, 1)");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  loss.validate();
}

AdamState AdamState::init_like(const ParamSet& params) {
  AdamState st;
  st.m = ParamSet::zeros_like(params);
  st.v = ParamSet::zeros_like(params);
  st.step = 0;
  return st;
}

void adamw_step(ParamSet& params, const ParamSet& grads, AdamState& state,
                double lr, const TrainConfig& cfg) {
  for_each_param(grads, [&](const char* name, const Tensor& g) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i]))
        throw ContractError(std::string("non-finite gradient in ") + name);
    }
  });

  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));

  auto update = [&](Tensor& p, const Tensor& g, Tensor& m, Tensor& v) {
    const double decay = 1.0 - lr * cfg.weight_decay;
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] *= decay;  // decoupled decay, separate from the adaptive step
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  };
  update(params.conv1_w, grads.conv1_w, state.m.conv1_w, state.v.conv1_w);
  update(params.conv1_b, grads.conv1_b, state.m.conv1_b, state.v.conv1_b);
  update(params.conv2_w, grads.conv2_w, state.m.conv2_w, state.v.conv2_w);
  update(params.conv2_b, grads.conv2_b, state.m.conv2_b, state.v.conv2_b);
  update(params.head_w, grads.head_w, state.m.head_w, state.v.head_w);
  update(params.head_b, grads.head_b, state.m.head_b, state.v.head_b);
}

GeomTransform sample_augmentation(AugMode mode, Rng& rng) {
  switch (mode) {
    case AugMode::none:
      return d4::identity;
    case AugMode::paper: {
      const auto& members = paper_policy().members;
      const std::uint64_t k = rng.next_below(members.size() + 1);
      return k < members.size() ? members[k] : d4::identity;
    }
    case AugMode::random_d4:
      return d4::all[rng.next_below(d4::all.size())];
    case AugMode::inverse:
      return rng.next_below(2) == 0 ? d4::identity : d4::rot180;
  }
  throw ContractError("invalid augmentation mode");
}

namespace {

struct Sample {
  Tensor input;
  Tensor label;
};

std::vector<Sample> load_split(const DatasetManifest& data, Split split) {
  std::vector<Sample> samples;
  for (const RegionEntry& region : data.regions) {
    if (region.split != split) continue;
    for (const SequenceRef& ref : region.sequences) {
      Sample s;
      s.input = read_tensor(data.root / ref.input);
      s.label = read_tensor(data.root / ref.label);
      if (s.input.shape() != data.layout.input_shape() ||
          s.label.shape() != data.layout.label_shape())
        throw ConfigError("sequence does not match manifest layout: " + ref.input);
      samples.push_back(std::move(s));
    }
  }
  return samples;
}

void accumulate_scaled(ParamSet& acc, const ParamSet& grads, double scale) {
  auto add = [scale](Tensor& a, const Tensor& g) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += scale * g[i];
  };
  add(acc.conv1_w, grads.conv1_w);
  add(acc.conv1_b, grads.conv1_b);
  add(acc.conv2_w, grads.conv2_w);
  add(acc.conv2_b, grads.conv2_b);
  add(acc.head_w, grads.head_w);
  add(acc.head_b, grads.head_b);
}

}  // namespace

TrainResult train(const ModelParams& init, const DatasetManifest& data,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (init.layout != data.layout)
    throw ConfigError("model layout does not match the dataset layout");
  const std::vector<Sample> train_set = load_split(data, Split::train);
  const std::vector<Sample> val_set = load_split(data, Split::val);
  if (train_set.empty()) throw ConfigError("training split is empty");
  if (val_set.empty()) throw ConfigError("validation split is empty");

  TrainResult result;
  result.params = init;
  AdamState state = AdamState::init_like(init.w);
  double lr = cfg.lr;
  double prev_val = 0.0;
  bool have_prev_val = false;

  struct PerSample {
    GeomTransform aug;
    std::uint64_t dropout_seed;
    ParamSet grads;
    LossReport report;
  };

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    // Deterministic shuffle and augmentation draws, both made up front in
    // sample order; worker threads only run forward/backward.
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng = Rng::stream(cfg.seed, {fnv1a("shuffle"),
                                             static_cast<std::uint64_t>(epoch)});
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = shuffle_rng.next_below(i);
      std::swap(order[i - 1], order[j]);
    }
    Rng aug_rng = Rng::stream(cfg.seed, {fnv1a("augment"),
                                         static_cast<std::uint64_t>(epoch)});
    std::vector<PerSample> plan(train_set.size());
    for (std::size_t k = 0; k < plan.size(); ++k) {
      plan[k].aug = sample_augmentation(cfg.aug, aug_rng);
      plan[k].dropout_seed =
          Rng::stream(cfg.seed, {fnv1a("dropout"),
                                 static_cast<std::uint64_t>(epoch), k})
              .next_u64();
    }

    double sum_bce = 0, sum_spatial = 0, sum_temporal = 0, sum_total = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const std::size_t n = end - start;

      parallel_for(n, cfg.threads, [&](std::size_t b) {
        PerSample& slot = plan[start + b];
        const Sample& sample = train_set[order[start + b]];
        // The same group element acts on input and label; both are spatial
        // fields on the same (centered) grid.
        const Tensor x = apply(slot.aug, sample.input);
        const Tensor y = apply(slot.aug, sample.label);
        auto [logits, trace] =
            forward(result.params, x, ForwardMode::training(slot.dropout_seed));
        slot.report = total_loss(logits, y, cfg.loss);
        slot.grads = backward(result.params, trace, slot.report.grad_logits);
      });

      ParamSet batch_grads = ParamSet::zeros_like(result.params.w);
      const double scale = 1.0 / static_cast<double>(n);
      for (std::size_t b = 0; b < n; ++b) {
        accumulate_scaled(batch_grads, plan[start + b].grads, scale);
        sum_bce += plan[start + b].report.bce;
        sum_spatial += plan[start + b].report.spatial;
        sum_temporal += plan[start + b].report.temporal;
        sum_total += plan[start + b].report.total;
        plan[start + b].grads = ParamSet{};  // release per-sample storage
      }
      adamw_step(result.params.w, batch_grads, state, lr, cfg);
    }

    // Validation total loss, eval mode, no augmentation.
    std::vector<double> val_losses(val_set.size());
    parallel_for(val_set.size(), cfg.threads, [&](std::size_t i) {
      const Tensor logits = eval_forward(result.params, val_set[i].input);
      val_losses[i] = total_loss(logits, val_set[i].label, cfg.loss).total;
    });
    double val_total = 0.0;
    for (double v : val_losses) val_total += v;
    val_total /= static_cast<double>(val_set.size());

    TrainLogRow row;
    row.epoch = epoch;
    const double inv_n = 1.0 / static_cast<double>(train_set.size());
    row.bce = sum_bce * inv_n;
    row.spatial = sum_spatial * inv_n;
    row.temporal = sum_temporal * inv_n;
    row.total = sum_total * inv_n;
    row.val_total = val_total;
    row.lr = lr;
    result.log.rows.push_back(row);

    if (have_prev_val && val_total > prev_val) lr *= cfg.lr_decay_factor;
    prev_val = val_total;
    have_prev_val = true;
  }
  return result;
}

std::string train_log_csv(const TrainLog& log) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,bce,spatial,temporal,total,val_total,lr\n";
  for (const TrainLogRow& r : log.rows) {
    os << r.epoch << ',' << r.bce << ',' << r.spatial << ',' << r.temporal << ','
       << r.total << ',' << r.val_total << ',' << r.lr << '\n';
  }
  return os.str();
}

void write_train_log_csv(const TrainLog& log, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << train_log_csv(log);
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read config: " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("config parse error: " + std::string(e.what()));
  }
  TrainConfig cfg;
  try {
    cfg.lr = j.value("lr", cfg.lr);
    cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.lr_decay_factor = j.value("lr_decay_factor", cfg.lr_decay_factor);
    cfg.beta1 = j.value("beta1", cfg.beta1);
    cfg.beta2 = j.value("beta2", cfg.beta2);
    cfg.eps = j.value("eps", cfg.eps);
    if (j.contains("aug_policy"))
      cfg.aug = parse_aug_mode(j.at("aug_policy").get<std::string>());
    cfg.seed = j.value("seed", cfg.seed);
    cfg.threads = j.value("threads", cfg.threads);
    if (j.contains("loss")) {
      const auto& L = j.at("loss");
      cfg.loss.alpha = L.value("alpha", cfg.loss.alpha);
      cfg.loss.beta = L.value("beta", cfg.loss.beta);
      cfg.loss.pos_weight = L.value("pos_weight", cfg.loss.pos_weight);
      if (L.contains("kernel_mode")) {
        const std::string mode = L.at("kernel_mode").get<std::string>();
        if (mode == "mean") cfg.loss.kernel_mode = KernelMode::mean;
        else if (mode == "sum") cfg.loss.kernel_mode = KernelMode::sum;
        else throw ConfigError("unknown kernel_mode: " + mode);
      }
      if (L.contains("norm_mode")) {
        const std::string mode = L.at("norm_mode").get<std::string>();
        if (mode == "l1") cfg.loss.norm_mode = NormMode::l1;
        else if (mode == "l2") cfg.loss.norm_mode = NormMode::l2;
        else throw ConfigError("unknown norm_mode: " + mode);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("config field error: " + std::string(e.what()));
  }
  return cfg;
}

}  // namespace nowcast
