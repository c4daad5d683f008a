#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nowcast/forecaster.hpp"
#include "nowcast/losses.hpp"
#include "nowcast/rng.hpp"
#include "nowcast/synthdata.hpp"

namespace nowcast {

enum class AugMode { none, paper, random_d4, inverse };
std::string to_string(AugMode mode);
AugMode parse_aug_mode(std::string_view name);

struct TrainConfig {
  double lr = 1e-4;
  double weight_decay = 0.1;
  int batch_size = 16;
  int epochs = 15;  // desk-scale default; the full recipe uses 90
  double lr_decay_factor = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  AugMode aug = AugMode::paper;
  LossConfig loss;
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = hardware concurrency

  void validate() const;
};

// Decoupled-weight-decay Adam. The decay multiplies parameters by
// (1 - lr * wd) separately from the bias-corrected adaptive step.
struct AdamState {
  ParamSet m, v;
  long step = 0;

  static AdamState init_like(const ParamSet& params);
};

void adamw_step(ParamSet& params, const ParamSet& grads, AdamState& state,
                double lr, const TrainConfig& cfg);

// `paper`: uniform over the five-member policy plus identity; `random_d4`:
// uniform over all 8; `inverse`: uniform over {identity, rot180};
// `none`: identity.
GeomTransform sample_augmentation(AugMode mode, Rng& rng);

struct TrainLogRow {
  int epoch = 0;  // 1-based
  double bce = 0, spatial = 0, temporal = 0, total = 0;
  double val_total = 0;
  double lr = 0;  // learning rate used during this epoch
};

struct TrainLog {
  std::vector<TrainLogRow> rows;
};

std::string train_log_csv(const TrainLog& log);
void write_train_log_csv(const TrainLog& log, const std::filesystem::path& path);

struct TrainResult {
  ModelParams params;
  TrainLog log;
};

// One optimizer step per batch: per sample a transform is drawn and applied
// jointly to input and label, the loss gradient is backpropagated, and
// per-sample gradients are averaged in sample order (thread count never
// changes the result). After each epoch the validation total loss is
// compared with the previous epoch's; on an increase the learning rate is
// multiplied by lr_decay_factor.
TrainResult train(const ModelParams& init, const DatasetManifest& data,
                  const TrainConfig& cfg);

// JSON mirroring TrainConfig field names; absent fields keep their defaults.
TrainConfig load_train_config(const std::filesystem::path& path);

}  // namespace nowcast
