#pragma once

#include <string>

#include "nowcast/tensor.hpp"

namespace nowcast {

enum class NormMode { l1, l2 };

// Weights and conventions of the training objective. The spatial and
// temporal terms are evaluated on probabilities; the kernel of the spatial
// term defaults to the 3x3 mean (the literal-sum kernel is selectable).
struct LossConfig {
  double alpha = 0.1;       // weight of the spatial smooth term
  double beta = 0.1;        // weight of the temporal smooth term
  double pos_weight = 4.0;  // positive-class BCE weight
  KernelMode kernel_mode = KernelMode::mean;
  NormMode norm_mode = NormMode::l1;

  void validate() const;
};

struct LossValue {
  double value = 0.0;
  Tensor grad;  // same shape as the differentiated argument
};

struct LossReport {
  double bce = 0.0;
  double spatial = 0.0;
  double temporal = 0.0;
  double total = 0.0;
  Tensor grad_logits;
};

// Positive-weighted binary cross-entropy, mean over all elements, computed
// in the numerically stable logit form. Gradient is with respect to logits.
LossValue bce_loss(const Tensor& logits, const Tensor& labels, const LossConfig& cfg);

// Per frame: distance between the field and its 3x3 neighborhood summary,
// reduced over pixels (l1 = mean absolute, l2 = root-mean-square), then
// averaged over frames. Gradient is with respect to prob and includes the
// adjoint of the box filter.
LossValue spatial_smooth_loss(const Tensor& prob, const LossConfig& cfg);

// Mean over adjacent frame pairs of the per-pair pixel distance
// (l1 = mean absolute, l2 = root-mean-square). Time is the third-from-last
// axis; requires at least two frames.
LossValue temporal_smooth_loss(const Tensor& prob, const LossConfig& cfg);

// total = bce + alpha * spatial + beta * temporal, smooth terms evaluated on
// sigmoid(logits); grad_logits chains through the sigmoid derivative.
LossReport total_loss(const Tensor& logits, const Tensor& labels, const LossConfig& cfg);

std::string loss_csv_header();
std::string loss_csv_row(long step, const LossReport& report);

}  // namespace nowcast
