#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <utility>

#include "nowcast/tensor.hpp"

namespace nowcast {

// The learnable tensors of the reference forecaster. Shapes:
//   conv1_w {F, C*T_in, 3, 3}   conv1_b {F}
//   conv2_w {F, F, 3, 3}        conv2_b {F}
//   head_w  {T_out, F}          head_b  {T_out}
struct ParamSet {
  Tensor conv1_w, conv1_b, conv2_w, conv2_b, head_w, head_b;

  static ParamSet zeros_like(const ParamSet& other);
};

template <class P, class F>
void for_each_param(P& set, F&& fn) {
  fn("conv1_w", set.conv1_w);
  fn("conv1_b", set.conv1_b);
  fn("conv2_w", set.conv2_w);
  fn("conv2_b", set.conv2_b);
  fn("head_w", set.head_w);
  fn("head_b", set.head_b);
}

// A small convolutional stand-in for a full nowcasting architecture:
// channel-time fusion, two 3x3 same-padding convolutions with ReLU,
// inverted dropout, a 1x1 head, and a centered label-window crop.
struct ModelParams {
  GridLayout layout;
  std::size_t features = 8;
  double dropout_rate = 0.4;
  ParamSet w;
};

// Cached activations for one exact backward pass.
struct ForwardTrace {
  bool train = false;
  Tensor x_planes;   // {C*T_in, H, W}
  Tensor z1, a1;     // conv1 pre/post activation, {F, H, W}
  Tensor z2, a2;     // conv2 pre-activation and post relu+dropout, {F, H, W}
  Tensor drop_mask;  // {F, H, W}, values 0 or 1/(1-rate); empty in eval mode
  Tensor head_full;  // {T_out, H, W} pre-crop logits
};

struct ForwardMode {
  bool train = false;
  std::uint64_t dropout_seed = 0;

  static ForwardMode eval() { return {}; }
  static ForwardMode training(std::uint64_t seed) { return {true, seed}; }
};

std::size_t param_count(const ModelParams& params);

// Fan-in-scaled uniform weights, zero biases, fully determined by seed.
ModelParams init_params(const GridLayout& layout, std::size_t features,
                        double dropout_rate, std::uint64_t seed);

// x is {C, T_in, H, W}; logits are {1, T_out, h, w}.
std::pair<Tensor, ForwardTrace> forward(const ModelParams& params, const Tensor& x,
                                        const ForwardMode& mode);
Tensor eval_forward(const ModelParams& params, const Tensor& x);

// Exact gradients of a scalar loss with respect to every parameter, given
// the loss gradient at the logits.
ParamSet backward(const ModelParams& params, const ForwardTrace& trace,
                  const Tensor& grad_logits);

// Checkpoint bundle: one NWT1 file per tensor plus a JSON index carrying the
// layout, feature count and dropout rate.
void save_params(const ModelParams& params, const std::filesystem::path& dir);
ModelParams load_params(const std::filesystem::path& dir);

// Eval-mode prediction interface shared by the ensemble and the metrics.
using ForwardFn = std::function<Tensor(const Tensor&)>;
ForwardFn make_forward_fn(ModelParams params);

}  // namespace nowcast
