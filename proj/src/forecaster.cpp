#include "nowcast/forecaster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>

#include <json.hpp>

#include "nowcast/error.hpp"
#include "nowcast/rng.hpp"

namespace nowcast {

namespace {

// 3x3 same convolution with zero padding, written as nine shifted
// accumulation passes per (out, in) channel pair so the inner loop stays
// a contiguous fused multiply-add.
void conv3x3_forward(const double* in, std::size_t cin, const double* w,
                     const double* b, double* out, std::size_t cout,
                     std::size_t h, std::size_t wd) {
  const std::ptrdiff_t hh = static_cast<std::ptrdiff_t>(h);
  const std::ptrdiff_t ww = static_cast<std::ptrdiff_t>(wd);
  for (std::size_t f = 0; f < cout; ++f) {
    double* dst = out + f * h * wd;
    std::fill(dst, dst + h * wd, b[f]);
    for (std::size_t c = 0; c < cin; ++c) {
      const double* src = in + c * h * wd;
      for (int ti = 0; ti < 3; ++ti) {
        const std::ptrdiff_t di = ti - 1;
        const std::ptrdiff_t i0 = std::max<std::ptrdiff_t>(0, -di);
        const std::ptrdiff_t i1 = std::min<std::ptrdiff_t>(hh, hh - di);
        for (int tj = 0; tj < 3; ++tj) {
          const std::ptrdiff_t dj = tj - 1;
          const std::ptrdiff_t j0 = std::max<std::ptrdiff_t>(0, -dj);
          const std::ptrdiff_t j1 = std::min<std::ptrdiff_t>(ww, ww - dj);
          const double wt = w[((f * cin + c) * 3 + ti) * 3 + tj];
          if (wt == 0.0) continue;
          for (std::ptrdiff_t i = i0; i < i1; ++i) {
            const double* s = src + (i + di) * ww + dj;
            double* d = dst + i * ww;
            for (std::ptrdiff_t j = j0; j < j1; ++j) d[j] += wt * s[j];
          }
        }
      }
    }
  }
}

void conv3x3_backward_weights(const double* in, std::size_t cin,
                              const double* gout, std::size_t cout, double* gw,
                              double* gb, std::size_t h, std::size_t wd) {
  const std::ptrdiff_t hh = static_cast<std::ptrdiff_t>(h);
  const std::ptrdiff_t ww = static_cast<std::ptrdiff_t>(wd);
  for (std::size_t f = 0; f < cout; ++f) {
    const double* g = gout + f * h * wd;
    double bias_acc = 0.0;
    for (std::size_t i = 0; i < h * wd; ++i) bias_acc += g[i];
    gb[f] += bias_acc;
    for (std::size_t c = 0; c < cin; ++c) {
      const double* src = in + c * h * wd;
      for (int ti = 0; ti < 3; ++ti) {
        const std::ptrdiff_t di = ti - 1;
        const std::ptrdiff_t i0 = std::max<std::ptrdiff_t>(0, -di);
        const std::ptrdiff_t i1 = std::min<std::ptrdiff_t>(hh, hh - di);
        for (int tj = 0; tj < 3; ++tj) {
          const std::ptrdiff_t dj = tj - 1;
          const std::ptrdiff_t j0 = std::max<std::ptrdiff_t>(0, -dj);
          const std::ptrdiff_t j1 = std::min<std::ptrdiff_t>(ww, ww - dj);
          double acc = 0.0;
          for (std::ptrdiff_t i = i0; i < i1; ++i) {
            const double* s = src + (i + di) * ww + dj;
            const double* gr = g + i * ww;
            for (std::ptrdiff_t j = j0; j < j1; ++j) acc += gr[j] * s[j];
          }
          gw[((f * cin + c) * 3 + ti) * 3 + tj] += acc;
        }
      }
    }
  }
}

void conv3x3_backward_input(const double* w, std::size_t cin, const double* gout,
                            std::size_t cout, double* gin, std::size_t h,
                            std::size_t wd) {
  const std::ptrdiff_t hh = static_cast<std::ptrdiff_t>(h);
  const std::ptrdiff_t ww = static_cast<std::ptrdiff_t>(wd);
  for (std::size_t f = 0; f < cout; ++f) {
    const double* g = gout + f * h * wd;
    for (std::size_t c = 0; c < cin; ++c) {
      double* dst = gin + c * h * wd;
      for (int ti = 0; ti < 3; ++ti) {
        const std::ptrdiff_t di = ti - 1;
        const std::ptrdiff_t i0 = std::max<std::ptrdiff_t>(0, -di);
        const std::ptrdiff_t i1 = std::min<std::ptrdiff_t>(hh, hh - di);
        for (int tj = 0; tj < 3; ++tj) {
          const std::ptrdiff_t dj = tj - 1;
          const std::ptrdiff_t j0 = std::max<std::ptrdiff_t>(0, -dj);
          const std::ptrdiff_t j1 = std::min<std::ptrdiff_t>(ww, ww - dj);
          const double wt = w[((f * cin + c) * 3 + ti) * 3 + tj];
          if (wt == 0.0) continue;
          for (std::ptrdiff_t i = i0; i < i1; ++i) {
            double* d = dst + (i + di) * ww + dj;
            const double* gr = g + i * ww;
            for (std::ptrdiff_t j = j0; j < j1; ++j) d[j] += wt * gr[j];
          }
        }
      }
    }
  }
}

void check_layout_input(const ModelParams& params, const Tensor& x) {
  const GridLayout& L = params.layout;
  if (x.shape() != L.input_shape())
    throw ShapeError("forward: input does not match the configured layout");
}

}  // namespace

ParamSet ParamSet::zeros_like(const ParamSet& other) {
  ParamSet z;
  z.conv1_w = Tensor(std::vector<std::size_t>(other.conv1_w.shape()));
  z.conv1_b = Tensor(std::vector<std::size_t>(other.conv1_b.shape()));
  z.conv2_w = Tensor(std::vector<std::size_t>(other.conv2_w.shape()));
  z.conv2_b = Tensor(std::vector<std::size_t>(other.conv2_b.shape()));
  z.head_w = Tensor(std::vector<std::size_t>(other.head_w.shape()));
  z.head_b = Tensor(std::vector<std::size_t>(other.head_b.shape()));
  return z;
}

std::size_t param_count(const ModelParams& params) {
  std::size_t n = 0;
  for_each_param(params.w, [&](const char*, const Tensor& t) { n += t.size(); });
  return n;
}

ModelParams init_params(const GridLayout& layout, std::size_t features,
                        double dropout_rate, std::uint64_t seed) {
  layout.validate();
  if (features < 1) throw ConfigError("init_params: features must be >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw ConfigError("init_params: dropout_rate must be in [0, 1)");

  const std::size_t cin = layout.channels * layout.frames_in;
  ModelParams p;
  p.layout = layout;
  p.features = features;
  p.dropout_rate = dropout_rate;
  p.w.conv1_w = Tensor({features, cin, 3, 3});
  p.w.conv1_b = Tensor({features});
  p.w.conv2_w = Tensor({features, features, 3, 3});
  p.w.conv2_b = Tensor({features});
  p.w.head_w = Tensor({layout.frames_out, features});
  p.w.head_b = Tensor({layout.frames_out});

  Rng rng = Rng::stream(seed, {fnv1a("init_params")});
  auto fill_uniform = [&](Tensor& t, double fan_in) {
    const double limit = std::sqrt(6.0 / fan_in);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-limit, limit);
  };
  fill_uniform(p.w.conv1_w, 9.0 * static_cast<double>(cin));
  fill_uniform(p.w.conv2_w, 9.0 * static_cast<double>(features));
  fill_uniform(p.w.head_w, static_cast<double>(features));
  return p;
}

std::pair<Tensor, ForwardTrace> forward(const ModelParams& params, const Tensor& x,
                                        const ForwardMode& mode) {
  check_layout_input(params, x);
  const GridLayout& L = params.layout;
  const std::size_t cin = L.channels * L.frames_in;
  const std::size_t F = params.features;
  const std::size_t H = L.height, W = L.width;

  ForwardTrace trace;
  trace.train = mode.train;
  // Channel and time axes fuse into C*T_in input planes; the storage order
  // is already (c, t, i, j) row-major, so this is a reshape.
  trace.x_planes = Tensor({cin, H, W}, std::vector<double>(x.values()));

  trace.z1 = Tensor({F, H, W});
  conv3x3_forward(trace.x_planes.data(), cin, params.w.conv1_w.data(),
                  params.w.conv1_b.data(), trace.z1.data(), F, H, W);
  trace.a1 = trace.z1;
  for (double& v : trace.a1.values()) v = std::max(v, 0.0);

  trace.z2 = Tensor({F, H, W});
  conv3x3_forward(trace.a1.data(), F, params.w.conv2_w.data(),
                  params.w.conv2_b.data(), trace.z2.data(), F, H, W);
  trace.a2 = trace.z2;
  for (double& v : trace.a2.values()) v = std::max(v, 0.0);

  if (mode.train) {
    if (!(params.dropout_rate >= 0.0 && params.dropout_rate < 1.0))
      throw ConfigError("dropout_rate must be in [0, 1)");
    trace.drop_mask = Tensor({F, H, W});
    const double keep_scale = 1.0 / (1.0 - params.dropout_rate);
    Rng rng = Rng::stream(mode.dropout_seed, {fnv1a("dropout")});
    for (std::size_t i = 0; i < trace.drop_mask.size(); ++i) {
      const double u = rng.next_double();
      trace.drop_mask[i] = u >= params.dropout_rate ? keep_scale : 0.0;
      trace.a2[i] *= trace.drop_mask[i];
    }
  }

  trace.head_full = Tensor({L.frames_out, H, W});
  for (std::size_t t = 0; t < L.frames_out; ++t) {
    double* dst = trace.head_full.data() + t * H * W;
    std::fill(dst, dst + H * W, params.w.head_b[t]);
    for (std::size_t f = 0; f < F; ++f) {
      const double wt = params.w.head_w[t * F + f];
      const double* src = trace.a2.data() + f * H * W;
      for (std::size_t i = 0; i < H * W; ++i) dst[i] += wt * src[i];
    }
  }

  Tensor logits(L.label_shape());
  const std::size_t r0 = L.crop_row0(), c0 = L.crop_col0();
  for (std::size_t t = 0; t < L.frames_out; ++t) {
    for (std::size_t i = 0; i < L.label_height; ++i) {
      const double* src = trace.head_full.data() + (t * H + r0 + i) * W + c0;
      double* dst = logits.data() + (t * L.label_height + i) * L.label_width;
      std::copy(src, src + L.label_width, dst);
    }
  }
  return {std::move(logits), std::move(trace)};
}

Tensor eval_forward(const ModelParams& params, const Tensor& x) {
  return forward(params, x, ForwardMode::eval()).first;
}

ParamSet backward(const ModelParams& params, const ForwardTrace& trace,
                  const Tensor& grad_logits) {
  const GridLayout& L = params.layout;
  const std::size_t cin = L.channels * L.frames_in;
  const std::size_t F = params.features;
  const std::size_t H = L.height, W = L.width;
  if (grad_logits.shape() != L.label_shape())
    throw ContractError("backward: grad_logits does not match the layout");
  if (trace.z1.shape() != std::vector<std::size_t>{F, H, W} ||
      trace.x_planes.shape() != std::vector<std::size_t>{cin, H, W})
    throw ContractError("backward: trace does not match these parameters");

  ParamSet grads = ParamSet::zeros_like(params.w);

  // Un-crop: logits gradient lands in the centered label window.
  Tensor g_head({L.frames_out, H, W});
  const std::size_t r0 = L.crop_row0(), c0 = L.crop_col0();
  for (std::size_t t = 0; t < L.frames_out; ++t) {
    for (std::size_t i = 0; i < L.label_height; ++i) {
      const double* src = grad_logits.data() + (t * L.label_height + i) * L.label_width;
      double* dst = g_head.data() + (t * H + r0 + i) * W + c0;
      std::copy(src, src + L.label_width, dst);
    }
  }

  // 1x1 head.
  Tensor g_a2({F, H, W});
  for (std::size_t t = 0; t < L.frames_out; ++t) {
    const double* g = g_head.data() + t * H * W;
    double acc_b = 0.0;
    for (std::size_t i = 0; i < H * W; ++i) acc_b += g[i];
    grads.head_b[t] += acc_b;
    for (std::size_t f = 0; f < F; ++f) {
      const double* a = trace.a2.data() + f * H * W;
      double acc_w = 0.0;
      for (std::size_t i = 0; i < H * W; ++i) acc_w += g[i] * a[i];
      grads.head_w[t * F + f] += acc_w;
      const double wt = params.w.head_w[t * F + f];
      double* d = g_a2.data() + f * H * W;
      for (std::size_t i = 0; i < H * W; ++i) d[i] += wt * g[i];
    }
  }

  // Dropout and second ReLU.
  if (trace.train) {
    for (std::size_t i = 0; i < g_a2.size(); ++i) g_a2[i] *= trace.drop_mask[i];
  }
  for (std::size_t i = 0; i < g_a2.size(); ++i) {
    if (trace.z2[i] <= 0.0) g_a2[i] = 0.0;
  }

  // conv2.
  Tensor g_a1({F, H, W});
  conv3x3_backward_weights(trace.a1.data(), F, g_a2.data(), F,
                           grads.conv2_w.data(), grads.conv2_b.data(), H, W);
  conv3x3_backward_input(params.w.conv2_w.data(), F, g_a2.data(), F,
                         g_a1.data(), H, W);

  // First ReLU, then conv1 weight gradients.
  for (std::size_t i = 0; i < g_a1.size(); ++i) {
    if (trace.z1[i] <= 0.0) g_a1[i] = 0.0;
  }
  conv3x3_backward_weights(trace.x_planes.data(), cin, g_a1.data(), F,
                           grads.conv1_w.data(), grads.conv1_b.data(), H, W);
  return grads;
}

void save_params(const ModelParams& params, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  nlohmann::json index;
  index["format"] = "nowcast-params-v1";
  index["layout"] = {{"channels", params.layout.channels},
                     {"frames_in", params.layout.frames_in},
                     {"frames_out", params.layout.frames_out},
                     {"height", params.layout.height},
                     {"width", params.layout.width},
                     {"label_height", params.layout.label_height},
                     {"label_width", params.layout.label_width}};
  index["features"] = params.features;
  index["dropout_rate"] = params.dropout_rate;
  nlohmann::json files;
  for_each_param(params.w, [&](const char* name, const Tensor& t) {
    const std::string file = std::string(name) + ".nwt";
    write_tensor(t, dir / file);
    files[name] = file;
  });
  index["tensors"] = files;
  std::ofstream os(dir / "params.json", std::ios::trunc);
  if (!os) throw IoError("cannot write " + (dir / "params.json").string());
  os << index.dump(2) << '\n';
}

ModelParams load_params(const std::filesystem::path& dir) {
  std::ifstream is(dir / "params.json");
  if (!is) throw IoError("cannot read " + (dir / "params.json").string());
  nlohmann::json index;
  try {
    is >> index;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("params.json: " + std::string(e.what()));
  }
  ModelParams p;
  try {
    const auto& L = index.at("layout");
    p.layout.channels = L.at("channels").get<std::size_t>();
    p.layout.frames_in = L.at("frames_in").get<std::size_t>();
    p.layout.frames_out = L.at("frames_out").get<std::size_t>();
    p.layout.height = L.at("height").get<std::size_t>();
    p.layout.width = L.at("width").get<std::size_t>();
    p.layout.label_height = L.at("label_height").get<std::size_t>();
    p.layout.label_width = L.at("label_width").get<std::size_t>();
    p.features = index.at("features").get<std::size_t>();
    p.dropout_rate = index.at("dropout_rate").get<double>();
    const auto& files = index.at("tensors");
    for_each_param(p.w, [&](const char* name, Tensor& t) {
      t = read_tensor(dir / files.at(name).get<std::string>());
    });
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("params.json: " + std::string(e.what()));
  }
  p.layout.validate();
  return p;
}

ForwardFn make_forward_fn(ModelParams params) {
  auto shared = std::make_shared<ModelParams>(std::move(params));
  return [shared](const Tensor& x) { return eval_forward(*shared, x); };
}

}  // namespace nowcast
