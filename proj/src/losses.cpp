#include "nowcast/losses.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "nowcast/error.hpp"
#include "nowcast/reduce.hpp"

namespace nowcast {

namespace {

double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sign0(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

void check_probabilities(const Tensor& prob) {
  for (std::size_t i = 0; i < prob.size(); ++i) {
    if (!(prob[i] >= 0.0 && prob[i] <= 1.0))
      throw ContractError("probability field has values outside [0, 1]");
  }
}

// Adjoint of the 3x3 replicate-border box filter: scatters each output
// sensitivity back onto the clamped tap positions.
void scatter_box_adjoint(const double* sens, double* acc, std::size_t h,
                         std::size_t w, KernelMode mode, double scale) {
  const double tap_w = (mode == KernelMode::mean) ? scale / 9.0 : scale;
  const auto hi = static_cast<std::ptrdiff_t>(h);
  const auto wi = static_cast<std::ptrdiff_t>(w);
  for (std::ptrdiff_t i = 0; i < hi; ++i) {
    for (std::ptrdiff_t j = 0; j < wi; ++j) {
      const double s = sens[i * wi + j];
      if (s == 0.0) continue;
      for (std::ptrdiff_t di = -1; di <= 1; ++di) {
        const std::ptrdiff_t ii = std::clamp<std::ptrdiff_t>(i + di, 0, hi - 1);
        for (std::ptrdiff_t dj = -1; dj <= 1; ++dj) {
          const std::ptrdiff_t jj = std::clamp<std::ptrdiff_t>(j + dj, 0, wi - 1);
          acc[ii * wi + jj] += tap_w * s;
        }
      }
    }
  }
}

}  // namespace

void LossConfig::validate() const {
  if (alpha < 0.0 || beta < 0.0 || pos_weight < 0.0)
    throw ConfigError("loss weights must be nonnegative");
}

LossValue bce_loss(const Tensor& logits, const Tensor& labels, const LossConfig& cfg) {
  cfg.validate();
  if (!logits.same_shape(labels)) throw ContractError("bce_loss: shape mismatch");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0.0 && labels[i] != 1.0)
      throw ContractError("bce_loss: labels must be exactly 0 or 1");
  }

  const double n = static_cast<double>(logits.size());
  LossValue out;
  out.grad = Tensor(std::vector<std::size_t>(logits.shape()));
  double acc = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i];
    const double y = labels[i];
    // -[w+ y log p + (1-y) log(1-p)] with p = sigmoid(z), in logit form.
    acc += cfg.pos_weight * y * softplus(-z) + (1.0 - y) * softplus(z);
    const double p = sigmoid(z);
    out.grad[i] = (cfg.pos_weight * y * (p - 1.0) + (1.0 - y) * p) / n;
  }
  out.value = acc / n;
  return out;
}

LossValue spatial_smooth_loss(const Tensor& prob, const LossConfig& cfg) {
  cfg.validate();
  if (prob.rank() < 2) throw ShapeError("spatial_smooth_loss requires rank >= 2");
  const std::size_t h = prob.height();
  const std::size_t w = prob.width();
  if (h < 1 || w < 1) throw ShapeError("spatial_smooth_loss: empty plane");
  check_probabilities(prob);

  const Tensor filtered = box_filter_3x3(prob, cfg.kernel_mode);
  const std::size_t frames = prob.plane_count();
  const double npix = static_cast<double>(h * w);

  LossValue out;
  out.grad = Tensor(std::vector<std::size_t>(prob.shape()));
  std::vector<double> scratch(h * w);
  std::vector<double> sens(h * w);  // d frame_value / d diff
  double value = 0.0;

  for (std::size_t pl = 0; pl < frames; ++pl) {
    const double* p = prob.data() + pl * h * w;
    const double* k = filtered.data() + pl * h * w;
    double frame_value = 0.0;
    if (cfg.norm_mode == NormMode::l1) {
      for (std::size_t i = 0; i < h * w; ++i) scratch[i] = std::abs(p[i] - k[i]);
      frame_value = multiset_sum(scratch) / npix;
      for (std::size_t i = 0; i < h * w; ++i)
        sens[i] = sign0(p[i] - k[i]) / (npix * frames);
    } else {
      for (std::size_t i = 0; i < h * w; ++i) {
        const double d = p[i] - k[i];
        scratch[i] = d * d;
      }
      frame_value = std::sqrt(multiset_sum(scratch) / npix);
      const double denom = frame_value > 0.0 ? npix * frame_value * frames : 0.0;
      for (std::size_t i = 0; i < h * w; ++i)
        sens[i] = denom > 0.0 ? (p[i] - k[i]) / denom : 0.0;
    }
    value += frame_value;

    // d diff / d prob = I - K; the identity part lands directly, the kernel
    // part through the filter adjoint.
    double* g = out.grad.data() + pl * h * w;
    for (std::size_t i = 0; i < h * w; ++i) g[i] += sens[i];
    for (std::size_t i = 0; i < h * w; ++i) sens[i] = -sens[i];
    scatter_box_adjoint(sens.data(), g, h, w, cfg.kernel_mode, 1.0);
  }
  out.value = value / static_cast<double>(frames);
  return out;
}

LossValue temporal_smooth_loss(const Tensor& prob, const LossConfig& cfg) {
  cfg.validate();
  if (prob.rank() < 3)
    throw ContractError("temporal_smooth_loss requires rank >= 3 (time axis)");
  const std::size_t h = prob.height();
  const std::size_t w = prob.width();
  const std::size_t t = prob.extent(prob.rank() - 3);
  if (t < 2) throw ContractError("temporal_smooth_loss requires at least 2 frames");
  check_probabilities(prob);

  const std::size_t batch = prob.size() / (t * h * w);
  const double npix = static_cast<double>(h * w);
  const double norm = static_cast<double>(batch) * static_cast<double>(t - 1);

  LossValue out;
  out.grad = Tensor(std::vector<std::size_t>(prob.shape()));
  std::vector<double> scratch(h * w);
  double value = 0.0;

  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t ti = 0; ti + 1 < t; ++ti) {
      const std::size_t at = (b * t + ti) * h * w;
      const std::size_t bt = (b * t + ti + 1) * h * w;
      const double* pa = prob.data() + at;
      const double* pb = prob.data() + bt;
      double* ga = out.grad.data() + at;
      double* gb = out.grad.data() + bt;
      if (cfg.norm_mode == NormMode::l1) {
        for (std::size_t i = 0; i < h * w; ++i) scratch[i] = std::abs(pa[i] - pb[i]);
        value += multiset_sum(scratch) / npix;
        for (std::size_t i = 0; i < h * w; ++i) {
          const double s = sign0(pa[i] - pb[i]) / (npix * norm);
          ga[i] += s;
          gb[i] -= s;
        }
      } else {
        for (std::size_t i = 0; i < h * w; ++i) {
          const double d = pa[i] - pb[i];
          scratch[i] = d * d;
        }
        const double pair_value = std::sqrt(multiset_sum(scratch) / npix);
        value += pair_value;
        if (pair_value > 0.0) {
          const double denom = npix * pair_value * norm;
          for (std::size_t i = 0; i < h * w; ++i) {
            const double s = (pa[i] - pb[i]) / denom;
            ga[i] += s;
            gb[i] -= s;
          }
        }
      }
    }
  }
  out.value = value / norm;
  return out;
}

LossReport total_loss(const Tensor& logits, const Tensor& labels, const LossConfig& cfg) {
  const Tensor prob = sigmoid(logits);
  const LossValue bce = bce_loss(logits, labels, cfg);
  const LossValue spatial = spatial_smooth_loss(prob, cfg);
  const LossValue temporal = temporal_smooth_loss(prob, cfg);

  LossReport report;
  report.bce = bce.value;
  report.spatial = spatial.value;
  report.temporal = temporal.value;
  report.total = bce.value + cfg.alpha * spatial.value + cfg.beta * temporal.value;
  report.grad_logits = bce.grad;
  if (cfg.alpha != 0.0 || cfg.beta != 0.0) {
    for (std::size_t i = 0; i < logits.size(); ++i) {
      const double dp_dz = prob[i] * (1.0 - prob[i]);
      double g = 0.0;
      if (cfg.alpha != 0.0) g += cfg.alpha * spatial.grad[i];
      if (cfg.beta != 0.0) g += cfg.beta * temporal.grad[i];
      report.grad_logits[i] += g * dp_dz;
    }
  }
  return report;
}

std::string loss_csv_header() { return "step,bce,spatial,temporal,total"; }

std::string loss_csv_row(long step, const LossReport& report) {
  std::ostringstream os;
  os.precision(17);
  os << step << ',' << report.bce << ',' << report.spatial << ','
     << report.temporal << ',' << report.total;
  return os.str();
}

}  // namespace nowcast
