#include "nowcast/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "nowcast/error.hpp"

namespace nowcast {

namespace {

unsigned char level(double x) {
  const double v = std::clamp(x, 0.0, 1.0) * 255.0;
  return static_cast<unsigned char>(std::lround(v));
}

std::string ppm_header(std::size_t h, std::size_t w) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "P6\n%zu %zu\n255\n", w, h);
  return buf;
}

}  // namespace

std::string render_prob_ppm(const Tensor& prob_frame, const Tensor* label_frame) {
  if (prob_frame.rank() != 2) throw ShapeError("prob frame must be rank 2");
  if (label_frame && !label_frame->same_shape(prob_frame))
    throw ShapeError("label frame shape differs from the probability frame");
  const std::size_t h = prob_frame.height();
  const std::size_t w = prob_frame.width();
  std::string out = ppm_header(h, w);
  out.reserve(out.size() + 3 * h * w);
  for (std::size_t i = 0; i < h * w; ++i) {
    const double p = prob_frame[i];
    if (label_frame && (*label_frame)[i] == 1.0) {
      out.push_back(static_cast<char>(level(p * 0.25)));
      out.push_back(static_cast<char>(128 + level(p) / 2));
      out.push_back(static_cast<char>(level(p * 0.25)));
    } else {
      const char g = static_cast<char>(level(p));
      out.push_back(g);
      out.push_back(g);
      out.push_back(g);
    }
  }
  return out;
}

std::string render_frequency_ppm(const Tensor& freq) {
  if (freq.rank() != 2) throw ShapeError("frequency map must be rank 2");
  const std::size_t h = freq.height();
  const std::size_t w = freq.width();
  std::string out = ppm_header(h, w);
  out.reserve(out.size() + 3 * h * w);
  for (std::size_t i = 0; i < h * w; ++i) {
    out.push_back(0);
    out.push_back(static_cast<char>(level(freq[i])));
    out.push_back(0);
  }
  return out;
}

std::string render_flow_svg(const FlowField& flow, int block, double scale) {
  if (flow.u.rank() != 2) throw ShapeError("flow field must be rank 2");
  if (block < 1) throw ContractError("block must be >= 1");
  const std::size_t h = flow.u.height();
  const std::size_t w = flow.u.width();
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" "
                "height=\"%.0f\" viewBox=\"0 0 %.0f %.0f\">\n",
                w * scale, h * scale, w * scale, h * scale);
  out += buf;
  std::snprintf(buf, sizeof(buf),
                "<rect width=\"%.0f\" height=\"%.0f\" fill=\"#10141a\"/>\n",
                w * scale, h * scale);
  out += buf;

  const double arrow_gain = 2.0 * scale;
  for (std::size_t bi = 0; bi * block < h; ++bi) {
    for (std::size_t bj = 0; bj * block < w; ++bj) {
      const std::size_t ci = std::min(h - 1, bi * block + block / 2);
      const std::size_t cj = std::min(w - 1, bj * block + block / 2);
      if (flow.valid[ci * w + cj] == 0.0) continue;
      const double u = flow.u[ci * w + cj];
      const double v = flow.v[ci * w + cj];
      const double x0 = (static_cast<double>(cj) + 0.5) * scale;
      const double y0 = (static_cast<double>(ci) + 0.5) * scale;
      const double x1 = x0 + u * arrow_gain;
      const double y1 = y0 + v * arrow_gain;
      std::snprintf(buf, sizeof(buf),
                    "<line class=\"shaft\" x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" "
                    "y2=\"%.2f\" stroke=\"#7fd24c\" stroke-width=\"1.5\"/>\n",
                    x0, y0, x1, y1);
      out += buf;
      // Arrowhead: two short strokes swept back from the tip.
      const double ang = std::atan2(y1 - y0, x1 - x0);
      for (double side : {0.5, -0.5}) {
        const double a = ang + std::numbers::pi - side;
        std::snprintf(buf, sizeof(buf),
                      "<line class=\"head\" x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" "
                      "y2=\"%.2f\" stroke=\"#7fd24c\" stroke-width=\"1.5\"/>\n",
                      x1, y1, x1 + 0.8 * scale * std::cos(a),
                      y1 + 0.8 * scale * std::sin(a));
        out += buf;
      }
    }
  }
  out += "</svg>\n";
  return out;
}

void write_text_file(const std::string& content, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!os) throw IoError("write failed: " + path.string());
}

}  // namespace nowcast
