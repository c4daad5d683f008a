#pragma once

#include <filesystem>
#include <string>

#include "nowcast/flow.hpp"
#include "nowcast/tensor.hpp"

namespace nowcast {

// Deterministic byte-for-byte renderers backing the `plot` subcommand.

// Grayscale probability map; with a label frame, rain pixels are tinted
// green so hits and misses read at a glance.
std::string render_prob_ppm(const Tensor& prob_frame, const Tensor* label_frame);

// Green-intensity colormap, monotone in the frequency value.
std::string render_frequency_ppm(const Tensor& freq);

// One arrow per block center; shafts carry class "shaft" so tools can
// recover the angles.
std::string render_flow_svg(const FlowField& flow, int block, double scale = 6.0);

void write_text_file(const std::string& content, const std::filesystem::path& path);

}  // namespace nowcast
