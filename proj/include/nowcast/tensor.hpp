#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace nowcast {

// Dense rank-N array of 64-bit reals, row-major, outermost extent first.
// Spatial axes are by convention the last two (H then W); row index i grows
// southward, column index j eastward. Rank 0 is a scalar holding one value.
class Tensor {
 public:
  Tensor() : data_(1, 0.0) {}
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor full(std::vector<std::size_t> shape, double value);

  std::size_t rank() const { return shape_.size(); }
  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::size_t extent(std::size_t axis) const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t flat) { return data_[flat]; }
  double operator[](std::size_t flat) const { return data_[flat]; }

  // Trailing-plane view: a rank>=2 tensor is plane_count() planes of H x W.
  std::size_t height() const;
  std::size_t width() const;
  std::size_t plane_count() const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

enum class KernelMode { mean, sum };
enum class BorderMode { replicate };

double sigmoid(double x);
Tensor sigmoid(const Tensor& t);

// 3x3 neighborhood filter applied independently to each trailing H x W plane.
// Out-of-range taps replicate the nearest edge pixel.
Tensor box_filter_3x3(const Tensor& p, KernelMode mode,
                      BorderMode border = BorderMode::replicate);

// NWT1 binary format: bytes 0-3 magic 4E 57 54 31, byte 4 dtype code
// (0x01 = 64-bit real little-endian), byte 5 rank, bytes 6-7 reserved zero,
// then rank u64 little-endian extents, then the row-major payload.
void write_tensor(const Tensor& t, const std::filesystem::path& path);
Tensor read_tensor(const std::filesystem::path& path);

// Grid geometry shared by the forecaster, the data generator and metrics.
// The label window is the centered label_height x label_width crop of the
// input grid.
struct GridLayout {
  std::size_t channels = 4;
  std::size_t frames_in = 4;
  std::size_t frames_out = 8;
  std::size_t height = 48;
  std::size_t width = 48;
  std::size_t label_height = 16;
  std::size_t label_width = 16;

  void validate() const;
  std::size_t crop_row0() const { return (height - label_height) / 2; }
  std::size_t crop_col0() const { return (width - label_width) / 2; }

  std::vector<std::size_t> input_shape() const {
    return {channels, frames_in, height, width};
  }
  std::vector<std::size_t> label_shape() const {
    return {1, frames_out, label_height, label_width};
  }

  friend bool operator==(const GridLayout&, const GridLayout&) = default;
};

}  // namespace nowcast
