#include "nowcast/tensor.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>

#include "nowcast/error.hpp"
#include "nowcast/reduce.hpp"

namespace nowcast {

namespace {

std::size_t checked_element_count(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) {
    if (e == 0) throw ShapeError("tensor extents must be positive");
    if (e > std::numeric_limits<std::size_t>::max() / n)
      throw ShapeError("tensor extent product overflows");
    n *= e;
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(checked_element_count(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != checked_element_count(shape_))
    throw ShapeError("tensor data length does not match shape");
}

Tensor Tensor::scalar(double v) {
  Tensor t;
  t.data_[0] = v;
  return t;
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

std::size_t Tensor::extent(std::size_t axis) const {
  if (axis >= shape_.size()) throw ShapeError("tensor axis out of range");
  return shape_[axis];
}

std::size_t Tensor::height() const {
  if (rank() < 2) throw ShapeError("height requires rank >= 2");
  return shape_[rank() - 2];
}

std::size_t Tensor::width() const {
  if (rank() < 2) throw ShapeError("width requires rank >= 2");
  return shape_[rank() - 1];
}

std::size_t Tensor::plane_count() const { return size() / (height() * width()); }

double sigmoid(double x) {
  // Sign-split form: never exponentiates a large positive argument.
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor sigmoid(const Tensor& t) {
  Tensor out = t;
  for (double& v : out.values()) v = sigmoid(v);
  return out;
}

Tensor box_filter_3x3(const Tensor& p, KernelMode mode, BorderMode) {
  if (p.rank() < 2) throw ShapeError("box_filter_3x3 requires rank >= 2");
  const std::size_t h = p.height();
  const std::size_t w = p.width();
  if (h < 1 || w < 1) throw ShapeError("box_filter_3x3 requires H >= 1 and W >= 1");

  Tensor out(std::vector<std::size_t>(p.shape()));
  const std::size_t planes = p.plane_count();
  const auto hi = static_cast<std::ptrdiff_t>(h);
  const auto wi = static_cast<std::ptrdiff_t>(w);
  for (std::size_t pl = 0; pl < planes; ++pl) {
    const double* in = p.data() + pl * h * w;
    double* dst = out.data() + pl * h * w;
    for (std::ptrdiff_t i = 0; i < hi; ++i) {
      for (std::ptrdiff_t j = 0; j < wi; ++j) {
        // Center-relative difference form: on a constant plane every
        // difference is exactly zero, so the mean filter holds constants
        // fixed bit-exactly and the sum filter gives exactly 9c. Taps
        // accumulate via multiset_sum so the filter also commutes exactly
        // with the dihedral actions (which permute the window contents).
        const double center = in[i * wi + j];
        std::array<double, 9> diffs;
        int n = 0;
        for (std::ptrdiff_t di = -1; di <= 1; ++di) {
          const std::ptrdiff_t ii = std::clamp<std::ptrdiff_t>(i + di, 0, hi - 1);
          for (std::ptrdiff_t dj = -1; dj <= 1; ++dj) {
            const std::ptrdiff_t jj = std::clamp<std::ptrdiff_t>(j + dj, 0, wi - 1);
            diffs[n++] = in[ii * wi + jj] - center;
          }
        }
        const double d = multiset_sum(diffs);
        dst[i * wi + j] = (mode == KernelMode::mean) ? center + d / 9.0
                                                     : 9.0 * center + d;
      }
    }
  }
  return out;
}

namespace {

constexpr std::array<unsigned char, 4> kMagic = {0x4E, 0x57, 0x54, 0x31};  // "NWT1"
constexpr unsigned char kDtypeF64LE = 0x01;

void put_u64_le(std::ofstream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64_le(const unsigned char* b) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void write_tensor(const Tensor& t, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os.write(reinterpret_cast<const char*>(kMagic.data()), 4);
  const unsigned char head[4] = {kDtypeF64LE, static_cast<unsigned char>(t.rank()), 0, 0};
  os.write(reinterpret_cast<const char*>(head), 4);
  for (std::size_t e : t.shape()) put_u64_le(os, e);
  for (std::size_t i = 0; i < t.size(); ++i) {
    std::uint64_t bits;
    double v = t[i];
    std::memcpy(&bits, &v, 8);
    put_u64_le(os, bits);
  }
  if (!os) throw IoError("write failed: " + path.string());
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 8) throw FormatError("truncated header in " + path.string());
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin()))
    throw FormatError("bad magic in " + path.string());
  if (bytes[4] != kDtypeF64LE)
    throw FormatError("unknown dtype code " + std::to_string(int(bytes[4])) + " in " +
                      path.string());
  if (bytes[6] != 0 || bytes[7] != 0)
    throw FormatError("reserved header bytes nonzero in " + path.string());
  const std::size_t rank = bytes[5];
  if (bytes.size() < 8 + 8 * rank)
    throw FormatError("truncated extents in " + path.string());
  std::vector<std::size_t> shape(rank);
  std::size_t count = 1;
  for (std::size_t a = 0; a < rank; ++a) {
    const std::uint64_t e = get_u64_le(bytes.data() + 8 + 8 * a);
    if (e == 0) throw FormatError("zero extent in " + path.string());
    if (e > std::numeric_limits<std::size_t>::max() / count)
      throw FormatError("extent product overflows in " + path.string());
    shape[a] = static_cast<std::size_t>(e);
    count *= shape[a];
  }
  const std::size_t payload_at = 8 + 8 * rank;
  if (bytes.size() != payload_at + 8 * count)
    throw FormatError("truncated payload in " + path.string());
  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t bits = get_u64_le(bytes.data() + payload_at + 8 * i);
    std::memcpy(&data[i], &bits, 8);
  }
  return Tensor(std::move(shape), std::move(data));
}

void GridLayout::validate() const {
  if (channels < 1 || frames_in < 1 || frames_out < 1)
    throw ConfigError("layout counts must be positive");
  if (height != width) throw ConfigError("layout requires a square grid (H == W)");
  if (label_height > height || label_width > width)
    throw ConfigError("label window must fit inside the input window");
  if ((height - label_height) % 2 != 0 || (width - label_width) % 2 != 0)
    throw ConfigError("label window must be centered (even margins)");
}

}  // namespace nowcast
