#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "nowcast/error.hpp"
#include "nowcast/rng.hpp"
#include "nowcast/tensor.hpp"

using namespace nowcast;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  const fs::path dir = fs::temp_directory_path() / "nowcast_tensor_test";
  fs::create_directories(dir);
  return dir;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

// Scalar reference for the 3x3 filter with replicate borders; deliberately
// independent of the library implementation.
double box_oracle(const std::vector<double>& plane, std::ptrdiff_t h,
                  std::ptrdiff_t w, std::ptrdiff_t i, std::ptrdiff_t j, bool mean) {
  double acc = 0.0;
  for (std::ptrdiff_t di = -1; di <= 1; ++di) {
    for (std::ptrdiff_t dj = -1; dj <= 1; ++dj) {
      std::ptrdiff_t ii = std::min(std::max<std::ptrdiff_t>(i + di, 0), h - 1);
      std::ptrdiff_t jj = std::min(std::max<std::ptrdiff_t>(j + dj, 0), w - 1);
      acc += plane[ii * w + jj];
    }
  }
  return mean ? acc / 9.0 : acc;
}

Tensor random_tensor(Rng& rng, std::vector<std::size_t> shape) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-10.0, 10.0);
  return t;
}

}  // namespace

TEST_CASE("tensor shape and data stay consistent") {
  Tensor t({2, 3});
  CHECK(t.size() == 6);
  CHECK(t.rank() == 2);
  CHECK_THROWS_AS(Tensor({2, 0}), ShapeError);
  CHECK_THROWS_AS(Tensor({2, 3}, {1.0, 2.0}), ShapeError);
  CHECK(Tensor::scalar(4.0).rank() == 0);
  CHECK(Tensor::scalar(4.0).size() == 1);
}

TEST_CASE("sigmoid hits the symmetry point and saturates without overflow") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(40.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::isfinite(sigmoid(700.0)));
  CHECK(std::isfinite(sigmoid(-700.0)));

  // High-precision value of sigmoid(-40) = e^-40 / (1 + e^-40), computed
  // with long double as the independent route.
  const long double e40 = expl(-40.0L);
  const double expected = static_cast<double>(e40 / (1.0L + e40));
  CHECK(sigmoid(-40.0) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("sigmoid(t) + sigmoid(-t) = 1") {
  Rng rng(13);
  for (int k = 0; k < 200; ++k) {
    const double t = rng.uniform(-50.0, 50.0);
    CHECK(std::abs(sigmoid(t) + sigmoid(-t) - 1.0) <= 1e-15);
  }
}

TEST_CASE("box filter of a constant plane") {
  const Tensor c = Tensor::full({4, 5}, 3.25);
  const Tensor mean = box_filter_3x3(c, KernelMode::mean);
  const Tensor sum = box_filter_3x3(c, KernelMode::sum);
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(mean[i] == 3.25);
    CHECK(sum[i] == 9.0 * 3.25);
  }
}

TEST_CASE("box filter matches the scalar loop oracle") {
  const std::vector<double> plane = {0, 0, 0, 0, 9, 0, 0, 0, 0};
  const Tensor t({3, 3}, std::vector<double>(plane));
  const Tensor mean = box_filter_3x3(t, KernelMode::mean);
  CHECK(mean[4] == 1.0);  // center: all nine taps in range
  CHECK(mean[0] == box_oracle(plane, 3, 3, 0, 0, true));

  Rng rng(99);
  const Tensor r = random_tensor(rng, {2, 6, 7});
  const Tensor rm = box_filter_3x3(r, KernelMode::mean);
  const Tensor rs = box_filter_3x3(r, KernelMode::sum);
  for (std::size_t pl = 0; pl < 2; ++pl) {
    std::vector<double> p(r.data() + pl * 42, r.data() + (pl + 1) * 42);
    for (std::ptrdiff_t i = 0; i < 6; ++i) {
      for (std::ptrdiff_t j = 0; j < 7; ++j) {
        const std::size_t at = pl * 42 + i * 7 + j;
        CHECK(rm[at] == doctest::Approx(box_oracle(p, 6, 7, i, j, true)).epsilon(1e-14));
        CHECK(rs[at] == doctest::Approx(box_oracle(p, 6, 7, i, j, false)).epsilon(1e-14));
      }
    }
  }
}

TEST_CASE("mean filter equals sum filter divided by nine") {
  // Within one rounding step: exact agreement for every input is not
  // attainable in IEEE double once constants must be exact fixed points of
  // the mean filter, which the losses rely on.
  Rng rng(7);
  const Tensor r = random_tensor(rng, {3, 5, 5});
  const Tensor mean = box_filter_3x3(r, KernelMode::mean);
  const Tensor sum = box_filter_3x3(r, KernelMode::sum);
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double rhs = sum[i] / 9.0;
    CHECK(std::abs(mean[i] - rhs) <=
          1e-15 * std::max({1.0, std::abs(mean[i]), std::abs(rhs)}));
  }
}

TEST_CASE("box filter rejects rank below 2") {
  CHECK_THROWS_AS(box_filter_3x3(Tensor({4}), KernelMode::mean), ShapeError);
}

TEST_CASE("NWT1 round-trip is the identity for ranks 1 through 5") {
  const fs::path dir = temp_dir();
  Rng rng(2024);
  const std::vector<std::vector<std::size_t>> shapes = {
      {7}, {3, 4}, {2, 3, 4}, {2, 2, 3, 3}, {2, 2, 2, 2, 3}};
  for (const auto& shape : shapes) {
    const Tensor t = random_tensor(rng, std::vector<std::size_t>(shape));
    const fs::path file = dir / "roundtrip.nwt";
    write_tensor(t, file);
    const Tensor back = read_tensor(file);
    CHECK(bitwise_equal(t, back));
  }
}

TEST_CASE("empty-shape scalar tensor round-trips") {
  const fs::path file = temp_dir() / "scalar.nwt";
  write_tensor(Tensor::scalar(-0.125), file);
  const Tensor back = read_tensor(file);
  CHECK(back.rank() == 0);
  CHECK(back[0] == -0.125);
}

TEST_CASE("NWT1 reader names the offending field") {
  const fs::path dir = temp_dir();
  const fs::path file = dir / "bad.nwt";
  write_tensor(Tensor::full({2, 2}, 1.0), file);

  auto clobber = [&](std::size_t at, unsigned char value) {
    std::fstream f(file, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(static_cast<std::streamoff>(at));
    f.write(reinterpret_cast<const char*>(&value), 1);
  };

  clobber(0, 0x58);
  CHECK_THROWS_WITH_AS(read_tensor(file), doctest::Contains("bad magic"),
                       FormatError);

  write_tensor(Tensor::full({2, 2}, 1.0), file);
  clobber(4, 0x07);
  CHECK_THROWS_WITH_AS(read_tensor(file), doctest::Contains("dtype"), FormatError);

  write_tensor(Tensor::full({2, 2}, 1.0), file);
  fs::resize_file(file, fs::file_size(file) - 5);
  CHECK_THROWS_WITH_AS(read_tensor(file), doctest::Contains("payload"),
                       FormatError);
}

TEST_CASE("grid layout validation") {
  GridLayout ok;
  CHECK_NOTHROW(ok.validate());
  CHECK(ok.crop_row0() == 16);

  GridLayout bad = ok;
  bad.width = 52;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  GridLayout off_center = ok;
  off_center.label_height = 15;
  CHECK_THROWS_AS(off_center.validate(), ConfigError);
}
