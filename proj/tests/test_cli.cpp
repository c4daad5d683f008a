#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "nowcast/plots.hpp"
#include "nowcast/rng.hpp"
#include "nowcast/tensor.hpp"

using namespace nowcast;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

CliResult run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path log =
      fs::temp_directory_path() / ("nowcast_cli_out_" + std::to_string(counter++));
  const std::string cmd =
      std::string(NOWCAST_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int raw = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WEXITSTATUS(raw);
  std::ifstream is(log);
  std::stringstream ss;
  ss << is.rdbuf();
  r.output = ss.str();
  fs::remove(log);
  return r;
}

// Order-stable content hash of a directory tree.
std::uint64_t hash_tree(const fs::path& root) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const fs::path& f : files) {
    const std::string rel = fs::relative(f, root).string();
    h = mix64(h ^ fnv1a(rel));
    std::ifstream is(f, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(is)),
                      std::istreambuf_iterator<char>());
    h = mix64(h ^ fnv1a(bytes));
  }
  return h;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("nowcast_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("help exits zero and lists every subcommand") {
  const CliResult r = run_cli("--help");
  CHECK(r.exit_code == 0);
  for (const char* sub : {"gen-data", "train", "eval", "tta-compare",
                          "audit-aug", "gradcheck", "ablate", "plot"}) {
    CHECK(r.output.find(sub) != std::string::npos);
  }
}

TEST_CASE("unknown flags and subcommands exit 1 with usage") {
  CHECK(run_cli("gradcheck --frobnicate").exit_code == 1);
  CHECK(run_cli("make-it-rain").exit_code == 1);
  const CliResult r = run_cli("gradcheck --frobnicate");
  CHECK(r.output.find("Usage") != std::string::npos);
}

TEST_CASE("gen-data is byte-deterministic across runs and thread counts") {
  const fs::path a = fresh_dir("gen_a");
  const fs::path b = fresh_dir("gen_b");
  const std::string size_flags =
      " --train-sequences 3 --val-sequences 1 --test-sequences 1 --seed 7";
  CHECK(run_cli("gen-data --out " + a.string() + size_flags + " --threads 1")
            .exit_code == 0);
  CHECK(run_cli("gen-data --out " + b.string() + size_flags + " --threads 2")
            .exit_code == 0);
  CHECK(hash_tree(a) == hash_tree(b));

  // Refuses to overwrite without --force, succeeds with it.
  CHECK(run_cli("gen-data --out " + a.string() + size_flags).exit_code == 1);
  CHECK(run_cli("gen-data --out " + a.string() + size_flags + " --force")
            .exit_code == 0);
  CHECK(hash_tree(a) == hash_tree(b));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("gradcheck passes and reports per-term errors") {
  const CliResult r = run_cli("gradcheck --seeds 5");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("bce") != std::string::npos);
  CHECK(r.output.find("spatial") != std::string::npos);
  CHECK(r.output.find("temporal") != std::string::npos);
  CHECK(r.output.find("model") != std::string::npos);
  CHECK(r.output.find("PASS") != std::string::npos);
}

TEST_CASE("eval on a missing manifest exits 2 and names the path") {
  const CliResult r = run_cli(
      "eval --data /nonexistent/manifest.json --model /nonexistent --out /tmp/x");
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("/nonexistent") != std::string::npos);
}

TEST_CASE("train then eval round-trips through the CLI") {
  const fs::path data = fresh_dir("pipeline_data");
  const fs::path run = fresh_dir("pipeline_run");
  const fs::path evald = fresh_dir("pipeline_eval");
  CHECK(run_cli("gen-data --out " + data.string() +
                " --train-sequences 2 --val-sequences 1 --test-sequences 1 "
                "--seed 3")
            .exit_code == 0);
  CHECK(run_cli("train --data " + data.string() + " --out " + run.string() +
                " --epochs 1 --batch-size 4 --features 2 --threads 2 --seed 1")
            .exit_code == 0);
  CHECK(fs::exists(run / "checkpoint" / "params.json"));
  CHECK(fs::exists(run / "trainlog.csv"));
  CHECK(run_cli("eval --data " + data.string() + " --model " +
                (run / "checkpoint").string() + " --out " + evald.string() +
                " --ensemble paper_main --threads 2")
            .exit_code == 0);
  CHECK(fs::exists(evald / "eval.csv"));
  CHECK(fs::exists(evald / "summary.csv"));

  std::ifstream is(evald / "eval.csv");
  std::string header;
  std::getline(is, header);
  CHECK(header == "region,lead,tp,fp,fn,tn,iou");
  fs::remove_all(data);
  fs::remove_all(run);
  fs::remove_all(evald);
}

TEST_CASE("plot prob: an all-zero map renders uniformly dark at exact length") {
  const fs::path dir = fresh_dir("plot_prob");
  fs::create_directories(dir);
  const std::size_t h = 16, w = 16;
  write_tensor(Tensor({1, 2, h, w}), dir / "zero.nwt");
  const fs::path out = dir / "zero.ppm";
  CHECK(run_cli("plot --kind prob --input " + (dir / "zero.nwt").string() +
                " --frame 0 --out " + out.string())
            .exit_code == 0);

  std::ifstream is(out, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(is)),
                    std::istreambuf_iterator<char>());
  const std::string header = "P6\n16 16\n255\n";
  CHECK(bytes.size() == header.size() + 3 * h * w);
  CHECK(bytes.rfind(header, 0) == 0);
  for (std::size_t i = header.size(); i < bytes.size(); ++i)
    CHECK(bytes[i] == 0);
  fs::remove_all(dir);
}

TEST_CASE("plot flow: uniform eastward motion gives one shared arrow angle") {
  const fs::path dir = fresh_dir("plot_flow");
  fs::create_directories(dir);

  // Textured frame pair displaced 2 px east.
  Rng rng(5);
  const std::size_t n = 32;
  Tensor a({n, n});
  for (int k = 0; k < 30; ++k) {
    const double ci = rng.uniform(3, n - 3), cj = rng.uniform(3, n - 3);
    const double amp = rng.uniform(0.5, 1.5), s = rng.uniform(1.0, 2.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double di = i - ci, dj = j - cj;
        a[i * n + j] += amp * std::exp(-(di * di + dj * dj) / (2 * s * s));
      }
  }
  Tensor b({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      b[i * n + j] = a[i * n + std::min(j >= 2 ? j - 2 : 0, n - 1)];
  write_tensor(a, dir / "a.nwt");
  write_tensor(b, dir / "b.nwt");

  const fs::path svg = dir / "flow.svg";
  CHECK(run_cli("plot --kind flow --a " + (dir / "a.nwt").string() + " --b " +
                (dir / "b.nwt").string() + " --out " + svg.string())
            .exit_code == 0);

  std::ifstream is(svg);
  std::string line;
  int shafts = 0;
  double angle = 0.0;
  bool have_angle = false;
  while (std::getline(is, line)) {
    if (line.find("class=\"shaft\"") == std::string::npos) continue;
    auto grab = [&](const std::string& key) {
      const std::size_t at = line.find(key + "=\"");
      REQUIRE(at != std::string::npos);
      return std::stod(line.substr(at + key.size() + 2));
    };
    const double x0 = grab("x1"), y0 = grab("y1");
    const double x1 = grab("x2"), y1 = grab("y2");
    const double this_angle = std::atan2(y1 - y0, x1 - x0);
    if (!have_angle) {
      angle = this_angle;
      have_angle = true;
    } else {
      CHECK(this_angle == doctest::Approx(angle).epsilon(1e-12));
    }
    ++shafts;
  }
  CHECK(shafts > 4);
  CHECK(have_angle);
  CHECK(angle == doctest::Approx(0.0).epsilon(1e-12));  // pure east
  fs::remove_all(dir);
}

TEST_CASE("frequency colormap is monotone in green") {
  Tensor freq({1, 3}, {0.0, 0.5, 1.0});
  const std::string ppm = render_frequency_ppm(freq);
  const std::string header = "P6\n3 1\n255\n";
  REQUIRE(ppm.size() == header.size() + 9);
  const auto px = reinterpret_cast<const unsigned char*>(ppm.data() + header.size());
  CHECK(px[0 * 3 + 1] < px[1 * 3 + 1]);
  CHECK(px[1 * 3 + 1] < px[2 * 3 + 1]);
  CHECK(px[0] == 0);  // red stays dark
  CHECK(px[2] == 0);  // blue stays dark
}

TEST_CASE("prob renderer overlays rain pixels in green") {
  Tensor prob({1, 2}, {0.5, 0.5});
  Tensor label({1, 2}, {0.0, 1.0});
  const std::string ppm = render_prob_ppm(prob, &label);
  const std::string header = "P6\n2 1\n255\n";
  REQUIRE(ppm.size() == header.size() + 6);
  const auto px = reinterpret_cast<const unsigned char*>(ppm.data() + header.size());
  // No-rain pixel is gray; rain pixel has a dominant green channel.
  CHECK(px[0] == px[1]);
  CHECK(px[4] > px[3]);
  CHECK(px[4] > px[5]);
}
