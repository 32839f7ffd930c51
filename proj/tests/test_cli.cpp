#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "phonation/checkpoint.hpp"
#include "phonation/segment_io.hpp"

using namespace phonation;
namespace fs = std::filesystem;

namespace {

const std::string kCli = PHONATION_CLI_PATH;

int run(const std::string& args) {
  const std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

int run_capture(const std::string& args, const std::string& stdout_file) {
  const std::string cmd = kCli + " " + args + " >" + stdout_file + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

// first "accuracy <number>" occurrence in a text file, after `after`
double parse_accuracy(const fs::path& file, const std::string& after = "") {
  std::ifstream in(file);
  REQUIRE(in.good());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t from = 0;
  if (!after.empty()) {
    from = text.find(after);
    REQUIRE(from != std::string::npos);
  }
  const std::size_t pos = text.find("accuracy ", from);
  REQUIRE(pos != std::string::npos);
  return std::stod(text.substr(pos + 9));
}

std::vector<char> slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::vector<char>((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("synth writes a deterministic dataset and rejects zero clips") {
  TempDir dir("phonation_cli_synth");
  const std::string out_a = (dir.path / "a").string();
  const std::string out_b = (dir.path / "b").string();

  CHECK(run("synth --out " + out_a + " --clips 8 --seed 1") == 0);
  CHECK(fs::exists(fs::path(out_a) / "manifest.csv"));
  CHECK(fs::exists(fs::path(out_a) / "run_config.json"));
  int wavs = 0;
  for (const auto& entry : fs::directory_iterator(out_a)) {
    if (entry.path().extension() == ".wav") ++wavs;
  }
  CHECK(wavs == 8);

  CHECK(run("synth --out " + out_b + " --clips 8 --seed 1") == 0);
  for (const auto& entry : fs::directory_iterator(out_a)) {
    if (entry.path().extension() != ".wav") continue;
    CHECK(slurp(entry.path()) == slurp(fs::path(out_b) / entry.path().filename()));
  }

  CHECK(run("synth --out " + (dir.path / "z").string() + " --clips 0") != 0);
}

TEST_CASE("full pipeline: preprocess, train, eval, gradcam") {
  TempDir dir("phonation_cli_pipeline");
  const std::string raw = (dir.path / "raw").string();
  const std::string data = (dir.path / "data").string();
  const std::string rundir = (dir.path / "run").string();

  REQUIRE(run("synth --out " + raw + " --clips 24 --seed 3 --duration-range 1.2:2.0") == 0);
  REQUIRE(run("preprocess --manifest " + raw + "/manifest.csv --out " + data +
              " --test-split 0.25 --seed 3") == 0);
  CHECK(fs::exists(fs::path(data) / "train.segs"));
  CHECK(fs::exists(fs::path(data) / "test.segs"));

  const auto train_segs = load_segments((fs::path(data) / "train.segs").string());
  const auto test_segs = load_segments((fs::path(data) / "test.segs").string());
  CHECK(train_segs.size() >= 16);  // 16 train clips, at least one window each
  CHECK(test_segs.size() == 8);    // round(0.25 * 6) = 2 held out per mode

  REQUIRE(run("train --data " + data + " --out " + rundir +
              " --folds 2 --epochs 2 --seed 3") == 0);
  CHECK(fs::exists(fs::path(rundir) / "fold0.ckpt"));
  CHECK(fs::exists(fs::path(rundir) / "fold1.ckpt"));
  CHECK(fs::exists(fs::path(rundir) / "metrics.txt"));
  CHECK(fs::exists(fs::path(rundir) / "run_config.json"));

  const CheckpointRecord record =
      load_checkpoint((fs::path(rundir) / "fold0.ckpt").string());
  CHECK(record.config.input_bands == 128);

  CHECK(run("eval --checkpoint " + rundir + "/fold0.ckpt --data " + data) == 0);

  // gradcam over one of the synthesized files
  std::string wav;
  for (const auto& entry : fs::directory_iterator(raw)) {
    if (entry.path().extension() == ".wav") {
      wav = entry.path().string();
      break;
    }
  }
  REQUIRE_FALSE(wav.empty());
  const std::string cam = (dir.path / "cam").string();
  CHECK(run("gradcam --checkpoint " + rundir + "/fold0.ckpt --input " + wav +
            " --class flow --layer conv3 --layer conv4 --out " + cam) == 0);
  int images = 0;
  for (const auto& entry : fs::directory_iterator(cam)) {
    if (entry.path().extension() == ".pgm") ++images;
  }
  CHECK(images == 2);

  // unknown mode name is a usage error
  CHECK(run("gradcam --checkpoint " + rundir + "/fold0.ckpt --input " + wav +
            " --class falsetto --out " + cam) != 0);
}

TEST_CASE("missing inputs fail with nonzero exit") {
  TempDir dir("phonation_cli_missing");
  CHECK(run("train --data " + (dir.path / "nope").string() + " --out " +
            (dir.path / "out").string() + " --folds 2 --epochs 1") != 0);
  CHECK(run("preprocess --manifest " + (dir.path / "nope.csv").string() + " --out " +
            (dir.path / "out").string()) != 0);
  CHECK(run("eval --checkpoint missing.ckpt --data " + dir.path.string()) != 0);
}
