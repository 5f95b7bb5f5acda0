#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "cli.hpp"
#include "vpl/dataset.hpp"
#include "vpl/segeval.hpp"

using namespace vpl;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::string> light_optics_flags() {
  return {"--pupil-samples", "32", "--padding", "2", "--window", "63", "--kernel-size", "15",
          "--pixel-pitch", "40", "--truncation-threshold", "0.05"};
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

void write_gray_png(const LabelMap& m, const fs::path& path) {
  cv::Mat mat(m.height, m.width, CV_8UC1);
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) mat.at<std::uint8_t>(y, x) = static_cast<std::uint8_t>(m.at(y, x));
  }
  cv::imwrite(path.string(), mat);
}

std::vector<fs::path> sorted_files(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  return files;
}

fs::path first_sample(const fs::path& dir) {
  for (const auto& p : sorted_files(dir)) {
    if (p.filename().string().ends_with(".vpl.json")) return p;
  }
  return {};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() / ("vpl_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                         "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  // Ten small random images and a manifest listing them.
  fs::path make_manifest() {
    fs::create_directories(root_ / "data" / "img");
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    DatasetManifest m;
    for (int i = 0; i < 10; ++i) {
      RgbImage img(80, 64);
      for (int c = 0; c < 3; ++c) {
        for (double& v : img.plane(c)) v = u(rng);
      }
      const fs::path rel = fs::path("img") / ("frame" + std::to_string(i) + ".png");
      save_image(img, root_ / "data" / rel);
      m.entries.push_back({rel, {}, {}, std::nullopt, {}});
    }
    save_manifest(m, root_ / "data" / "manifest.tsv");
    return root_ / "data" / "manifest.tsv";
  }

  fs::path root_;
};

}  // namespace

TEST_F(CliTest, GenWritesRequestedSamples) {
  const auto r = run({"gen", "--behavior", "csl", "--level", "3", "--count", "5", "--seed", "42", "--out", (root_ / "s").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  int samples = 0;
  for (const auto& p : sorted_files(root_ / "s")) {
    if (p.filename().string().ends_with(".vpl.json")) {
      const VplSample s = load_vpl_sample(p);
      EXPECT_EQ(s.spec.id, "C3");
      EXPECT_GE(s.seed, 42u);
      EXPECT_LT(s.seed, 47u);
      ++samples;
    }
  }
  EXPECT_EQ(samples, 5);
  EXPECT_TRUE(fs::exists(root_ / "s" / "run_config.json"));
}

TEST_F(CliTest, GenLevelFiveDefaultsToTwenty) {
  const auto r = run({"gen", "--level", "H5", "--seed", "1", "--out", (root_ / "s").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  int samples = 0;
  for (const auto& p : sorted_files(root_ / "s")) samples += p.filename().string().ends_with(".vpl.json");
  EXPECT_EQ(samples, 20);
}

TEST_F(CliTest, GenIsDeterministic) {
  for (const char* d : {"a", "b"}) {
    ASSERT_EQ(run({"gen", "--level", "C2", "--count", "3", "--seed", "9", "--out", (root_ / d).string()}).code, 0);
  }
  const auto a = sorted_files(root_ / "a");
  const auto b = sorted_files(root_ / "b");
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(read_bytes(a[i]), read_bytes(b[i])) << a[i];
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  const std::string out = (root_ / "s").string();
  EXPECT_EQ(run({"gen", "--level", "C9", "--seed", "1", "--out", out}).code, 2);
  EXPECT_EQ(run({"gen", "--level", "3", "--seed", "1", "--out", out}).code, 2);  // no behavior
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"gen", "--level", "C1", "--seed", "1", "--out", out, "--bogus"}).code, 2);
  EXPECT_EQ(run({"gen", "--level", "C1", "--out", out}).code, 2);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_FALSE(fs::exists(root_ / "s"));
}

TEST_F(CliTest, ValidationFailuresExitOne) {
  const std::string out = (root_ / "s").string();
  ASSERT_EQ(run({"gen", "--level", "C1", "--seed", "1", "--out", out}).code, 0);
  const auto r = run({"psf", "--samples", out, "--out", (root_ / "p").string(), "--pupil-samples", "100"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("error"), std::string::npos);
  std::ofstream(root_ / "bad.vpl.json") << "{ not json";
  EXPECT_EQ(run({"psf", "--sample", (root_ / "bad.vpl.json").string(), "--out", (root_ / "p").string()}).code, 1);
}

TEST_F(CliTest, VersionAndHelp) {
  const auto v = run({"--version"});
  EXPECT_EQ(v.code, 0);
  EXPECT_NE(v.out.find(cli::kVersion), std::string::npos);
  const auto h = run({"--help"});
  EXPECT_EQ(h.code, 0);
  EXPECT_NE(h.out.find("degrade"), std::string::npos);
}

TEST_F(CliTest, DegradeManifestIsReproducible) {
  const fs::path manifest = make_manifest();
  ASSERT_EQ(run({"gen", "--level", "C2", "--count", "3", "--seed", "100", "--out", (root_ / "s").string()}).code, 0);
  const auto base = concat({"degrade", "--manifest", manifest.string(), "--samples", (root_ / "s").string(), "--seed", "7"},
                           light_optics_flags());
  const auto r1 = run(concat(base, {"--jobs", "1", "--out", (root_ / "o1").string()}));
  ASSERT_EQ(r1.code, 0) << r1.err;
  const auto r2 = run(concat(base, {"--jobs", "1", "--out", (root_ / "o2").string()}));
  ASSERT_EQ(r2.code, 0) << r2.err;
  const auto r8 = run(concat(base, {"--jobs", "8", "--out", (root_ / "o8").string()}));
  ASSERT_EQ(r8.code, 0) << r8.err;

  const auto f1 = sorted_files(root_ / "o1");
  EXPECT_EQ(f1.size(), 12u);  // 10 images, the manifest and the run config
  for (const char* other : {"o2", "o8"}) {
    const auto f = sorted_files(root_ / other);
    ASSERT_EQ(f.size(), f1.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
      EXPECT_EQ(f[i].filename(), f1[i].filename());
      if (f[i].extension() == ".png") EXPECT_EQ(read_bytes(f[i]), read_bytes(f1[i])) << f[i];
    }
  }
  const DatasetManifest out = load_manifest(root_ / "o1" / "degraded_manifest.tsv");
  ASSERT_EQ(out.entries.size(), 10u);
  for (const auto& e : out.entries) {
    EXPECT_EQ(e.status, "ok");
    EXPECT_TRUE(e.seed.has_value());
  }
  ASSERT_FALSE(out.config.empty());
  EXPECT_NE(out.config.back().find("\"pupil_samples\": 32"), std::string::npos);
}

TEST_F(CliTest, DegradeUsesPsfCache) {
  ASSERT_EQ(run({"gen", "--level", "C2", "--seed", "3", "--out", (root_ / "s").string()}).code, 0);
  ASSERT_EQ(run(concat({"psf", "--samples", (root_ / "s").string(), "--out", (root_ / "cache").string()}, light_optics_flags())).code, 0);
  const VplSample s = load_vpl_sample(first_sample(root_ / "s"));
  EXPECT_TRUE(fs::exists(root_ / "cache" / (s.id + ".psf")));

  const fs::path manifest = make_manifest();
  const auto base = concat({"degrade", "--manifest", manifest.string(), "--samples", (root_ / "s").string()}, light_optics_flags());
  ASSERT_EQ(run(concat(base, {"--out", (root_ / "fresh").string()})).code, 0);
  ASSERT_EQ(run(concat(base, {"--psf-cache", (root_ / "cache").string(), "--out", (root_ / "cached").string()})).code, 0);
  for (int i = 0; i < 10; ++i) {
    const std::string name = "frame" + std::to_string(i) + "__" + s.id + ".png";
    EXPECT_EQ(read_bytes(root_ / "fresh" / name), read_bytes(root_ / "cached" / name)) << name;
  }
}

TEST_F(CliTest, DegradeSingleImageAndSummary) {
  make_manifest();
  ASSERT_EQ(run({"gen", "--level", "H1", "--count", "2", "--seed", "5", "--out", (root_ / "s").string()}).code, 0);
  const auto r = run(concat({"--json-summary", (root_ / "summary.json").string(), "degrade", "--image",
                             (root_ / "data" / "img" / "frame0.png").string(), "--samples", (root_ / "s").string(), "--out",
                             (root_ / "o").string()},
                            light_optics_flags()));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = nlohmann::json::parse(read_bytes(root_ / "summary.json"));
  EXPECT_EQ(doc.at("command"), "degrade");
  EXPECT_EQ(doc.at("succeeded"), 1);
  const std::string output = doc.at("entries").at(0).at("output").get<std::string>();
  EXPECT_TRUE(fs::exists(root_ / "o" / output) || fs::exists(output));
  EXPECT_EQ(run(concat({"degrade", "--samples", (root_ / "s").string(), "--out", (root_ / "o").string()}, light_optics_flags())).code, 2);
}

TEST_F(CliTest, ConfigFileAndFlagPrecedence) {
  std::ofstream(root_ / "cfg.json") << R"({"optics": {"pupil_samples": 32, "padding_factor": 2, "diffraction_window": 63,
    "psf_kernel_size": 15, "pixel_pitch_um": 40.0, "truncation_threshold": 0.05}, "layout": {"patch_size": 48, "overlap": 8}})";
  ASSERT_EQ(run({"gen", "--level", "C1", "--seed", "2", "--out", (root_ / "s").string()}).code, 0);
  const auto r = run({"--config", (root_ / "cfg.json").string(), "psf", "--samples", (root_ / "s").string(), "--out",
                      (root_ / "p").string(), "--kernel-size", "11"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = nlohmann::json::parse(read_bytes(root_ / "p" / "run_config.json"));
  const auto& cfg = doc.at("config");
  EXPECT_EQ(cfg.at("optics").at("pupil_samples"), 32);
  EXPECT_EQ(cfg.at("optics").at("psf_kernel_size"), 11);
  EXPECT_EQ(cfg.at("layout").at("patch_size"), 48);
  EXPECT_FALSE(cfg.contains("jobs"));
  for (const auto& p : sorted_files(root_ / "p")) {
    if (p.extension() == ".psf") EXPECT_EQ(load_psf_grid(p).kernel_size(), 11);
  }
}

TEST_F(CliTest, EvalReportsMiou) {
  fs::create_directories(root_ / "pred");
  fs::create_directories(root_ / "gt");
  // One 2x2 image per side: gt [0 0; 1 1], pred [0 1; 1 1] -> IoU 1/2 and 2/3.
  const LabelMap gt{2, 2, {0, 0, 1, 1}};
  const LabelMap pred{2, 2, {0, 1, 1, 1}};
  write_gray_png(gt, root_ / "gt" / "a.png");
  write_gray_png(pred, root_ / "pred" / "a.png");
  const auto r = run({"--json-summary", (root_ / "iou.json").string(), "eval", "--pred", (root_ / "pred").string(), "--gt",
                      (root_ / "gt").string(), "--classes", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("mIoU"), std::string::npos);
  const auto doc = nlohmann::json::parse(read_bytes(root_ / "iou.json"));
  EXPECT_NEAR(doc.at("miou").get<double>(), 7.0 / 12.0, 1e-15);
}
