#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "vpl/errors.hpp"
#include "vpl/render.hpp"

using namespace vpl;

namespace {

RgbImage random_image(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RgbImage img(w, h);
  for (int c = 0; c < 3; ++c) {
    for (double& v : img.plane(c)) v = u(rng);
  }
  return img;
}

PsfKernel random_kernel(int size, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PsfKernel k;
  k.size = size;
  k.pitch_um = 10.0;
  k.weights.resize(static_cast<std::size_t>(size) * size);
  double s = 0.0;
  for (double& v : k.weights) s += (v = u(rng));
  for (double& v : k.weights) v /= s;
  return k;
}

PsfGrid random_grid(int size, std::uint64_t seed, bool uniform = false) {
  std::mt19937_64 rng(seed);
  PsfGrid grid = delta_grid(size, 10.0);
  const PsfKernel shared = random_kernel(size, rng);
  for (int fov = 0; fov < kFovCount; ++fov) {
    for (int ch = 0; ch < kChannels; ++ch) {
      PsfKernel k = uniform ? shared : random_kernel(size, rng);
      k.fov_index = fov;
      k.channel = static_cast<Channel>(ch);
      grid.kernels[static_cast<std::size_t>(fov) * kChannels + ch] = std::move(k);
    }
  }
  return grid;
}

int reflect_index(int i, int n) {
  while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - 1 - i;
  return i;
}

// Direct spatial convolution with reflect padding.
double dense_conv(const RgbImage& img, const PsfKernel& k, int c, int y, int x) {
  const int r = k.radius();
  double acc = 0.0;
  for (int i = 0; i < k.size; ++i) {
    for (int j = 0; j < k.size; ++j) {
      acc += k.at(i, j) * img.at(c, reflect_index(y - (i - r), img.height()), reflect_index(x - (j - r), img.width()));
    }
  }
  return acc;
}

}  // namespace

TEST(FovOfPixel, RadialMapping) {
  const auto centre = fov_of_pixel(50, 50, 101, 101);
  EXPECT_EQ(centre.field, 0.0);
  EXPECT_EQ(centre.index, 0);
  for (auto [x, y] : {std::pair{0, 0}, {100, 0}, {0, 100}, {100, 100}}) {
    const auto p = fov_of_pixel(x, y, 101, 101);
    EXPECT_DOUBLE_EQ(p.field, 1.0);
    EXPECT_EQ(p.index, 127);
  }
  const auto half = fov_of_pixel(75, 75, 101, 101);
  EXPECT_DOUBLE_EQ(half.field, 0.5);
  EXPECT_EQ(half.index, 63);
  EXPECT_EQ(fov_of_pixel(511.5, 255.5, 1024, 512).index, 0);
}

TEST(PatchLayout, Origins) {
  EXPECT_EQ(patch_origins(64, 64, 16), (std::vector<int>{0}));
  EXPECT_EQ(patch_origins(30, 64, 16), (std::vector<int>{0}));
  EXPECT_EQ(patch_origins(100, 64, 16), (std::vector<int>{0, 36}));
  EXPECT_EQ(patch_origins(200, 64, 16), (std::vector<int>{0, 48, 96, 136}));
  EXPECT_EQ(patch_origins(160, 64, 16), (std::vector<int>{0, 48, 96}));
  EXPECT_THROW((PatchLayout{16, 16}.validate()), ConfigError);
  EXPECT_THROW((PatchLayout{16, -1}.validate()), ConfigError);
}

TEST(PatchLayout, BlendWeightsFormPartitionOfUnity) {
  for (auto [w, h] : {std::pair{64, 64}, {100, 37}, {257, 129}, {20, 300}}) {
    const PatchLayout layout;
    const auto norm = blend_normalizer(layout, w, h);
    std::vector<double> sum(norm.size(), 0.0);
    for (const Patch& p : layout_patches(layout, w, h)) {
      for (int y = 0; y < p.height; ++y) {
        for (int x = 0; x < p.width; ++x) {
          const std::size_t i = static_cast<std::size_t>(p.y0 + y) * w + p.x0 + x;
          sum[i] += blend_weight(y, p.height, layout.overlap) * blend_weight(x, p.width, layout.overlap) / norm[i];
        }
      }
    }
    for (double s : sum) ASSERT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(DegradeImage, DeltaGridIsIdentity) {
  const RgbImage img = random_image(150, 97, 1);
  const RgbImage out = degrade_image(img, delta_grid(63, 20.0));
  for (std::size_t i = 0; i < img.values().size(); ++i) ASSERT_NEAR(out.values()[i], img.values()[i], 1e-6);
}

TEST(DegradeImage, SinglePatchMatchesDenseConvolution) {
  const RgbImage img = random_image(128, 128, 2);
  const PsfGrid grid = random_grid(15, 3, true);
  RenderOptions opt;
  opt.layout = {128, 0};
  const RgbImage out = degrade_image(img, grid, opt);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 128; ++y) {
      for (int x = 0; x < 128; ++x) ASSERT_NEAR(out.at(c, y, x), dense_conv(img, grid.at(0, c), c, y, x), 1e-8);
    }
  }
}

TEST(DegradeImage, BlendedPatchesMatchDirectFormula) {
  const int w = 100, h = 80;
  const RgbImage img = random_image(w, h, 4);
  const PsfGrid grid = random_grid(9, 5);
  RenderOptions opt;
  opt.layout = {32, 8};
  const RgbImage out = degrade_image(img, grid, opt);
  const auto patches = layout_patches(opt.layout, w, h);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < h; y += 3) {
      for (int x = 0; x < w; x += 3) {
        double num = 0.0, den = 0.0;
        for (const Patch& p : patches) {
          if (x < p.x0 || x >= p.x0 + p.width || y < p.y0 || y >= p.y0 + p.height) continue;
          const double wt = blend_weight(y - p.y0, p.height, 8) * blend_weight(x - p.x0, p.width, 8);
          num += wt * dense_conv(img, grid.at(p.fov, c), c, y, x);
          den += wt;
        }
        ASSERT_NEAR(out.at(c, y, x), num / den, 1e-10);
      }
    }
  }
}

TEST(DegradeImage, FlatFieldIsPreserved) {
  const RgbImage img(120, 90, 0.37);
  const RgbImage out = degrade_image(img, random_grid(31, 6));
  for (double v : out.values()) ASSERT_NEAR(v, 0.37, 1e-6);
}

TEST(DegradeImage, MeanIsPreservedForCentredKernels) {
  // Reflect padding trades border mass symmetrically, so the global mean only drifts through
  // the odd moments of the kernels; diffraction kernels are centred on their centroid.
  DiffractionConfig cfg;
  cfg.pupil_samples = 64;
  cfg.padding_factor = 2;
  cfg.diffraction_window = 127;
  cfg.psf_kernel_size = 31;
  cfg.pixel_pitch_um = 40.0;
  const RgbImage img = random_image(300, 200, 7);
  for (const char* id : {"C4", "H4"}) {
    const LevelSpec spec = level_spec(id);
    const RgbImage out = degrade_image(img, build_psf_grid(sample_vpl(spec, spec.behavior, 3), cfg, 1));
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < img.values().size(); ++i) {
      a += img.values()[i];
      b += out.values()[i];
    }
    EXPECT_NEAR(b / img.values().size(), a / img.values().size(), 1e-4) << id;
  }
}

TEST(DegradeImage, MirrorSymmetricKernelPreservesSum) {
  std::mt19937_64 rng(21);
  PsfKernel k = random_kernel(11, rng);
  PsfKernel mirrored = k;
  for (int i = 0; i < 11; ++i) {
    for (int j = 0; j < 11; ++j) {
      mirrored.weights[static_cast<std::size_t>(i) * 11 + j] =
          0.25 * (k.at(i, j) + k.at(10 - i, j) + k.at(i, 10 - j) + k.at(10 - i, 10 - j));
    }
  }
  k = mirrored;
  PsfGrid grid = delta_grid(11, 10.0);
  for (auto& slot : grid.kernels) {
    const int fov = slot.fov_index;
    const Channel ch = slot.channel;
    slot = k;
    slot.fov_index = fov;
    slot.channel = ch;
  }
  const RgbImage img = random_image(90, 70, 22);
  const RgbImage out = degrade_image(img, grid);
  double a = 0.0, b = 0.0;
  for (std::size_t i = 0; i < img.values().size(); ++i) {
    a += img.values()[i];
    b += out.values()[i];
  }
  EXPECT_NEAR(b, a, 1e-9);
}

TEST(DegradeImage, ChangingOneFovIsLocal) {
  const int w = 160, h = 120;
  const RgbImage img = random_image(w, h, 8);
  PsfGrid grid = random_grid(9, 9);
  const RgbImage before = degrade_image(img, grid);
  const auto patches = layout_patches(PatchLayout{}, w, h);
  const int target = patches[5].fov;
  std::mt19937_64 rng(10);
  for (int ch = 0; ch < kChannels; ++ch) {
    PsfKernel k = random_kernel(9, rng);
    k.fov_index = target;
    k.channel = static_cast<Channel>(ch);
    grid.kernels[static_cast<std::size_t>(target) * kChannels + ch] = k;
  }
  const RgbImage after = degrade_image(img, grid);
  int changed = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool covered = false;
      for (const Patch& p : patches) {
        covered = covered || (p.fov == target && x >= p.x0 && x < p.x0 + p.width && y >= p.y0 && y < p.y0 + p.height);
      }
      for (int c = 0; c < 3; ++c) {
        if (!covered) ASSERT_EQ(after.at(c, y, x), before.at(c, y, x));
        changed += after.at(c, y, x) != before.at(c, y, x);
      }
    }
  }
  EXPECT_GT(changed, 0);
}

TEST(DegradeImage, IndependentOfThreadCount) {
  const RgbImage img = random_image(300, 200, 11);
  const PsfGrid grid = random_grid(21, 12);
  RenderOptions one, four;
  four.jobs = 4;
  EXPECT_EQ(degrade_image(img, grid, one), degrade_image(img, grid, four));
}

TEST(DegradeImage, ConfigurationErrors) {
  const RgbImage img = random_image(64, 64, 13);
  RenderOptions opt;
  opt.layout = {32, 16};
  EXPECT_THROW(degrade_image(img, delta_grid(63, 20.0), opt), ConfigError);
  PsfGrid grid = delta_grid(9, 20.0);
  grid.config.pixel_pitch_um = 10.0;
  EXPECT_THROW(degrade_image(img, grid), ConfigError);
}

TEST(Srgb, EightBitRoundTrip) {
  for (int i = 0; i < 256; ++i) {
    RgbImage px(1, 1, srgb_to_linear(i / 255.0));
    ASSERT_EQ(encode_srgb8(px)[0], i);
  }
  EXPECT_NEAR(linear_to_srgb(srgb_to_linear(0.5)), 0.5, 1e-15);
}

TEST(ImageIo, PngRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "vpl_render_roundtrip.png";
  const RgbImage img = random_image(31, 17, 14);
  save_image(img, path);
  const RgbImage back = load_image(path);
  ASSERT_EQ(back.width(), 31);
  ASSERT_EQ(back.height(), 17);
  EXPECT_EQ(encode_srgb8(back), encode_srgb8(img));
  std::filesystem::remove(path);
  EXPECT_THROW(load_image(path), std::runtime_error);
}

TEST(Checkerboard, PatternAndSharpness) {
  const RgbImage board = make_checkerboard(512, 512, 24);
  EXPECT_EQ(board.at(0, 256, 256), 1.0);
  EXPECT_EQ(board.at(0, 256, 255), 0.0);
  EXPECT_EQ(board.at(1, 232, 232), 1.0);
  const RadialSharpness s = radial_sharpness(board);
  EXPECT_GT(s.center, 0.0);
  EXPECT_NEAR(s.ratio(), 1.0, 0.05);
}

TEST(Checkerboard, ZeroAberrationKeepsContrast) {
  VplSample s = sample_vpl(level_spec("H1"), Behavior::kHrdl, 1);
  s.coeffs = ZernikeField{};
  s.radius_targets.fill(0.0);
  CheckerboardOptions opt;
  opt.width = 256;
  opt.height = 192;
  const RgbImage out = render_checkerboard(s, DiffractionConfig{}, opt);
  const RadialSharpness in = radial_sharpness(make_checkerboard(256, 192, opt.square_px));
  const RadialSharpness got = radial_sharpness(out);
  EXPECT_GE(got.center, 0.95 * in.center);
  EXPECT_GE(got.edge, 0.95 * in.edge);
}

TEST(Checkerboard, BlurLowersSharpness) {
  const RgbImage board = make_checkerboard(128, 128, 12);
  const RgbImage blurred = degrade_image(board, random_grid(15, 15, true));
  EXPECT_LT(radial_sharpness(blurred).center, radial_sharpness(board).center);
}
