#pragma once

// Spatially-variant degradation: every patch of an image is convolved, per channel, with the
// kernel of the FoV bin its centre falls in, and overlapping patches are blended.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vpl/diffraction.hpp"

namespace vpl {

/// Linear-light RGB image, planar storage (plane c, row y, column x).
class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(int width, int height, double fill = 0.0);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t plane_size() const noexcept { return static_cast<std::size_t>(width_) * height_; }

  double& at(int channel, int y, int x) { return data_[offset(channel, y, x)]; }
  double at(int channel, int y, int x) const { return data_[offset(channel, y, x)]; }
  std::span<double> plane(int channel) { return {data_.data() + channel * plane_size(), plane_size()}; }
  std::span<const double> plane(int channel) const { return {data_.data() + channel * plane_size(), plane_size()}; }
  std::span<const double> values() const noexcept { return data_; }

  std::filesystem::path source;  ///< empty for synthesized images

  friend bool operator==(const RgbImage& a, const RgbImage& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.data_ == b.data_;
  }

 private:
  std::size_t offset(int channel, int y, int x) const {
    return static_cast<std::size_t>(channel) * plane_size() + static_cast<std::size_t>(y) * width_ + x;
  }
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

double srgb_to_linear(double v);
double linear_to_srgb(double v);

/// Reads an 8- or 16-bit PNG (grey, RGB or RGBA) and decodes sRGB to linear light.
RgbImage load_image(const std::filesystem::path& path);
/// Encodes to sRGB and writes an 8-bit RGB PNG.
void save_image(const RgbImage& image, const std::filesystem::path& path);
/// The exact bytes save_image would quantize to, row-major interleaved RGB.
std::vector<std::uint8_t> encode_srgb8(const RgbImage& image);

struct FieldPosition {
  double field = 0.0;  ///< 0 at the image centre, 1 at the corners
  int index = 0;       ///< FoV bin in [0, kFovCount)
};

/// Radial FoV of pixel (x, y) in a width x height image.
FieldPosition fov_of_pixel(double x, double y, int width, int height);

struct PatchLayout {
  int patch_size = 64;
  int overlap = 16;

  /// Throws ConfigError unless 0 <= overlap < patch_size.
  void validate() const;
  int stride() const noexcept { return patch_size - overlap; }

  friend bool operator==(const PatchLayout&, const PatchLayout&) = default;
};

/// One tile of the layout over an image. Border tiles are shifted inwards so every tile has
/// the full patch size, unless the image is smaller than a patch.
struct Patch {
  int x0 = 0, y0 = 0;
  int width = 0, height = 0;
  int fov = 0;
};

/// Start offsets along one axis: multiples of the stride, the last one clamped to extent - patch.
std::vector<int> patch_origins(int extent, int patch, int overlap);
std::vector<Patch> layout_patches(const PatchLayout& layout, int width, int height);

/// Blend weight of offset u inside a tile of length len: a trapezoid rising over `overlap`
/// pixels at both ends.
double blend_weight(int u, int len, int overlap);

/// Sum of blend weights per pixel, row-major; normalizing by it makes a partition of unity.
std::vector<double> blend_normalizer(const PatchLayout& layout, int width, int height);

struct RenderOptions {
  PatchLayout layout;
  int jobs = 1;
};

/// Convolves each patch per channel with grid.at(patch fov, channel), reflect padding at the
/// image border, tent blending across overlaps, output clipped to [0, 1]. Throws ConfigError
/// when a kernel is wider than patch + overlap.
RgbImage degrade_image(const RgbImage& image, const PsfGrid& grid, const RenderOptions& options = {});

/// Black/white squares of side square_px in linear light, phase-locked to the image centre.
RgbImage make_checkerboard(int width, int height, int square_px);

struct CheckerboardOptions {
  int width = 512;
  int height = 512;
  int square_px = 24;
  RenderOptions render;
};

/// Degrades a checkerboard through the sample's PSF grid (built with cfg).
RgbImage render_checkerboard(const VplSample& vpl, const DiffractionConfig& cfg, const CheckerboardOptions& options = {});
RgbImage render_checkerboard(const PsfGrid& grid, const CheckerboardOptions& options = {});

struct RadialSharpness {
  double center = 0.0;  ///< mean gradient magnitude where field <= 0.2
  double edge = 0.0;    ///< mean gradient magnitude where field >= 0.8
  double ratio() const { return edge / center; }
};

/// Mean central-difference gradient magnitude of the channel-averaged image over the central
/// disk and the outer annulus.
RadialSharpness radial_sharpness(const RgbImage& image);

/// A grid whose kernels are all unit impulses.
PsfGrid delta_grid(int kernel_size, double pitch_um);

}  // namespace vpl
