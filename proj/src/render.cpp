#include "vpl/render.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>

#include "fft.hpp"
#include "vpl/errors.hpp"
#include "vpl/parallel.hpp"

namespace vpl {

namespace {

// Half-sample symmetric reflection: ... 2 1 0 | 0 1 2 ... W-1 | W-1 W-2 ...
int reflect(int i, int n) {
  const int period = 2 * n;
  int m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - 1 - m;
}

using Spectrum = std::vector<std::complex<double>>;

// Kernel spectra keyed by (fov, channel, rows, cols). The first request computes, later ones
// share; the values do not depend on which thread got there first.
class SpectrumCache {
 public:
  explicit SpectrumCache(const PsfGrid& grid) : grid_(grid) {}

  std::shared_ptr<const Spectrum> get(int fov, int channel, int rows, int cols) {
    const auto key = std::make_tuple(fov, channel, rows, cols);
    {
      std::lock_guard lock(mutex_);
      if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    auto spectrum = std::make_shared<const Spectrum>(compute(grid_.at(fov, channel), rows, cols));
    std::lock_guard lock(mutex_);
    return cache_.emplace(key, std::move(spectrum)).first->second;
  }

 private:
  static Spectrum compute(const PsfKernel& k, int rows, int cols) {
    const int r = k.radius();
    const int half = cols / 2 + 1;
    auto in = fft::alloc_real(static_cast<std::size_t>(rows) * cols);
    auto out = fft::alloc_complex(static_cast<std::size_t>(rows) * half);
    std::fill_n(in.get(), static_cast<std::size_t>(rows) * cols, 0.0);
    // Centre tap at index 0, negative offsets wrapped to the end.
    for (int i = 0; i < k.size; ++i) {
      const int y = (i - r + rows) % rows;
      for (int j = 0; j < k.size; ++j) {
        const int x = (j - r + cols) % cols;
        in[static_cast<std::size_t>(y) * cols + x] += k.at(i, j);
      }
    }
    fft::forward_real_2d(in.get(), out.get(), rows, cols);
    return Spectrum(out.get(), out.get() + static_cast<std::size_t>(rows) * half);
  }

  const PsfGrid& grid_;
  std::mutex mutex_;
  std::map<std::tuple<int, int, int, int>, std::shared_ptr<const Spectrum>> cache_;
};

void check_grid(const PsfGrid& grid, const PatchLayout& layout) {
  layout.validate();
  grid.validate();
  if (grid.pitch_um() != grid.config.pixel_pitch_um) {
    throw ConfigError("PSF grid pitch differs from its sensor pitch; resample the grid first");
  }
  if (grid.kernel_size() > layout.patch_size + layout.overlap) {
    throw ConfigError("kernel size " + std::to_string(grid.kernel_size()) + " exceeds patch_size + overlap (" +
                      std::to_string(layout.patch_size + layout.overlap) + ")");
  }
}

std::vector<double> axis_weight_sums(int extent, int patch, int overlap) {
  std::vector<double> sums(static_cast<std::size_t>(extent), 0.0);
  const int len = std::min(patch, extent);
  for (int o : patch_origins(extent, patch, overlap)) {
    for (int u = 0; u < len; ++u) sums[static_cast<std::size_t>(o + u)] += blend_weight(u, len, overlap);
  }
  return sums;
}

}  // namespace

FieldPosition fov_of_pixel(double x, double y, int width, int height) {
  const double cx = (width - 1) / 2.0;
  const double cy = (height - 1) / 2.0;
  const double corner = std::hypot(cx, cy);
  FieldPosition p;
  p.field = corner > 0.0 ? std::min(1.0, std::hypot(x - cx, y - cy) / corner) : 0.0;
  p.index = std::min(kFovCount - 1, static_cast<int>(std::floor(p.field * 127.999)));
  return p;
}

void PatchLayout::validate() const {
  if (patch_size < 1) throw ConfigError("patch_size must be positive");
  if (overlap < 0 || overlap >= patch_size) throw ConfigError("overlap must lie in [0, patch_size)");
}

std::vector<int> patch_origins(int extent, int patch, int overlap) {
  if (extent <= patch) return {0};
  const int stride = patch - overlap;
  std::vector<int> origins;
  for (int o = 0; o + patch < extent; o += stride) origins.push_back(o);
  if (origins.back() != extent - patch) origins.push_back(extent - patch);
  return origins;
}

std::vector<Patch> layout_patches(const PatchLayout& layout, int width, int height) {
  layout.validate();
  const auto xs = patch_origins(width, layout.patch_size, layout.overlap);
  const auto ys = patch_origins(height, layout.patch_size, layout.overlap);
  const int w = std::min(layout.patch_size, width);
  const int h = std::min(layout.patch_size, height);
  std::vector<Patch> patches;
  patches.reserve(xs.size() * ys.size());
  for (int y0 : ys) {
    for (int x0 : xs) {
      const int fov = fov_of_pixel(x0 + (w - 1) / 2.0, y0 + (h - 1) / 2.0, width, height).index;
      patches.push_back({x0, y0, w, h, fov});
    }
  }
  return patches;
}

double blend_weight(int u, int len, int overlap) {
  const double ramp = overlap + 1.0;
  return std::min({1.0, (u + 1) / ramp, (len - u) / ramp});
}

std::vector<double> blend_normalizer(const PatchLayout& layout, int width, int height) {
  layout.validate();
  const auto wx = axis_weight_sums(width, layout.patch_size, layout.overlap);
  const auto wy = axis_weight_sums(height, layout.patch_size, layout.overlap);
  std::vector<double> norm(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) norm[static_cast<std::size_t>(y) * width + x] = wx[static_cast<std::size_t>(x)] * wy[static_cast<std::size_t>(y)];
  }
  return norm;
}

RgbImage degrade_image(const RgbImage& image, const PsfGrid& grid, const RenderOptions& options) {
  check_grid(grid, options.layout);
  const int width = image.width();
  const int height = image.height();
  const int r = grid.kernels.front().radius();
  const auto patches = layout_patches(options.layout, width, height);
  SpectrumCache spectra(grid);

  // Each tile keeps its own convolved pixels; blending happens afterwards in tile order.
  std::vector<std::vector<double>> tiles(patches.size());
  parallel_for(patches.size(), options.jobs, [&](std::size_t t) {
    const Patch& p = patches[t];
    const int rows = fft::fast_size(p.height + 2 * r);
    const int cols = fft::fast_size(p.width + 2 * r);
    const int half = cols / 2 + 1;
    auto buf = fft::alloc_real(static_cast<std::size_t>(rows) * cols);
    auto spec = fft::alloc_complex(static_cast<std::size_t>(rows) * half);
    std::vector<double>& out = tiles[t];
    out.resize(static_cast<std::size_t>(p.width) * p.height * 3);
    const double inv = 1.0 / (double(rows) * cols);
    for (int c = 0; c < 3; ++c) {
      std::fill_n(buf.get(), static_cast<std::size_t>(rows) * cols, 0.0);
      for (int y = 0; y < p.height + 2 * r; ++y) {
        const int sy = reflect(p.y0 - r + y, height);
        double* dst = buf.get() + static_cast<std::size_t>(y) * cols;
        for (int x = 0; x < p.width + 2 * r; ++x) dst[x] = image.at(c, sy, reflect(p.x0 - r + x, width));
      }
      fft::forward_real_2d(buf.get(), spec.get(), rows, cols);
      const auto kernel = spectra.get(p.fov, c, rows, cols);
      for (std::size_t i = 0; i < kernel->size(); ++i) spec[i] *= (*kernel)[i];
      fft::inverse_real_2d(spec.get(), buf.get(), rows, cols);
      for (int y = 0; y < p.height; ++y) {
        const double* src = buf.get() + static_cast<std::size_t>(y + r) * cols + r;
        double* dst = out.data() + (static_cast<std::size_t>(c) * p.height + y) * p.width;
        for (int x = 0; x < p.width; ++x) dst[x] = src[x] * inv;
      }
    }
  });

  RgbImage result(width, height, 0.0);
  result.source = image.source;
  const int overlap = options.layout.overlap;
  for (std::size_t t = 0; t < patches.size(); ++t) {
    const Patch& p = patches[t];
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < p.height; ++y) {
        const double wy = blend_weight(y, p.height, overlap);
        const double* src = tiles[t].data() + (static_cast<std::size_t>(c) * p.height + y) * p.width;
        for (int x = 0; x < p.width; ++x) result.at(c, p.y0 + y, p.x0 + x) += wy * blend_weight(x, p.width, overlap) * src[x];
      }
    }
  }
  const auto norm = blend_normalizer(options.layout, width, height);
  for (int c = 0; c < 3; ++c) {
    auto plane = result.plane(c);
    for (std::size_t i = 0; i < plane.size(); ++i) plane[i] = std::clamp(plane[i] / norm[i], 0.0, 1.0);
  }
  return result;
}

RgbImage make_checkerboard(int width, int height, int square_px) {
  if (square_px < 1) throw std::invalid_argument("square size must be positive");
  RgbImage img(width, height);
  for (int y = 0; y < height; ++y) {
    const auto iy = static_cast<long>(std::floor((y - height / 2) / static_cast<double>(square_px)));
    for (int x = 0; x < width; ++x) {
      const auto ix = static_cast<long>(std::floor((x - width / 2) / static_cast<double>(square_px)));
      const double v = ((ix + iy) & 1) == 0 ? 1.0 : 0.0;
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = v;
    }
  }
  return img;
}

RgbImage render_checkerboard(const PsfGrid& grid, const CheckerboardOptions& options) {
  if (options.width < grid.kernel_size() || options.height < grid.kernel_size()) {
    throw ConfigError("checkerboard must be at least as large as the kernels");
  }
  return degrade_image(make_checkerboard(options.width, options.height, options.square_px), grid, options.render);
}

RgbImage render_checkerboard(const VplSample& vpl, const DiffractionConfig& cfg, const CheckerboardOptions& options) {
  return render_checkerboard(build_psf_grid(vpl, cfg, options.render.jobs), options);
}

RadialSharpness radial_sharpness(const RgbImage& image) {
  const int w = image.width();
  const int h = image.height();
  double sum_c = 0, sum_e = 0;
  long n_c = 0, n_e = 0;
  auto lum = [&](int y, int x) { return (image.at(0, y, x) + image.at(1, y, x) + image.at(2, y, x)) / 3.0; };
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      const double field = fov_of_pixel(x, y, w, h).field;
      const bool center = field <= 0.2;
      const bool edge = field >= 0.8;
      if (!center && !edge) continue;
      const double gx = 0.5 * (lum(y, x + 1) - lum(y, x - 1));
      const double gy = 0.5 * (lum(y + 1, x) - lum(y - 1, x));
      const double g = std::hypot(gx, gy);
      if (center) {
        sum_c += g;
        ++n_c;
      } else {
        sum_e += g;
        ++n_e;
      }
    }
  }
  RadialSharpness s;
  s.center = n_c > 0 ? sum_c / n_c : 0.0;
  s.edge = n_e > 0 ? sum_e / n_e : 0.0;
  return s;
}

PsfGrid delta_grid(int kernel_size, double pitch_um) {
  if (kernel_size < 1 || kernel_size % 2 == 0) throw std::invalid_argument("kernel size must be odd");
  PsfGrid grid;
  grid.source_id = "delta";
  grid.config.psf_kernel_size = kernel_size;
  grid.config.pixel_pitch_um = pitch_um;
  grid.kernels.resize(static_cast<std::size_t>(kFovCount) * kChannels);
  for (int fov = 0; fov < kFovCount; ++fov) {
    for (int ch = 0; ch < kChannels; ++ch) {
      PsfKernel& k = grid.kernels[static_cast<std::size_t>(fov) * kChannels + ch];
      k.size = kernel_size;
      k.pitch_um = pitch_um;
      k.fov_index = fov;
      k.channel = static_cast<Channel>(ch);
      k.weights.assign(static_cast<std::size_t>(kernel_size) * kernel_size, 0.0);
      k.weights[static_cast<std::size_t>(kernel_size / 2) * kernel_size + kernel_size / 2] = 1.0;
    }
  }
  return grid;
}

}  // namespace vpl
