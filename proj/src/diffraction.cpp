#include "vpl/diffraction.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <boost/math/tools/roots.hpp>
#include <json.hpp>

#include "fft.hpp"
#include "vpl/errors.hpp"
#include "vpl/parallel.hpp"

namespace vpl {

namespace {

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

// Integral of the unit tent (half-width 1) from -inf to u.
double tent_cdf(double u) {
  if (u <= -1.0) return 0.0;
  if (u >= 1.0) return 1.0;
  return u < 0.0 ? 0.5 * (1.0 + u) * (1.0 + u) : 1.0 - 0.5 * (1.0 - u) * (1.0 - u);
}

// Where the mass of one input sample lands along one output axis.
struct Taps {
  int first = 0;
  std::vector<double> w;
};

// Input sample i sits at offset (i - centre - centroid) input pixels from the centroid. Its
// bilinear tent, magnified by m, is integrated over each output pixel of the window.
std::vector<Taps> axis_taps(int in_size, double centroid, double m, int out_size) {
  const double in_center = (in_size - 1) / 2.0;
  const double out_center = (out_size - 1) / 2.0;
  std::vector<Taps> taps(static_cast<std::size_t>(in_size));
  for (int i = 0; i < in_size; ++i) {
    const double x = out_center + (i - in_center - centroid) * m;
    Taps& t = taps[static_cast<std::size_t>(i)];
    const int lo = std::max(0, static_cast<int>(std::ceil(x - m - 0.5)));
    const int hi = std::min(out_size - 1, static_cast<int>(std::floor(x + m + 0.5)));
    t.first = lo;
    if (hi < lo) continue;
    t.w.resize(static_cast<std::size_t>(hi - lo + 1));
    double prev = tent_cdf((lo - 0.5 - x) / m);
    for (int o = lo; o <= hi; ++o) {
      const double next = tent_cdf((o + 0.5 - x) / m);
      t.w[static_cast<std::size_t>(o - lo)] = next - prev;
      prev = next;
    }
  }
  return taps;
}

struct AxisMoments {
  std::vector<double> m0, m1, m2;  // per input index: sum of w, w*d, w*d^2 with d = o - centre
  bool lossless = true;            // every m0 == 1
};

AxisMoments axis_moments(const std::vector<Taps>& taps, int out_size) {
  const double c = (out_size - 1) / 2.0;
  AxisMoments am;
  am.m0.resize(taps.size());
  am.m1.resize(taps.size());
  am.m2.resize(taps.size());
  for (std::size_t i = 0; i < taps.size(); ++i) {
    double s0 = 0, s1 = 0, s2 = 0;
    for (std::size_t k = 0; k < taps[i].w.size(); ++k) {
      const double d = taps[i].first + static_cast<double>(k) - c;
      s0 += taps[i].w[k];
      s1 += taps[i].w[k] * d;
      s2 += taps[i].w[k] * d * d;
    }
    am.m0[i] = s0;
    am.m1[i] = s1;
    am.m2[i] = s2;
    if (s0 != 1.0) am.lossless = false;
  }
  return am;
}

// RMS radius in output pixels of the resampled kernel, from separable moments only.
double resampled_rms_px(const PsfKernel& psf, const std::vector<double>& row_sums, const std::vector<double>& col_sums,
                        double m, int out_size) {
  const AxisMoments ax = axis_moments(axis_taps(psf.size, psf.centroid_x, m, out_size), out_size);
  const AxisMoments ay = axis_moments(axis_taps(psf.size, psf.centroid_y, m, out_size), out_size);
  double m0 = 0, m1x = 0, m2x = 0, m1y = 0, m2y = 0;
  if (ax.lossless && ay.lossless) {
    for (int i = 0; i < psf.size; ++i) {
      const auto k = static_cast<std::size_t>(i);
      m0 += row_sums[k];
      m1x += col_sums[k] * ax.m1[k];
      m2x += col_sums[k] * ax.m2[k];
      m1y += row_sums[k] * ay.m1[k];
      m2y += row_sums[k] * ay.m2[k];
    }
  } else {
    for (int r = 0; r < psf.size; ++r) {
      const auto kr = static_cast<std::size_t>(r);
      if (ay.m0[kr] == 0.0) continue;
      double s0 = 0, s1 = 0, s2 = 0;
      const double* row = psf.weights.data() + kr * psf.size;
      for (int c = 0; c < psf.size; ++c) {
        const auto kc = static_cast<std::size_t>(c);
        const double v = row[c] * ax.m0[kc];
        s0 += v;
        s1 += row[c] * ax.m1[kc];
        s2 += row[c] * ax.m2[kc];
      }
      m0 += ay.m0[kr] * s0;
      m1x += ay.m0[kr] * s1;
      m2x += ay.m0[kr] * s2;
      m1y += ay.m1[kr] * s0;
      m2y += ay.m2[kr] * s0;
    }
  }
  if (!(m0 > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  const double mx = m1x / m0;
  const double my = m1y / m0;
  const double var = (m2x + m2y) / m0 - mx * mx - my * my;
  return std::sqrt(std::max(0.0, var));
}

PsfKernel delta_kernel(int size, double pitch) {
  PsfKernel k;
  k.size = size;
  k.pitch_um = pitch;
  k.weights.assign(static_cast<std::size_t>(size) * size, 0.0);
  k.weights[static_cast<std::size_t>(size / 2) * size + size / 2] = 1.0;
  return k;
}

template <typename E>
[[noreturn]] void rethrow_located(const E& e, int fov, int channel) {
  std::ostringstream msg;
  msg << "fov " << fov << ", channel " << to_string(static_cast<Channel>(channel)) << ": " << e.what();
  throw E(msg.str(), GridLocation{fov, channel});
}

}  // namespace

std::string_view to_string(Channel c) {
  switch (c) {
    case Channel::kR: return "R";
    case Channel::kG: return "G";
    case Channel::kB: return "B";
  }
  return "?";
}

void DiffractionConfig::validate() const {
  for (double l : wavelengths_um) {
    if (!(l > 0.0)) throw ConfigError("wavelengths must be positive");
  }
  if (!(distance_mm > 0.0)) throw ConfigError("pupil-to-image distance must be positive");
  if (!(pupil_diameter_mm > 0.0)) throw ConfigError("pupil diameter must be positive");
  if (!is_power_of_two(pupil_samples) || pupil_samples < 16) {
    throw ConfigError("pupil_samples must be a power of two >= 16");
  }
  if (padding_factor < 2) throw ConfigError("padding_factor must be >= 2");
  if (diffraction_window < 3 || diffraction_window % 2 == 0 || diffraction_window >= fft_size()) {
    throw ConfigError("diffraction_window must be odd and smaller than the FFT size");
  }
  if (psf_kernel_size < 1 || psf_kernel_size % 2 == 0) throw ConfigError("psf_kernel_size must be odd");
  if (pupil_samples < 2 * psf_kernel_size) {
    throw ConfigError("pupil_samples must be at least twice psf_kernel_size");
  }
  if (!(pixel_pitch_um > 0.0)) throw ConfigError("pixel_pitch_um must be positive");
  if (!(illumination_scale > 0.0)) throw ConfigError("illumination_scale must be positive");
  if (!(truncation_threshold >= 0.0 && truncation_threshold <= 1.0)) {
    throw ConfigError("truncation_threshold must lie in [0, 1]");
  }
}

double DiffractionConfig::slope_limit_waves() const noexcept {
  // A slope of g waves per unit radius displaces light by 2 * padding * g FFT samples; keep
  // that inside a quarter of the window and well below the pupil aliasing limit n / 4.
  return std::min(diffraction_window / (8.0 * padding_factor), pupil_samples / 8.0);
}

std::string to_json(const DiffractionConfig& cfg) {
  std::ostringstream out;
  out << "{\"wavelengths_um\": [" << format_double(cfg.wavelengths_um[0]) << ", " << format_double(cfg.wavelengths_um[1])
      << ", " << format_double(cfg.wavelengths_um[2]) << "], \"distance_mm\": " << format_double(cfg.distance_mm)
      << ", \"pupil_diameter_mm\": " << format_double(cfg.pupil_diameter_mm)
      << ", \"pupil_samples\": " << cfg.pupil_samples << ", \"padding_factor\": " << cfg.padding_factor
      << ", \"diffraction_window\": " << cfg.diffraction_window << ", \"psf_kernel_size\": " << cfg.psf_kernel_size
      << ", \"pixel_pitch_um\": " << format_double(cfg.pixel_pitch_um)
      << ", \"illumination_scale\": " << format_double(cfg.illumination_scale)
      << ", \"truncation_threshold\": " << format_double(cfg.truncation_threshold) << "}";
  return out.str();
}

DiffractionConfig diffraction_config_from_json(const std::string& text) {
  DiffractionConfig cfg;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.contains("wavelengths_um")) {
      const auto& w = j.at("wavelengths_um");
      if (w.size() != 3) throw ConfigError("wavelengths_um needs 3 entries (R, G, B)");
      for (std::size_t i = 0; i < 3; ++i) cfg.wavelengths_um[i] = w.at(i).get<double>();
    }
    auto read = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
    };
    read("distance_mm", cfg.distance_mm);
    read("pupil_diameter_mm", cfg.pupil_diameter_mm);
    read("pupil_samples", cfg.pupil_samples);
    read("padding_factor", cfg.padding_factor);
    read("diffraction_window", cfg.diffraction_window);
    read("psf_kernel_size", cfg.psf_kernel_size);
    read("pixel_pitch_um", cfg.pixel_pitch_um);
    read("illumination_scale", cfg.illumination_scale);
    read("truncation_threshold", cfg.truncation_threshold);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid optics config: ") + e.what());
  }
  return cfg;
}

PupilField pupil_field(const WavefrontMap& wavefront, double wavelength_um) {
  if (!(wavelength_um > 0.0)) throw std::invalid_argument("wavelength must be positive");
  const PupilGrid& grid = wavefront.grid();
  PupilField field;
  field.size = grid.size();
  field.wavelength_um = wavelength_um;
  field.values.assign(grid.count(), {0.0, 0.0});
  const double k0 = 2.0 * std::numbers::pi / wavelength_um;
  const auto mask = grid.mask();
  const auto w = wavefront.values();
  for (std::size_t i = 0; i < grid.count(); ++i) {
    if (mask[i]) field.values[i] = std::polar(1.0, k0 * w[i]);
  }
  return field;
}

double IntensityField::total() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

IntensityField diffraction_intensity(const PupilField& pupil, const DiffractionConfig& cfg) {
  cfg.validate();
  if (pupil.size != cfg.pupil_samples) throw ConfigError("pupil field size does not match pupil_samples");
  const int n = pupil.size;
  const int big = cfg.fft_size();
  const int offset = (big - n) / 2;
  auto buf = fft::alloc_complex(static_cast<std::size_t>(big) * big);
  std::fill_n(buf.get(), static_cast<std::size_t>(big) * big, std::complex<double>{});
  for (int r = 0; r < n; ++r) {
    std::copy_n(pupil.values.data() + static_cast<std::size_t>(r) * n, n,
                buf.get() + static_cast<std::size_t>(r + offset) * big + offset);
  }
  fft::forward_2d(buf.get(), big, big);
  const double scale = cfg.illumination_scale * cfg.illumination_scale / (double(big) * big * double(n) * n);
  IntensityField field;
  field.size = big;
  field.values.resize(static_cast<std::size_t>(big) * big);
  for (int r = 0; r < big; ++r) {
    const int sr = (r + big / 2) % big;
    for (int c = 0; c < big; ++c) {
      const int sc = (c + big / 2) % big;
      field.values[static_cast<std::size_t>(sr) * big + sc] = std::norm(buf[static_cast<std::size_t>(r) * big + c]) * scale;
    }
  }
  return field;
}

PsfKernel psf_compute(const PupilField& pupil, const DiffractionConfig& cfg) {
  cfg.validate();
  if (pupil.size != cfg.pupil_samples) throw ConfigError("pupil field size does not match pupil_samples");
  const int n = pupil.size;
  const int big = cfg.fft_size();
  const int win = cfg.diffraction_window;
  const int half = (win - 1) / 2;
  const int offset = (big - n) / 2;

  // Only the n pupil rows are non-zero, and only `win` output columns and rows are kept, so the
  // 2-D transform is done as n row transforms followed by `win` column transforms.
  auto rows = fft::alloc_complex(static_cast<std::size_t>(n) * big);
  std::fill_n(rows.get(), static_cast<std::size_t>(n) * big, std::complex<double>{});
  double pupil_energy = 0.0;
  for (int r = 0; r < n; ++r) {
    const auto* src = pupil.values.data() + static_cast<std::size_t>(r) * n;
    std::copy_n(src, n, rows.get() + static_cast<std::size_t>(r) * big + offset);
    for (int c = 0; c < n; ++c) pupil_energy += std::norm(src[c]);
  }
  fft::forward_many(rows.get(), n, big);

  auto cols = fft::alloc_complex(static_cast<std::size_t>(win) * big);
  std::fill_n(cols.get(), static_cast<std::size_t>(win) * big, std::complex<double>{});
  for (int sc = 0; sc < win; ++sc) {
    const int kx = ((sc - half) % big + big) % big;
    auto* dst = cols.get() + static_cast<std::size_t>(sc) * big + offset;
    for (int r = 0; r < n; ++r) dst[r] = rows[static_cast<std::size_t>(r) * big + kx];
  }
  fft::forward_many(cols.get(), win, big);

  const double scale = cfg.illumination_scale * cfg.illumination_scale / (double(big) * big * double(n) * n);
  const double total = scale * double(big) * big * pupil_energy;  // Parseval
  if (!(total > 0.0)) throw DegenerateInputError("pupil transmits no light");

  PsfKernel psf;
  psf.size = win;
  psf.pitch_um = cfg.optical_pitch_um(pupil.wavelength_um);
  psf.weights.resize(static_cast<std::size_t>(win) * win);
  double kept = 0.0;
  for (int sr = 0; sr < win; ++sr) {
    const int ky = ((sr - half) % big + big) % big;
    for (int sc = 0; sc < win; ++sc) {
      const double v = std::norm(cols[static_cast<std::size_t>(sc) * big + ky]) * scale;
      psf.weights[static_cast<std::size_t>(sr) * win + sc] = v;
      kept += v;
    }
  }
  const double lost = 1.0 - kept / total;
  if (lost > cfg.truncation_threshold) {
    std::ostringstream msg;
    msg << "diffraction window " << win << " discards " << lost * 100.0 << "% of the PSF energy (limit "
        << cfg.truncation_threshold * 100.0 << "%); enlarge the window";
    throw TruncationError(msg.str());
  }
  for (double& v : psf.weights) v /= kept;
  update_centroid(psf);
  return psf;
}

void update_centroid(PsfKernel& psf) {
  const int c = psf.radius();
  double sum = 0, sx = 0, sy = 0;
  for (int r = 0; r < psf.size; ++r) {
    for (int col = 0; col < psf.size; ++col) {
      const double w = psf.at(r, col);
      sum += w;
      sx += w * (col - c);
      sy += w * (r - c);
    }
  }
  psf.centroid_x = sum > 0.0 ? sx / sum : 0.0;
  psf.centroid_y = sum > 0.0 ? sy / sum : 0.0;
}

double rms_radius(const PsfKernel& psf) {
  const int c = psf.radius();
  double sum = 0, acc = 0;
  for (int r = 0; r < psf.size; ++r) {
    const double dy = r - c - psf.centroid_y;
    for (int col = 0; col < psf.size; ++col) {
      const double dx = col - c - psf.centroid_x;
      const double w = psf.at(r, col);
      sum += w;
      acc += w * (dx * dx + dy * dy);
    }
  }
  return sum > 0.0 ? std::sqrt(acc / sum) * psf.pitch_um : 0.0;
}

PsfKernel resample_psf(const PsfKernel& psf, double magnification, double out_pitch_um, int out_size) {
  if (out_size < 1 || out_size % 2 == 0) throw std::invalid_argument("output kernel size must be odd");
  if (!(magnification >= 0.0) || !std::isfinite(magnification)) {
    throw std::invalid_argument("magnification must be finite and non-negative");
  }
  PsfKernel out = delta_kernel(out_size, out_pitch_um);
  out.fov_index = psf.fov_index;
  out.channel = psf.channel;
  if (magnification == 0.0) return out;

  const auto tx = axis_taps(psf.size, psf.centroid_x, magnification, out_size);
  const auto ty = axis_taps(psf.size, psf.centroid_y, magnification, out_size);
  std::fill(out.weights.begin(), out.weights.end(), 0.0);
  std::vector<double> row_out(static_cast<std::size_t>(out_size));
  for (int r = 0; r < psf.size; ++r) {
    const Taps& wy = ty[static_cast<std::size_t>(r)];
    if (wy.w.empty()) continue;
    std::fill(row_out.begin(), row_out.end(), 0.0);
    bool any = false;
    for (int c = 0; c < psf.size; ++c) {
      const double v = psf.at(r, c);
      if (v == 0.0) continue;
      const Taps& wx = tx[static_cast<std::size_t>(c)];
      for (std::size_t k = 0; k < wx.w.size(); ++k) row_out[static_cast<std::size_t>(wx.first) + k] += v * wx.w[k];
      any = any || !wx.w.empty();
    }
    if (!any) continue;
    for (std::size_t k = 0; k < wy.w.size(); ++k) {
      double* dst = out.weights.data() + (static_cast<std::size_t>(wy.first) + k) * out_size;
      const double wk = wy.w[k];
      for (int c = 0; c < out_size; ++c) dst[c] += wk * row_out[static_cast<std::size_t>(c)];
    }
  }
  double sum = 0.0;
  for (double v : out.weights) sum += v;
  if (!(sum > 0.0)) throw TruncationError("resampled PSF fell entirely outside the output window");
  for (double& v : out.weights) v /= sum;
  update_centroid(out);
  return out;
}

PsfKernel rescale_psf(const PsfKernel& psf, double target_um) {
  return rescale_psf(psf, target_um, psf.pitch_um, psf.size);
}

PsfKernel rescale_psf(const PsfKernel& psf, double target_um, double out_pitch_um, int out_size) {
  if (!(target_um >= 0.0) || !std::isfinite(target_um)) throw std::invalid_argument("target radius must be >= 0");
  if (!(out_pitch_um > 0.0)) throw std::invalid_argument("output pitch must be positive");
  const double target_px = target_um / out_pitch_um;
  if (target_px == 0.0) return resample_psf(psf, 0.0, out_pitch_um, out_size);

  const double rms_in_px = rms_radius(psf) / psf.pitch_um;
  if (!(rms_in_px > 0.0)) throw DegenerateInputError("cannot magnify a zero-width PSF to a positive radius");

  std::vector<double> row_sums(static_cast<std::size_t>(psf.size), 0.0);
  std::vector<double> col_sums(static_cast<std::size_t>(psf.size), 0.0);
  for (int r = 0; r < psf.size; ++r) {
    for (int c = 0; c < psf.size; ++c) {
      row_sums[static_cast<std::size_t>(r)] += psf.at(r, c);
      col_sums[static_cast<std::size_t>(c)] += psf.at(r, c);
    }
  }
  auto f = [&](double m) { return resampled_rms_px(psf, row_sums, col_sums, m, out_size) - target_px; };

  // Magnification in output pixels per input pixel; the physical guess is target / rms.
  double lo = 0.0;
  double f_lo = -target_px;
  double hi = target_px / rms_in_px;
  double f_hi = f(hi);
  const double m_max = 4.0 * out_size;
  while (!(f_hi >= 0.0)) {
    if (std::isnan(f_hi) || hi > m_max) {
      std::ostringstream msg;
      msg << "a " << out_size << " px kernel cannot reach an RMS radius of " << target_px << " px";
      throw TruncationError(msg.str());
    }
    lo = hi;
    f_lo = f_hi;
    hi *= 1.6;
    f_hi = f(hi);
  }
  double m = hi;
  if (f_hi != 0.0) {
    std::uintmax_t iterations = 100;
    const auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, f_lo, f_hi,
                                                          boost::math::tools::eps_tolerance<double>(44), iterations);
    m = std::abs(f(a)) <= std::abs(f(b)) ? a : b;
  }
  return resample_psf(psf, m, out_pitch_um, out_size);
}

void PsfGrid::validate() const {
  if (kernels.size() != static_cast<std::size_t>(kFovCount) * kChannels) {
    throw std::invalid_argument("PSF grid must hold 128 x 3 kernels");
  }
  const int size = kernels.front().size;
  const double pitch = kernels.front().pitch_um;
  for (int fov = 0; fov < kFovCount; ++fov) {
    for (int ch = 0; ch < kChannels; ++ch) {
      const PsfKernel& k = at(fov, ch);
      if (k.size != size || k.pitch_um != pitch) throw std::invalid_argument("PSF grid kernels differ in size or pitch");
      if (k.fov_index != fov || static_cast<int>(k.channel) != ch) throw std::invalid_argument("PSF grid slot mismatch");
      if (k.weights.size() != static_cast<std::size_t>(size) * size) throw std::invalid_argument("PSF kernel has wrong size");
    }
  }
}

PsfGrid build_psf_grid(const VplSample& vpl, const DiffractionConfig& cfg, int jobs) {
  cfg.validate();
  for (double r : vpl.radius_targets) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw std::invalid_argument(vpl.id + ": invalid radius target");
  }
  const ZernikeBasis basis{PupilGrid(cfg.pupil_samples)};
  const double slope_limit = cfg.slope_limit_waves();

  PsfGrid grid;
  grid.source_id = vpl.id;
  grid.config = cfg;
  grid.kernels.resize(static_cast<std::size_t>(kFovCount) * kChannels);

  parallel_for(grid.kernels.size(), jobs, [&](std::size_t task) {
    const int fov = static_cast<int>(task) / kChannels;
    const int ch = static_cast<int>(task) % kChannels;
    try {
      const double lambda = cfg.wavelength(static_cast<Channel>(ch));
      WavefrontMap wavefront = basis.synthesize(vpl.coeffs.column(fov, ch));
      const double slope_waves = wavefront.max_slope() / lambda;
      if (slope_waves > slope_limit) {
        // Shape-preserving compression; the radius target restores the physical size below.
        const double factor = slope_limit / slope_waves;
        std::vector<double> scaled(wavefront.values().begin(), wavefront.values().end());
        for (double& v : scaled) v *= factor;
        wavefront = WavefrontMap(basis.grid(), std::move(scaled));
      }
      PsfKernel raw = psf_compute(pupil_field(wavefront, lambda), cfg);
      PsfKernel k = rescale_psf(raw, vpl.radius_targets[static_cast<std::size_t>(fov)], cfg.pixel_pitch_um,
                                cfg.psf_kernel_size);
      k.fov_index = fov;
      k.channel = static_cast<Channel>(ch);
      grid.kernels[task] = std::move(k);
    } catch (const TruncationError& e) {
      rethrow_located(e, fov, ch);
    } catch (const DegenerateInputError& e) {
      rethrow_located(e, fov, ch);
    }
  });
  return grid;
}

PsfGrid resample_grid_to_pitch(const PsfGrid& grid, double pitch_um) {
  if (!(pitch_um > 0.0)) throw std::invalid_argument("pitch must be positive");
  PsfGrid out = grid;
  out.config.pixel_pitch_um = pitch_um;
  for (auto& k : out.kernels) {
    if (k.pitch_um == pitch_um) continue;
    PsfKernel r = resample_psf(k, k.pitch_um / pitch_um, pitch_um, k.size);
    r.fov_index = k.fov_index;
    r.channel = k.channel;
    k = std::move(r);
  }
  return out;
}

}  // namespace vpl
