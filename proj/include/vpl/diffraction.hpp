#pragma once

// Scalar (Fraunhofer) diffraction from exit-pupil wavefronts to image-plane PSFs, and the
// resampling that brings each PSF to its target RMS radius at sensor pitch.

#include <array>
#include <complex>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "vpl/vplgen.hpp"
#include "vpl/zernike.hpp"

namespace vpl {

enum class Channel { kR = 0, kG = 1, kB = 2 };

std::string_view to_string(Channel c);

struct DiffractionConfig {
  std::array<double, kChannels> wavelengths_um{0.620, 0.550, 0.470};  ///< R, G, B
  double distance_mm = 50.0;         ///< exit pupil to image plane
  double pupil_diameter_mm = 10.0;
  int pupil_samples = 128;           ///< power of two
  int padding_factor = 4;            ///< FFT length = padding_factor * pupil_samples
  int diffraction_window = 255;      ///< odd crop of the optical-pitch PSF
  int psf_kernel_size = 63;          ///< odd size of the final sensor-pitch kernels
  double pixel_pitch_um = 20.0;      ///< sensor pitch of the final kernels
  double illumination_scale = 1.0;   ///< E0
  double truncation_threshold = 0.01;

  /// Throws ConfigError when an invariant is broken.
  void validate() const;

  int fft_size() const noexcept { return pupil_samples * padding_factor; }
  double wavelength(Channel c) const noexcept { return wavelengths_um[static_cast<std::size_t>(c)]; }
  /// Image-plane sample spacing of the FFT, lambda d / (D * padding), micrometres.
  double optical_pitch_um(double lambda_um) const noexcept {
    return lambda_um * distance_mm / (pupil_diameter_mm * padding_factor);
  }
  /// Largest wavefront slope (waves per unit pupil radius) the grid build passes to the FFT.
  double slope_limit_waves() const noexcept;

  friend bool operator==(const DiffractionConfig&, const DiffractionConfig&) = default;
};

/// Canonical one-line JSON echo of a config (stable key order, %.17g doubles).
std::string to_json(const DiffractionConfig& cfg);
/// Parses an echo or a user config object; missing keys keep their defaults.
DiffractionConfig diffraction_config_from_json(const std::string& text);

/// Complex pupil function mask * exp(i 2 pi W / lambda) on the pupil grid.
struct PupilField {
  int size = 0;
  double wavelength_um = 0.0;
  std::vector<std::complex<double>> values;  ///< row-major size x size
};

PupilField pupil_field(const WavefrontMap& wavefront, double wavelength_um);

/// Normalized PSF sampled on a square odd-sized grid.
struct PsfKernel {
  int size = 0;
  double pitch_um = 0.0;
  int fov_index = 0;
  Channel channel = Channel::kG;
  std::vector<double> weights;  ///< row-major, sums to 1
  double centroid_x = 0.0;      ///< pixels, relative to the central sample
  double centroid_y = 0.0;

  double at(int row, int col) const { return weights[static_cast<std::size_t>(row) * size + col]; }
  int radius() const noexcept { return (size - 1) / 2; }
};

/// Unnormalized image-plane intensity over the full FFT grid, centred at (N/2, N/2).
/// Scaled so its sum equals E0^2 times the fraction of the pupil grid inside the aperture.
struct IntensityField {
  int size = 0;
  std::vector<double> values;
  double total() const;
};

IntensityField diffraction_intensity(const PupilField& pupil, const DiffractionConfig& cfg);

/// PSF = |centred FFT of the zero-padded pupil|^2 cropped to cfg.diffraction_window and
/// normalized. Throws TruncationError when the crop loses more than cfg.truncation_threshold.
PsfKernel psf_compute(const PupilField& pupil, const DiffractionConfig& cfg);

/// Recomputes the centroid fields from the weights.
void update_centroid(PsfKernel& psf);

/// sqrt(sum w r^2) about the centroid, micrometres.
double rms_radius(const PsfKernel& psf);

/// Resamples with a fixed magnification (output pixels per input pixel), about the centroid.
PsfKernel resample_psf(const PsfKernel& psf, double magnification, double out_pitch_um, int out_size);

/// Resamples psf so that its RMS radius equals target_um. The output keeps the input pitch and
/// size unless given. Throws DegenerateInputError for a zero-width input with a positive
/// target and TruncationError when the output window cannot hold the requested radius.
PsfKernel rescale_psf(const PsfKernel& psf, double target_um);
PsfKernel rescale_psf(const PsfKernel& psf, double target_um, double out_pitch_um, int out_size);

struct PsfGrid {
  std::string source_id;
  DiffractionConfig config;
  std::vector<PsfKernel> kernels;  ///< kFovCount * kChannels, index fov * kChannels + channel

  const PsfKernel& at(int fov, int channel) const {
    return kernels[static_cast<std::size_t>(fov) * kChannels + channel];
  }
  int kernel_size() const { return kernels.empty() ? 0 : kernels.front().size; }
  double pitch_um() const { return kernels.empty() ? 0.0 : kernels.front().pitch_um; }

  /// Throws std::invalid_argument unless fully populated with uniform size and pitch.
  void validate() const;
};

/// Builds all 384 kernels. Errors from a task are rethrown annotated with (fov, channel).
PsfGrid build_psf_grid(const VplSample& vpl, const DiffractionConfig& cfg, int jobs = 1);

/// Resamples every kernel to a new pitch (the sensor pitch at grid-load time).
PsfGrid resample_grid_to_pitch(const PsfGrid& grid, double pitch_um);

// Binary cache: magic, version, config echo, then the kernels as little-endian doubles.
void write_psf_grid(const PsfGrid& grid, std::ostream& out);
PsfGrid read_psf_grid(std::istream& in);
void save_psf_grid(const PsfGrid& grid, const std::filesystem::path& path);
PsfGrid load_psf_grid(const std::filesystem::path& path);

}  // namespace vpl
