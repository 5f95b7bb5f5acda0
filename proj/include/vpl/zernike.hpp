#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace vpl {

/// Number of Zernike terms carried by every aberration description.
inline constexpr int kZernikeTerms = 37;

/// Noll index j in [1, 37]. Construction outside the range throws std::out_of_range.
class NollIndex {
 public:
  explicit NollIndex(int j);

  int value() const noexcept { return j_; }
  /// Zero-based slot, convenient for coefficient arrays.
  std::size_t slot() const noexcept { return static_cast<std::size_t>(j_ - 1); }

  friend bool operator==(NollIndex, NollIndex) = default;

 private:
  int j_;
};

struct RadialAzimuthal {
  int n = 0;  ///< radial degree
  int m = 0;  ///< signed azimuthal frequency; m > 0 is cos(m theta), m < 0 is sin(|m| theta)

  friend bool operator==(RadialAzimuthal, RadialAzimuthal) = default;
};

RadialAzimuthal noll_to_nm(NollIndex j);

/// Radial polynomial R_n^|m|(rho) by the three-term recurrence in n.
double zernike_radial(int n, int m, double rho);

/// Noll-normalized Z_j(rho, theta): unit RMS over the unit disk.
/// Throws std::domain_error for rho outside [0, 1]; callers mask instead of clamping.
double zernike_eval(NollIndex j, double rho, double theta);

using ZernikeCoefficients = std::array<double, kZernikeTerms>;

/// Square sampling of the normalized exit pupil [-1, 1]^2.
///
/// Samples are cell centred, x_i = (2 i + 1 - n) / n, so the lattice is symmetric about the
/// origin. The aperture mask is the closed unit disk.
class PupilGrid {
 public:
  /// n must be even and at least 16.
  explicit PupilGrid(int n);

  int size() const noexcept { return n_; }
  std::size_t count() const noexcept { return static_cast<std::size_t>(n_) * n_; }
  double coord(int i) const noexcept { return (2.0 * i + 1.0 - n_) / n_; }
  /// Row-major: index = row * n + col, row runs along y, col along x.
  bool inside(int row, int col) const noexcept { return mask_[static_cast<std::size_t>(row) * n_ + col] != 0; }
  std::span<const unsigned char> mask() const noexcept { return mask_; }
  std::size_t inside_count() const noexcept { return inside_count_; }

 private:
  int n_;
  std::vector<unsigned char> mask_;
  std::size_t inside_count_ = 0;
};

/// Optical path difference over a PupilGrid, micrometres, exactly zero outside the aperture.
class WavefrontMap {
 public:
  WavefrontMap(const PupilGrid& grid, std::vector<double> values);

  const PupilGrid& grid() const noexcept { return grid_; }
  std::span<const double> values() const noexcept { return values_; }
  double at(int row, int col) const noexcept { return values_[static_cast<std::size_t>(row) * grid_.size() + col]; }

  /// Largest gradient magnitude inside the aperture, micrometres per unit pupil radius.
  double max_slope() const;

 private:
  PupilGrid grid_;
  std::vector<double> values_;
};

/// sum_j c_j Z_j on the masked grid. Throws std::invalid_argument on a non-finite coefficient.
WavefrontMap wavefront_map(const ZernikeCoefficients& coeffs, const PupilGrid& grid);

/// All 37 polynomials sampled once on a grid, for repeated synthesis.
class ZernikeBasis {
 public:
  explicit ZernikeBasis(const PupilGrid& grid);

  const PupilGrid& grid() const noexcept { return grid_; }
  WavefrontMap synthesize(const ZernikeCoefficients& coeffs) const;

 private:
  PupilGrid grid_;
  std::vector<double> table_;  // kZernikeTerms planes of grid.count()
};

}  // namespace vpl
