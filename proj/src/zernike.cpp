#include "vpl/zernike.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace vpl {

namespace {

constexpr int kMaxRadialDegree = 8;  // j = 37 is (8, 0)

void check_finite(const ZernikeCoefficients& coeffs) {
  for (std::size_t k = 0; k < coeffs.size(); ++k) {
    if (!std::isfinite(coeffs[k])) {
      throw std::invalid_argument("zernike coefficient " + std::to_string(k + 1) + " is not finite");
    }
  }
}

}  // namespace

NollIndex::NollIndex(int j) : j_(j) {
  if (j < 1 || j > kZernikeTerms) {
    throw std::out_of_range("Noll index " + std::to_string(j) + " outside [1, 37]");
  }
}

RadialAzimuthal noll_to_nm(NollIndex index) {
  const int j = index.value();
  int n = 0;
  while (j > (n + 1) * (n + 2) / 2) ++n;
  const int k = j - n * (n + 1) / 2 - 1;  // position inside row n
  const int abs_m = (n % 2 == 0) ? 2 * ((k + 1) / 2) : 2 * (k / 2) + 1;
  if (abs_m == 0) return {n, 0};
  return {n, (j % 2 == 0) ? abs_m : -abs_m};
}

double zernike_radial(int n, int m, double rho) {
  m = std::abs(m);
  if (m > n || (n - m) % 2 != 0) return 0.0;
  // R_n^m = rho (R_{n-1}^{|m-1|} + R_{n-1}^{m+1}) - R_{n-2}^m, seeded with R_0^0 = 1.
  double table[kMaxRadialDegree + 1][kMaxRadialDegree + 2] = {};
  if (n > kMaxRadialDegree) throw std::out_of_range("radial degree above 8 not supported");
  table[0][0] = 1.0;
  for (int nn = 1; nn <= n; ++nn) {
    for (int mm = nn % 2; mm <= nn; mm += 2) {
      const double lower = table[nn - 1][std::abs(mm - 1)] + table[nn - 1][mm + 1];
      const double prev = nn >= 2 ? table[nn - 2][mm] : 0.0;
      table[nn][mm] = rho * lower - prev;
    }
  }
  return table[n][m];
}

double zernike_eval(NollIndex j, double rho, double theta) {
  if (!(rho >= 0.0 && rho <= 1.0)) {
    throw std::domain_error("zernike_eval: rho must lie in [0, 1]");
  }
  const auto [n, m] = noll_to_nm(j);
  const double radial = zernike_radial(n, m, rho);
  if (m == 0) return std::sqrt(n + 1.0) * radial;
  const double norm = std::sqrt(2.0 * (n + 1.0));
  return m > 0 ? norm * radial * std::cos(m * theta) : norm * radial * std::sin(-m * theta);
}

PupilGrid::PupilGrid(int n) : n_(n) {
  if (n < 16 || n % 2 != 0) {
    throw std::invalid_argument("pupil grid size must be even and >= 16, got " + std::to_string(n));
  }
  mask_.resize(count());
  for (int r = 0; r < n; ++r) {
    const double y = coord(r);
    for (int c = 0; c < n; ++c) {
      const double x = coord(c);
      const bool in = x * x + y * y <= 1.0;
      mask_[static_cast<std::size_t>(r) * n + c] = in ? 1 : 0;
      inside_count_ += in ? 1 : 0;
    }
  }
}

WavefrontMap::WavefrontMap(const PupilGrid& grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.count()) {
    throw std::invalid_argument("wavefront size does not match pupil grid");
  }
  const auto mask = grid_.mask();
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!mask[i]) values_[i] = 0.0;
    if (!std::isfinite(values_[i])) throw std::invalid_argument("wavefront contains non-finite values");
  }
}

double WavefrontMap::max_slope() const {
  // Central differences where both neighbours are inside, one-sided otherwise.
  const int n = grid_.size();
  const double h = 2.0 / n;
  auto derivative = [&](int r, int c, int dr, int dc) {
    const bool fwd = r + dr >= 0 && r + dr < n && c + dc >= 0 && c + dc < n && grid_.inside(r + dr, c + dc);
    const bool bwd = r - dr >= 0 && r - dr < n && c - dc >= 0 && c - dc < n && grid_.inside(r - dr, c - dc);
    if (fwd && bwd) return (at(r + dr, c + dc) - at(r - dr, c - dc)) / (2.0 * h);
    if (fwd) return (at(r + dr, c + dc) - at(r, c)) / h;
    if (bwd) return (at(r, c) - at(r - dr, c - dc)) / h;
    return 0.0;
  };
  double best = 0.0;
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      if (!grid_.inside(r, c)) continue;
      const double gx = derivative(r, c, 0, 1);
      const double gy = derivative(r, c, 1, 0);
      best = std::max(best, std::hypot(gx, gy));
    }
  }
  return best;
}

WavefrontMap wavefront_map(const ZernikeCoefficients& coeffs, const PupilGrid& grid) {
  check_finite(coeffs);
  const int n = grid.size();
  std::vector<double> values(grid.count(), 0.0);
  for (int r = 0; r < n; ++r) {
    const double y = grid.coord(r);
    for (int c = 0; c < n; ++c) {
      if (!grid.inside(r, c)) continue;
      const double x = grid.coord(c);
      const double rho = std::min(1.0, std::hypot(x, y));
      const double theta = std::atan2(y, x);
      double sum = 0.0;
      for (int j = 1; j <= kZernikeTerms; ++j) {
        const double cj = coeffs[static_cast<std::size_t>(j - 1)];
        if (cj != 0.0) sum += cj * zernike_eval(NollIndex(j), rho, theta);
      }
      values[static_cast<std::size_t>(r) * n + c] = sum;
    }
  }
  return WavefrontMap(grid, std::move(values));
}

ZernikeBasis::ZernikeBasis(const PupilGrid& grid) : grid_(grid), table_(kZernikeTerms * grid.count(), 0.0) {
  const int n = grid.size();
  for (int r = 0; r < n; ++r) {
    const double y = grid.coord(r);
    for (int c = 0; c < n; ++c) {
      if (!grid.inside(r, c)) continue;
      const double x = grid.coord(c);
      const double rho = std::min(1.0, std::hypot(x, y));
      const double theta = std::atan2(y, x);
      const std::size_t pix = static_cast<std::size_t>(r) * n + c;
      for (int j = 1; j <= kZernikeTerms; ++j) {
        table_[static_cast<std::size_t>(j - 1) * grid.count() + pix] = zernike_eval(NollIndex(j), rho, theta);
      }
    }
  }
}

WavefrontMap ZernikeBasis::synthesize(const ZernikeCoefficients& coeffs) const {
  check_finite(coeffs);
  const std::size_t count = grid_.count();
  std::vector<double> values(count, 0.0);
  for (std::size_t k = 0; k < coeffs.size(); ++k) {
    const double ck = coeffs[k];
    if (ck == 0.0) continue;
    const double* plane = table_.data() + k * count;
    for (std::size_t i = 0; i < count; ++i) values[i] += ck * plane[i];
  }
  return WavefrontMap(grid_, std::move(values));
}

}  // namespace vpl
