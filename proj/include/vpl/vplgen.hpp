#pragma once

// Random Virtual Prototype Lens samples: Zernike coefficient curves over the normalized field
// plus a target RMS-radius curve, drawn inside the per-level ranges of the VPL tables.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <filesystem>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vpl/zernike.hpp"

namespace vpl {

inline constexpr int kFovCount = 128;
inline constexpr int kChannels = 3;
inline constexpr int kSampleSchemaVersion = 1;

enum class Behavior { kCsl, kHrdl };

std::string_view to_string(Behavior b);
/// Accepts "csl"/"hrdl" in any case. Throws std::invalid_argument otherwise.
Behavior parse_behavior(std::string_view text);
/// Level group prefix: 'C' for CSL, 'H' for HRDL.
char behavior_prefix(Behavior b);

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// Peak-fraction ranges of one highlighted order, for negative and positive peaks.
struct OrderRange {
  Range negative;
  Range positive;
};

struct LevelSpec {
  std::string id;          ///< "C1".."C4", "H1".."H4", or a user label for overrides
  Behavior behavior = Behavior::kCsl;
  int level = 1;           ///< 1..4
  Range radius;            ///< um; lo at the center FoV, hi at the edge FoV
  double neg_bound = 0.0;  ///< most negative coefficient allowed, um
  double pos_bound = 0.0;  ///< most positive coefficient allowed, um
  std::map<int, OrderRange> per_order;  ///< keyed by Noll index

  /// Throws std::invalid_argument when an invariant is broken.
  void validate() const;
};

/// Fraction range used for orders that have no row entry of their own.
inline constexpr Range kDefaultPeakFraction{0.05, 0.3};

/// The built-in rows C1..C4 and H1..H4. Throws std::out_of_range for anything else.
LevelSpec level_spec(std::string_view id);
LevelSpec level_spec(Behavior behavior, int level);

/// Seeded generator. The engine is std::mt19937_64, whose output sequence is fixed by the
/// C++ standard; doubles are built from the top 53 bits so sampling is portable.
class SampleRng {
 public:
  explicit SampleRng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Uniform on [lo, hi].
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
  bool coin() { return (engine_() >> 63) != 0; }

 private:
  std::mt19937_64 engine_;
};

/// Peak for a fixed sign and fraction: sign * r * |matching overall bound|.
double curve_peak(const LevelSpec& spec, bool negative, double r);

/// Draws the sign uniformly, then r from the per-order range for that sign.
double sample_curve_peak(const LevelSpec& spec, NollIndex j, SampleRng& rng);

enum class TrendId { kConstant, kIncreasing, kDecreasing, kUnimodalMid, kUnimodalEdge };

std::string_view to_string(TrendId t);
TrendId parse_trend(std::string_view text);

/// Smooth curve over n FoVs whose largest magnitude is exactly |peak|.
std::vector<double> fit_fov_curve(TrendId trend, double peak, int n = kFovCount);

using RadiusCurve = std::array<double, kFovCount>;

/// Target RMS radius per FoV (um), shared by the three channels.
RadiusCurve radius_targets(const LevelSpec& spec, Behavior behavior, SampleRng& rng);

/// 37 orders x 128 FoVs x 3 channels of Zernike coefficients, micrometres of OPD.
class ZernikeField {
 public:
  ZernikeField() : values_(static_cast<std::size_t>(kZernikeTerms) * kFovCount * kChannels, 0.0) {}

  double& at(int slot, int fov, int channel) { return values_[index(slot, fov, channel)]; }
  double at(int slot, int fov, int channel) const { return values_[index(slot, fov, channel)]; }
  /// The 37 coefficients driving one (fov, channel) wavefront.
  ZernikeCoefficients column(int fov, int channel) const;
  std::span<const double> values() const noexcept { return values_; }

  friend bool operator==(const ZernikeField&, const ZernikeField&) = default;

 private:
  static std::size_t index(int slot, int fov, int channel) {
    return (static_cast<std::size_t>(slot) * kFovCount + fov) * kChannels + channel;
  }
  std::vector<double> values_;
};

struct VplSample {
  std::string id;        ///< "<group>-<seed>", e.g. "C3-7" or "C5-21"
  std::string group;     ///< level group the sample was generated for, e.g. "C3" or "C5"
  Behavior behavior = Behavior::kCsl;
  int level = 1;         ///< level actually sampled, 1..4
  std::uint64_t seed = 0;
  LevelSpec spec;
  std::array<TrendId, kZernikeTerms> trends{};
  RadiusCurve radius_targets{};
  ZernikeField coeffs;

  /// Throws std::invalid_argument when the sample violates its LevelSpec.
  void validate() const;
};

struct GeneratorOptions {
  double chromatic_jitter = 0.1;  ///< per-channel multiplier drawn from U[1 - j, 1 + j]
};

VplSample sample_vpl(const LevelSpec& spec, Behavior behavior, std::uint64_t seed,
                     const GeneratorOptions& options = {});

/// Level-5 hybrid set: round-robin over levels 1..4 of the behavior, one seed per sample.
std::vector<VplSample> sample_level5(Behavior behavior, int count, std::span<const std::uint64_t> seeds,
                                     const GeneratorOptions& options = {});

// Human-readable sample files (JSON, doubles written with 17 significant digits).
void write_vpl_sample(const VplSample& sample, std::ostream& out);
VplSample read_vpl_sample(std::istream& in);
void save_vpl_sample(const VplSample& sample, const std::filesystem::path& path);
VplSample load_vpl_sample(const std::filesystem::path& path);

/// Shortest-safe decimal form used by all text writers: "%.17g", always with a '.' or exponent.
std::string format_double(double v);

}  // namespace vpl
