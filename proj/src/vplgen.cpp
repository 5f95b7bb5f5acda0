#include "vpl/vplgen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

namespace vpl {

namespace {

using Orders = std::map<int, OrderRange>;

// Highlighted orders 1, 3, 4, 6, 7, 9: (x-, y-) / (x+, y+) peak fractions.
const Orders kC12Orders = {
    {1, {{0.45, 1.0}, {0.8, 1.0}}},  {3, {{0.45, 1.0}, {0.45, 1.0}}}, {4, {{0.2, 0.5}, {0.3, 0.5}}},
    {6, {{0.1, 0.5}, {0.2, 0.7}}},   {7, {{0.1, 0.35}, {0.0, 0.1}}},  {9, {{0.1, 0.15}, {0.1, 0.15}}},
};
const Orders kC3Orders = {
    {1, {{0.6, 1.0}, {0.8, 1.0}}},   {3, {{0.45, 1.0}, {0.45, 1.0}}}, {4, {{0.2, 0.5}, {0.3, 0.5}}},
    {6, {{0.1, 0.25}, {0.1, 0.5}}},  {7, {{0.1, 0.2}, {0.0, 0.2}}},   {9, {{0.45, 0.6}, {0.45, 0.6}}},
};
const Orders kC4Orders = {
    {1, {{0.8, 1.0}, {0.8, 1.0}}},   {3, {{0.9, 1.0}, {0.9, 1.0}}},   {4, {{0.25, 0.7}, {0.4, 0.7}}},
    {6, {{0.1, 0.15}, {0.1, 0.3}}},  {7, {{0.1, 0.15}, {0.2, 0.4}}},  {9, {{0.45, 0.8}, {0.45, 0.8}}},
};
const Orders kH12Orders = {
    {1, {{0.3, 0.8}, {0.75, 0.9}}},  {3, {{0.3, 0.8}, {0.6, 0.8}}},   {4, {{0.3, 0.4}, {0.35, 0.55}}},
    {6, {{0.1, 0.3}, {0.4, 0.7}}},   {7, {{0.1, 0.2}, {0.0, 0.15}}},  {9, {{0.1, 0.15}, {0.1, 0.15}}},
};
const Orders kH3Orders = {
    {1, {{0.6, 0.8}, {0.75, 0.9}}},  {3, {{0.3, 0.8}, {0.6, 0.8}}},   {4, {{0.4, 0.6}, {0.45, 0.65}}},
    {6, {{0.1, 0.25}, {0.3, 0.5}}},  {7, {{0.1, 0.15}, {0.1, 0.2}}},  {9, {{0.45, 0.65}, {0.45, 0.6}}},
};
const Orders kH4Orders = {
    {1, {{0.75, 0.8}, {0.75, 0.9}}}, {3, {{0.9, 1.0}, {0.8, 0.9}}},   {4, {{0.25, 0.6}, {0.4, 0.75}}},
    {6, {{0.1, 0.25}, {0.2, 0.4}}},  {7, {{0.1, 0.15}, {0.3, 0.4}}},  {9, {{0.65, 0.8}, {0.45, 0.6}}},
};

LevelSpec make_row(const char* id, Behavior b, int level, Range radius, double neg, double pos, const Orders& orders) {
  return LevelSpec{id, b, level, radius, neg, pos, orders};
}

const std::vector<LevelSpec>& builtin_rows() {
  static const std::vector<LevelSpec> rows = {
      make_row("C1", Behavior::kCsl, 1, {5, 35}, -0.4, 0.3, kC12Orders),
      make_row("C2", Behavior::kCsl, 2, {5, 75}, -0.7, 0.95, kC12Orders),
      make_row("C3", Behavior::kCsl, 3, {5, 150}, -3.0, 1.5, kC3Orders),
      make_row("C4", Behavior::kCsl, 4, {5, 300}, -6.0, 5.0, kC4Orders),
      make_row("H1", Behavior::kHrdl, 1, {15, 25}, -0.3, 0.3, kH12Orders),
      make_row("H2", Behavior::kHrdl, 2, {15, 25}, -0.6, 0.7, kH12Orders),
      make_row("H3", Behavior::kHrdl, 3, {70, 100}, -2.5, 2.0, kH3Orders),
      make_row("H4", Behavior::kHrdl, 4, {160, 200}, -6.0, 5.0, kH4Orders),
  };
  return rows;
}

bool valid_fraction(Range r) { return r.lo >= 0.0 && r.hi <= 1.0 && r.lo <= r.hi; }

TrendId draw_trend(Behavior behavior, SampleRng& rng) {
  const double u = rng.unit();
  if (behavior == Behavior::kCsl) {
    if (u < 0.5) return TrendId::kIncreasing;
    return u < 0.75 ? TrendId::kUnimodalMid : TrendId::kUnimodalEdge;
  }
  if (u < 0.5) return TrendId::kConstant;
  return u < 0.75 ? TrendId::kIncreasing : TrendId::kUnimodalMid;
}

}  // namespace

std::string_view to_string(Behavior b) { return b == Behavior::kCsl ? "CSL" : "HRDL"; }

Behavior parse_behavior(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "csl") return Behavior::kCsl;
  if (lower == "hrdl") return Behavior::kHrdl;
  throw std::invalid_argument("unknown behavior '" + std::string(text) + "' (expected csl or hrdl)");
}

char behavior_prefix(Behavior b) { return b == Behavior::kCsl ? 'C' : 'H'; }

void LevelSpec::validate() const {
  if (!(radius.lo > 0.0 && radius.lo <= radius.hi)) throw std::invalid_argument(id + ": bad radius range");
  if (!(neg_bound < 0.0 && pos_bound > 0.0)) throw std::invalid_argument(id + ": overall range must straddle 0");
  if (level < 1 || level > 4) throw std::invalid_argument(id + ": level must be 1..4");
  for (const auto& [j, r] : per_order) {
    NollIndex{j};
    if (!valid_fraction(r.negative) || !valid_fraction(r.positive)) {
      throw std::invalid_argument(id + ": peak fractions of order " + std::to_string(j) + " outside [0, 1]");
    }
  }
}

LevelSpec level_spec(std::string_view id) {
  for (const auto& row : builtin_rows()) {
    if (row.id == id) return row;
  }
  throw std::out_of_range("unknown level '" + std::string(id) + "' (expected C1..C4 or H1..H4)");
}

LevelSpec level_spec(Behavior behavior, int level) {
  return level_spec(std::string(1, behavior_prefix(behavior)) + std::to_string(level));
}

double curve_peak(const LevelSpec& spec, bool negative, double r) {
  return negative ? -r * std::abs(spec.neg_bound) : r * std::abs(spec.pos_bound);
}

double sample_curve_peak(const LevelSpec& spec, NollIndex j, SampleRng& rng) {
  const bool negative = rng.coin();
  Range range = kDefaultPeakFraction;
  if (auto it = spec.per_order.find(j.value()); it != spec.per_order.end()) {
    range = negative ? it->second.negative : it->second.positive;
  }
  return curve_peak(spec, negative, rng.uniform(range.lo, range.hi));
}

std::string_view to_string(TrendId t) {
  switch (t) {
    case TrendId::kConstant: return "constant";
    case TrendId::kIncreasing: return "increasing";
    case TrendId::kDecreasing: return "decreasing";
    case TrendId::kUnimodalMid: return "unimodal_mid";
    case TrendId::kUnimodalEdge: return "unimodal_edge";
  }
  return "constant";
}

TrendId parse_trend(std::string_view text) {
  for (TrendId t : {TrendId::kConstant, TrendId::kIncreasing, TrendId::kDecreasing, TrendId::kUnimodalMid,
                    TrendId::kUnimodalEdge}) {
    if (to_string(t) == text) return t;
  }
  throw std::invalid_argument("unknown trend '" + std::string(text) + "'");
}

std::vector<double> fit_fov_curve(TrendId trend, double peak, int n) {
  if (n < 2) throw std::invalid_argument("fit_fov_curve needs at least 2 FoVs");
  std::vector<double> curve(static_cast<std::size_t>(n));
  const double last = n - 1;
  const int mid = n / 2;
  // Quadratic through (0, 0), (mid, peak), (last, 0); normalized so f(mid) == peak exactly.
  const double mid_scale = static_cast<double>(mid) * (last - mid);
  for (int i = 0; i < n; ++i) {
    const double t = i / last;
    double v = 0.0;
    switch (trend) {
      case TrendId::kConstant: v = peak; break;
      case TrendId::kIncreasing: v = peak * t; break;
      case TrendId::kDecreasing: v = peak * ((last - i) / last); break;
      case TrendId::kUnimodalMid: v = peak * ((i * (last - i)) / mid_scale); break;
      case TrendId::kUnimodalEdge: v = peak * (t * t); break;
    }
    curve[static_cast<std::size_t>(i)] = v + 0.0;  // folds -0.0 into +0.0
  }
  return curve;
}

RadiusCurve radius_targets(const LevelSpec& spec, Behavior behavior, SampleRng& rng) {
  const double lo = spec.radius.lo;
  const double hi = spec.radius.hi;
  const double center = std::clamp(rng.uniform(lo, lo * 1.2), lo, hi);
  const double edge = std::clamp(rng.uniform(hi * 0.8, hi), lo, hi);
  RadiusCurve curve{};
  for (int i = 0; i < kFovCount; ++i) {
    const double t = static_cast<double>(i) / (kFovCount - 1);
    const double w = behavior == Behavior::kCsl ? t * t : t;
    curve[static_cast<std::size_t>(i)] = std::clamp(center * (1.0 - w) + edge * w, lo, hi);
  }
  return curve;
}

ZernikeCoefficients ZernikeField::column(int fov, int channel) const {
  ZernikeCoefficients c{};
  for (int k = 0; k < kZernikeTerms; ++k) c[static_cast<std::size_t>(k)] = at(k, fov, channel);
  return c;
}

void VplSample::validate() const {
  spec.validate();
  for (double v : coeffs.values()) {
    if (!(v >= spec.neg_bound && v <= spec.pos_bound)) {
      throw std::invalid_argument(id + ": coefficient " + format_double(v) + " outside overall range");
    }
  }
  for (int i = 0; i < kFovCount; ++i) {
    const double r = radius_targets[static_cast<std::size_t>(i)];
    if (!(r >= spec.radius.lo && r <= spec.radius.hi)) {
      throw std::invalid_argument(id + ": radius target outside radius range");
    }
    if (behavior == Behavior::kCsl && i > 0 && r < radius_targets[static_cast<std::size_t>(i - 1)]) {
      throw std::invalid_argument(id + ": CSL radius targets must be non-decreasing");
    }
  }
}

VplSample sample_vpl(const LevelSpec& spec, Behavior behavior, std::uint64_t seed, const GeneratorOptions& options) {
  spec.validate();
  if (spec.behavior != behavior) {
    throw std::invalid_argument("level " + spec.id + " does not belong to behavior " + std::string(to_string(behavior)));
  }
  if (!(options.chromatic_jitter >= 0.0 && options.chromatic_jitter < 1.0)) {
    throw std::invalid_argument("chromatic jitter must lie in [0, 1)");
  }
  SampleRng rng(seed);
  VplSample s;
  s.group = spec.id;
  s.id = spec.id + "-" + std::to_string(seed);
  s.behavior = behavior;
  s.level = spec.level;
  s.seed = seed;
  s.spec = spec;

  for (int j = 1; j <= kZernikeTerms; ++j) {
    const std::size_t slot = static_cast<std::size_t>(j - 1);
    TrendId trend = draw_trend(behavior, rng);
    double peak = sample_curve_peak(spec, NollIndex(j), rng);
    // HRDL's increasing trend is the shallow variant: half the drawn peak at the edge.
    if (behavior == Behavior::kHrdl && trend == TrendId::kIncreasing) peak *= 0.5;
    s.trends[slot] = trend;
    const std::vector<double> curve = fit_fov_curve(trend, peak, kFovCount);
    std::array<double, kChannels> jitter{};
    for (auto& m : jitter) m = rng.uniform(1.0 - options.chromatic_jitter, 1.0 + options.chromatic_jitter);
    for (int fov = 0; fov < kFovCount; ++fov) {
      for (int ch = 0; ch < kChannels; ++ch) {
        const double v = curve[static_cast<std::size_t>(fov)] * jitter[static_cast<std::size_t>(ch)];
        s.coeffs.at(j - 1, fov, ch) = std::clamp(v, spec.neg_bound, spec.pos_bound) + 0.0;
      }
    }
  }
  s.radius_targets = radius_targets(spec, behavior, rng);
  return s;
}

std::vector<VplSample> sample_level5(Behavior behavior, int count, std::span<const std::uint64_t> seeds,
                                     const GeneratorOptions& options) {
  if (count < 4) throw std::invalid_argument("level-5 sets need at least 4 samples");
  if (seeds.size() != static_cast<std::size_t>(count)) {
    throw std::invalid_argument("level-5 generation needs exactly one seed per sample");
  }
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw std::invalid_argument("level-5 seeds must be distinct");
  }
  const std::string group = std::string(1, behavior_prefix(behavior)) + "5";
  std::vector<VplSample> out;
  out.reserve(seeds.size());
  for (int i = 0; i < count; ++i) {
    const std::uint64_t seed = seeds[static_cast<std::size_t>(i)];
    VplSample s = sample_vpl(level_spec(behavior, i % 4 + 1), behavior, seed, options);
    s.group = group;
    s.id = group + "-" + std::to_string(seed);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace vpl
