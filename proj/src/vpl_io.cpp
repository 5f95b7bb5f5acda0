#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "vpl/errors.hpp"
#include "vpl/vplgen.hpp"

namespace vpl {

namespace {

using nlohmann::json;

void write_range(std::ostream& out, Range r) {
  out << '[' << format_double(r.lo) << ", " << format_double(r.hi) << ']';
}

void write_level_spec(std::ostream& out, const LevelSpec& spec) {
  out << "{\"id\": " << json(spec.id).dump() << ", \"behavior\": \"" << to_string(spec.behavior)
      << "\", \"level\": " << spec.level << ", \"radius\": ";
  write_range(out, spec.radius);
  out << ", \"overall\": ";
  write_range(out, {spec.neg_bound, spec.pos_bound});
  out << ", \"per_order\": {";
  bool first = true;
  for (const auto& [j, r] : spec.per_order) {
    out << (first ? "" : ", ") << '"' << j << "\": [";
    write_range(out, r.negative);
    out << ", ";
    write_range(out, r.positive);
    out << ']';
    first = false;
  }
  out << "}}";
}

Range read_range(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

LevelSpec read_level_spec(const json& j) {
  LevelSpec spec;
  spec.id = j.at("id").get<std::string>();
  spec.behavior = parse_behavior(j.at("behavior").get<std::string>());
  spec.level = j.at("level").get<int>();
  spec.radius = read_range(j.at("radius"));
  const Range overall = read_range(j.at("overall"));
  spec.neg_bound = overall.lo;
  spec.pos_bound = overall.hi;
  for (const auto& [key, value] : j.at("per_order").items()) {
    spec.per_order[std::stoi(key)] = OrderRange{read_range(value.at(0)), read_range(value.at(1))};
  }
  return spec;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s(buf);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

void write_vpl_sample(const VplSample& s, std::ostream& out) {
  out << "{\n";
  out << "  \"schema_version\": " << kSampleSchemaVersion << ",\n";
  out << "  \"id\": " << json(s.id).dump() << ",\n";
  out << "  \"group\": " << json(s.group).dump() << ",\n";
  out << "  \"behavior\": \"" << to_string(s.behavior) << "\",\n";
  out << "  \"level\": " << s.level << ",\n";
  out << "  \"seed\": " << s.seed << ",\n";
  out << "  \"level_spec\": ";
  write_level_spec(out, s.spec);
  out << ",\n  \"trend_log\": [";
  for (std::size_t k = 0; k < s.trends.size(); ++k) out << (k ? ", " : "") << '"' << to_string(s.trends[k]) << '"';
  out << "],\n  \"radius_targets\": [";
  for (std::size_t k = 0; k < s.radius_targets.size(); ++k) out << (k ? ", " : "") << format_double(s.radius_targets[k]);
  out << "],\n  \"coefficients\": [\n";
  for (int j = 0; j < kZernikeTerms; ++j) {
    out << "    [";
    for (int fov = 0; fov < kFovCount; ++fov) {
      out << (fov ? ", [" : "[");
      for (int ch = 0; ch < kChannels; ++ch) out << (ch ? ", " : "") << format_double(s.coeffs.at(j, fov, ch));
      out << ']';
    }
    out << (j + 1 < kZernikeTerms ? "],\n" : "]\n");
  }
  out << "  ]\n}\n";
}

VplSample read_vpl_sample(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(std::string("sample file is not valid JSON: ") + e.what());
  }
  try {
    if (doc.at("schema_version").get<int>() != kSampleSchemaVersion) {
      throw FormatError("unsupported sample schema version");
    }
    VplSample s;
    s.id = doc.at("id").get<std::string>();
    s.group = doc.at("group").get<std::string>();
    s.behavior = parse_behavior(doc.at("behavior").get<std::string>());
    s.level = doc.at("level").get<int>();
    s.seed = doc.at("seed").get<std::uint64_t>();
    s.spec = read_level_spec(doc.at("level_spec"));
    const auto& trends = doc.at("trend_log");
    const auto& radii = doc.at("radius_targets");
    const auto& coeffs = doc.at("coefficients");
    if (trends.size() != kZernikeTerms || radii.size() != kFovCount || coeffs.size() != kZernikeTerms) {
      throw FormatError("sample arrays have the wrong shape");
    }
    for (int j = 0; j < kZernikeTerms; ++j) s.trends[static_cast<std::size_t>(j)] = parse_trend(trends.at(j).get<std::string>());
    for (int i = 0; i < kFovCount; ++i) s.radius_targets[static_cast<std::size_t>(i)] = radii.at(i).get<double>();
    for (int j = 0; j < kZernikeTerms; ++j) {
      const auto& row = coeffs.at(j);
      if (row.size() != kFovCount) throw FormatError("coefficient row has the wrong length");
      for (int fov = 0; fov < kFovCount; ++fov) {
        const auto& cell = row.at(fov);
        if (cell.size() != kChannels) throw FormatError("coefficient cell must hold 3 channels");
        for (int ch = 0; ch < kChannels; ++ch) s.coeffs.at(j, fov, ch) = cell.at(ch).get<double>();
      }
    }
    return s;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed sample file: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("malformed sample file: ") + e.what());
  }
}

void save_vpl_sample(const VplSample& sample, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_vpl_sample(sample, out);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

VplSample load_vpl_sample(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return read_vpl_sample(in);
}

}  // namespace vpl
