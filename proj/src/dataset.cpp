#include "vpl/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "vpl/errors.hpp"
#include "vpl/parallel.hpp"

namespace vpl {

namespace {

constexpr const char* kHeader = "# vplsim-manifest";
constexpr const char* kConfigPrefix = "#config\t";
constexpr const char* kColumns = "input\toutput\tsample_id\tseed\tstatus";

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::string::size_type start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

std::string field_or_dash(const std::string& s) { return s.empty() ? "-" : s; }

std::string sanitize(std::string s) {
  std::replace_if(s.begin(), s.end(), [](char c) { return c == '\t' || c == '\n' || c == '\r'; }, ' ');
  return s;
}

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& root) {
  return p.is_absolute() || root.empty() ? p : root / p;
}

}  // namespace

DatasetManifest read_manifest(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind(kHeader, 0) != 0) throw FormatError("missing manifest header line");
  const auto header = split_tabs(line);
  if (header.size() < 2 || header[1] != "version=" + std::to_string(kManifestVersion)) {
    throw FormatError("unsupported manifest version");
  }
  DatasetManifest m;
  bool columns_seen = false;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!columns_seen) {
      if (line.rfind(kConfigPrefix, 0) == 0) {
        m.config.push_back(line.substr(std::char_traits<char>::length(kConfigPrefix)));
        continue;
      }
      if (line != kColumns) throw FormatError("manifest line " + std::to_string(line_no) + ": expected column header");
      columns_seen = true;
      continue;
    }
    auto fields = split_tabs(line);
    if (fields.size() > 5) throw FormatError("manifest line " + std::to_string(line_no) + ": too many fields");
    fields.resize(5, "-");
    for (auto& f : fields) {
      if (f == "-") f.clear();
    }
    if (fields[0].empty()) throw FormatError("manifest line " + std::to_string(line_no) + ": empty input path");
    ManifestEntry e;
    e.input = fields[0];
    e.output = fields[1];
    e.sample_id = fields[2];
    if (!fields[3].empty()) {
      std::size_t used = 0;
      try {
        e.seed = std::stoull(fields[3], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != fields[3].size()) throw FormatError("manifest line " + std::to_string(line_no) + ": bad seed");
    }
    e.status = fields[4];
    m.entries.push_back(std::move(e));
  }
  if (!columns_seen) throw FormatError("manifest has no column header");
  return m;
}

void write_manifest(const DatasetManifest& manifest, std::ostream& out) {
  out << kHeader << "\tversion=" << kManifestVersion << '\n';
  for (const auto& c : manifest.config) out << kConfigPrefix << c << '\n';
  out << kColumns << '\n';
  for (const auto& e : manifest.entries) {
    out << e.input.generic_string() << '\t' << field_or_dash(e.output.generic_string()) << '\t'
        << field_or_dash(e.sample_id) << '\t' << (e.seed ? std::to_string(*e.seed) : "-") << '\t'
        << field_or_dash(sanitize(e.status)) << '\n';
  }
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read manifest " + path.string());
  return read_manifest(in);
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest " + path.string());
  write_manifest(manifest, out);
  if (!out) throw std::runtime_error("failed writing manifest " + path.string());
}

std::filesystem::path default_output_name(const std::filesystem::path& input, const std::string& sample_id) {
  return input.stem().string() + "__" + sample_id + ".png";
}

std::size_t assign_sample(std::uint64_t entry_seed, std::size_t sample_count) {
  if (sample_count == 0) throw std::invalid_argument("sample set is empty");
  SampleRng rng(entry_seed);
  return std::min(sample_count - 1, static_cast<std::size_t>(rng.unit() * static_cast<double>(sample_count)));
}

DatasetReport degrade_dataset(const DatasetManifest& manifest, const std::vector<VplSample>& samples,
                              const DatasetOptions& options) {
  if (samples.empty()) throw std::invalid_argument("sample set is empty");
  if (manifest.entries.empty()) throw std::invalid_argument("manifest has no entries");
  options.optics.validate();
  options.render.layout.validate();

  std::map<std::string, const VplSample*> by_id;
  for (const auto& s : samples) {
    if (!by_id.emplace(s.id, &s).second) throw std::invalid_argument("duplicate sample id " + s.id);
  }
  std::vector<std::string> sorted_ids;
  for (const auto& [id, s] : by_id) sorted_ids.push_back(id);

  DatasetReport report;
  report.manifest = manifest;
  std::set<std::filesystem::path> outputs;
  for (std::size_t i = 0; i < report.manifest.entries.size(); ++i) {
    ManifestEntry& e = report.manifest.entries[i];
    if (!e.seed) e.seed = options.seed + i;
    if (e.sample_id.empty()) {
      e.sample_id = sorted_ids[assign_sample(*e.seed, sorted_ids.size())];
    } else if (!by_id.contains(e.sample_id)) {
      throw std::invalid_argument("manifest references unknown sample " + e.sample_id);
    }
    if (e.output.empty()) e.output = default_output_name(e.input, e.sample_id);
    const auto out_path = std::filesystem::absolute(resolve(e.output, options.output_dir)).lexically_normal();
    if (!outputs.insert(out_path).second) throw std::invalid_argument("duplicate output path " + out_path.string());
    if (out_path == std::filesystem::absolute(resolve(e.input, options.input_root)).lexically_normal()) {
      throw std::invalid_argument("output would overwrite input " + e.input.string());
    }
  }

  std::set<std::string> used_ids;
  for (const auto& e : report.manifest.entries) used_ids.insert(e.sample_id);
  const std::vector<std::string> ids(used_ids.begin(), used_ids.end());
  std::map<std::string, PsfGrid> grids;
  for (const auto& id : ids) {
    PsfGrid grid;
    bool cached = false;
    const auto cache_file = options.psf_cache_dir / (id + ".psf");
    if (!options.psf_cache_dir.empty() && std::filesystem::exists(cache_file)) {
      grid = load_psf_grid(cache_file);
      DiffractionConfig cached_cfg = grid.config;
      cached_cfg.pixel_pitch_um = options.optics.pixel_pitch_um;
      cached = grid.source_id == id && cached_cfg == options.optics;
      if (cached && grid.pitch_um() != options.optics.pixel_pitch_um) {
        grid = resample_grid_to_pitch(grid, options.optics.pixel_pitch_um);
      }
    }
    if (!cached) grid = build_psf_grid(*by_id.at(id), options.optics, options.render.jobs);
    grids.emplace(id, std::move(grid));
  }

  std::filesystem::create_directories(options.output_dir.empty() ? "." : options.output_dir);
  const std::size_t count = report.manifest.entries.size();
  RenderOptions inner = options.render;
  if (count > 1) inner.jobs = 1;
  parallel_for(count, count > 1 ? options.render.jobs : 1, [&](std::size_t i) {
    ManifestEntry& e = report.manifest.entries[i];
    try {
      const RgbImage input = load_image(resolve(e.input, options.input_root));
      save_image(degrade_image(input, grids.at(e.sample_id), inner), resolve(e.output, options.output_dir));
      e.status = "ok";
    } catch (const std::exception& ex) {
      e.status = std::string("failed: ") + ex.what();
    }
  });
  for (const auto& e : report.manifest.entries) (e.status == "ok" ? report.succeeded : report.failed)++;
  if (report.succeeded == 0) {
    throw std::runtime_error("every manifest entry failed; first: " + report.manifest.entries.front().status);
  }
  return report;
}

}  // namespace vpl
