#pragma once

// Batch degradation of an image list described by a tab-separated manifest.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vpl/render.hpp"

namespace vpl {

inline constexpr int kManifestVersion = 1;

struct ManifestEntry {
  std::filesystem::path input;
  std::filesystem::path output;        ///< empty: <stem>__<sample-id>.png in the output directory
  std::string sample_id;               ///< empty: drawn from the sample set
  std::optional<std::uint64_t> seed;   ///< empty: run seed + entry index
  std::string status;                  ///< "ok", "failed: <reason>" or empty before a run
};

/// Text form:
///   # vplsim-manifest<TAB>version=1
///   #config<TAB><json>          (zero or more)
///   input<TAB>output<TAB>sample_id<TAB>seed<TAB>status
///   one record per line, "-" for an empty field; trailing fields may be omitted
struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::vector<std::string> config;  ///< echoed config lines, verbatim
};

DatasetManifest read_manifest(std::istream& in);
void write_manifest(const DatasetManifest& manifest, std::ostream& out);
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

struct DatasetOptions {
  DiffractionConfig optics;
  RenderOptions render;               ///< render.jobs bounds all parallel work
  std::uint64_t seed = 0;
  std::filesystem::path input_root;   ///< relative inputs resolve against this
  std::filesystem::path output_dir;
  std::filesystem::path psf_cache_dir;  ///< optional; grids named <sample-id>.psf are reused
};

struct DatasetReport {
  DatasetManifest manifest;  ///< completed: every entry has output, sample, seed and status
  std::size_t succeeded = 0;
  std::size_t failed = 0;
};

/// Default output name for an input and sample.
std::filesystem::path default_output_name(const std::filesystem::path& input, const std::string& sample_id);

/// Sample index for an unassigned entry: a uniform draw seeded by the entry seed.
std::size_t assign_sample(std::uint64_t entry_seed, std::size_t sample_count);

/// Degrades every entry with its assigned sample. Per-entry failures are recorded in the
/// report; std::runtime_error if all entries fail, std::invalid_argument for an empty sample
/// set, an unknown sample id or duplicate paths.
DatasetReport degrade_dataset(const DatasetManifest& manifest, const std::vector<VplSample>& samples,
                              const DatasetOptions& options);

}  // namespace vpl
