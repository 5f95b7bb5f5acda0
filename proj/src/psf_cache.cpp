#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "vpl/diffraction.hpp"
#include "vpl/errors.hpp"

namespace vpl {

namespace {

constexpr char kMagic[8] = {'V', 'P', 'L', 'P', 'S', 'F', '\0', '\0'};
constexpr std::uint32_t kCacheVersion = 1;

static_assert(std::endian::native == std::endian::little, "cache I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError("PSF cache is truncated");
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  const auto n = get<std::uint32_t>(in);
  if (n > (1u << 20)) throw FormatError("PSF cache string field is implausibly long");
  std::string s(n, '\0');
  if (!in.read(s.data(), n)) throw FormatError("PSF cache is truncated");
  return s;
}

}  // namespace

void write_psf_grid(const PsfGrid& grid, std::ostream& out) {
  grid.validate();
  out.write(kMagic, sizeof kMagic);
  put(out, kCacheVersion);
  put_string(out, to_json(grid.config));
  put_string(out, grid.source_id);
  const auto size = static_cast<std::uint32_t>(grid.kernel_size());
  put(out, size);
  put(out, static_cast<std::uint32_t>(kFovCount));
  put(out, static_cast<std::uint32_t>(kChannels));
  for (const PsfKernel& k : grid.kernels) {
    put(out, static_cast<std::uint32_t>(k.fov_index));
    put(out, static_cast<std::uint32_t>(k.channel));
    put(out, k.pitch_um);
    out.write(reinterpret_cast<const char*>(k.weights.data()), static_cast<std::streamsize>(k.weights.size() * sizeof(double)));
  }
}

PsfGrid read_psf_grid(std::istream& in) {
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw FormatError("not a PSF cache file");
  }
  if (get<std::uint32_t>(in) != kCacheVersion) throw FormatError("unsupported PSF cache version");
  PsfGrid grid;
  try {
    grid.config = diffraction_config_from_json(get_string(in));
  } catch (const ConfigError& e) {
    throw FormatError(std::string("PSF cache config echo is invalid: ") + e.what());
  }
  grid.source_id = get_string(in);
  const auto size = get<std::uint32_t>(in);
  const auto fovs = get<std::uint32_t>(in);
  const auto channels = get<std::uint32_t>(in);
  if (fovs != kFovCount || channels != kChannels || size == 0 || size % 2 == 0 || size > 4095) {
    throw FormatError("PSF cache header has an unexpected shape");
  }
  grid.kernels.resize(static_cast<std::size_t>(fovs) * channels);
  for (PsfKernel& k : grid.kernels) {
    k.size = static_cast<int>(size);
    k.fov_index = static_cast<int>(get<std::uint32_t>(in));
    const auto ch = get<std::uint32_t>(in);
    if (ch >= kChannels) throw FormatError("PSF cache channel out of range");
    k.channel = static_cast<Channel>(ch);
    k.pitch_um = get<double>(in);
    k.weights.resize(static_cast<std::size_t>(size) * size);
    if (!in.read(reinterpret_cast<char*>(k.weights.data()), static_cast<std::streamsize>(k.weights.size() * sizeof(double)))) {
      throw FormatError("PSF cache is truncated");
    }
    update_centroid(k);
  }
  try {
    grid.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("PSF cache is inconsistent: ") + e.what());
  }
  return grid;
}

void save_psf_grid(const PsfGrid& grid, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_psf_grid(grid, out);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

PsfGrid load_psf_grid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return read_psf_grid(in);
}

}  // namespace vpl
