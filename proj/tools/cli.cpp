#include "cli.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "vpl/dataset.hpp"
#include "vpl/diffraction.hpp"
#include "vpl/errors.hpp"
#include "vpl/render.hpp"
#include "vpl/segeval.hpp"
#include "vpl/vplgen.hpp"

namespace vpl::cli {

namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

constexpr const char* kSampleSuffix = ".vpl.json";
constexpr const char* kRunConfigName = "run_config.json";

// Raised for arguments that parse but name nothing valid (e.g. --level C9).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  DiffractionConfig optics;
  PatchLayout layout;
  std::uint64_t seed = 0;
  int jobs = 0;
};

std::string run_config_json(const RunConfig& rc) {
  std::ostringstream out;
  out << "{\"optics\": " << to_json(rc.optics) << ", \"layout\": {\"patch_size\": " << rc.layout.patch_size
      << ", \"overlap\": " << rc.layout.overlap << "}, \"seed\": " << rc.seed << "}";
  return out.str();
}

void apply_config_file(RunConfig& rc, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
    if (j.contains("optics")) rc.optics = diffraction_config_from_json(j.at("optics").dump());
    if (j.contains("layout")) {
      const auto& l = j.at("layout");
      if (l.contains("patch_size")) rc.layout.patch_size = l.at("patch_size").get<int>();
      if (l.contains("overlap")) rc.layout.overlap = l.at("overlap").get<int>();
    }
    if (j.contains("seed")) rc.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("jobs")) rc.jobs = j.at("jobs").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("invalid config " + path.string() + ": " + e.what());
  }
}

// Flags that feed the RunConfig. Each is applied only when given, so it wins over --config.
struct ConfigFlags {
  std::optional<int> pupil_samples, padding, window, kernel_size, patch_size, overlap;
  std::optional<double> pixel_pitch, threshold;

  void add_optics(CLI::App* app) {
    app->add_option("--pupil-samples", pupil_samples, "Pupil grid size (power of two)");
    app->add_option("--padding", padding, "FFT padding factor");
    app->add_option("--window", window, "Optical-pitch PSF crop (odd)");
    app->add_option("--kernel-size", kernel_size, "Final kernel size (odd)");
    app->add_option("--pixel-pitch", pixel_pitch, "Sensor pixel pitch, micrometres");
    app->add_option("--truncation-threshold", threshold, "Largest tolerated crop energy loss");
  }
  void add_layout(CLI::App* app) {
    app->add_option("--patch-size", patch_size, "Convolution patch size, pixels");
    app->add_option("--overlap", overlap, "Patch overlap, pixels");
  }
  void apply(RunConfig& rc) const {
    if (pupil_samples) rc.optics.pupil_samples = *pupil_samples;
    if (padding) rc.optics.padding_factor = *padding;
    if (window) rc.optics.diffraction_window = *window;
    if (kernel_size) rc.optics.psf_kernel_size = *kernel_size;
    if (pixel_pitch) rc.optics.pixel_pitch_um = *pixel_pitch;
    if (threshold) rc.optics.truncation_threshold = *threshold;
    if (patch_size) rc.layout.patch_size = *patch_size;
    if (overlap) rc.layout.overlap = *overlap;
  }
};

struct LevelSelection {
  Behavior behavior;
  int level;  // 1..5
};

LevelSelection parse_level(const std::string& level_text, const std::string& behavior_text) {
  std::string lv = level_text;
  std::transform(lv.begin(), lv.end(), lv.begin(), [](unsigned char c) { return std::toupper(c); });
  std::optional<Behavior> from_level;
  if (!lv.empty() && (lv[0] == 'C' || lv[0] == 'H')) {
    from_level = lv[0] == 'C' ? Behavior::kCsl : Behavior::kHrdl;
    lv.erase(0, 1);
  }
  if (lv.size() != 1 || lv[0] < '1' || lv[0] > '5') throw UsageError("unknown level '" + level_text + "' (expected 1-5 or C1-C5/H1-H5)");
  std::optional<Behavior> from_flag;
  if (!behavior_text.empty()) {
    try {
      from_flag = parse_behavior(behavior_text);
    } catch (const std::exception&) {
      throw UsageError("unknown behavior '" + behavior_text + "' (expected csl or hrdl)");
    }
  }
  if (from_level && from_flag && *from_level != *from_flag) throw UsageError("--behavior contradicts --level");
  if (!from_level && !from_flag) throw UsageError("--behavior is required with a numeric --level");
  return {from_level ? *from_level : *from_flag, lv[0] - '0'};
}

std::vector<VplSample> load_samples(const std::vector<fs::path>& inputs) {
  std::vector<fs::path> files;
  for (const auto& p : inputs) {
    if (fs::is_directory(p)) {
      for (const auto& e : fs::directory_iterator(p)) {
        const std::string name = e.path().filename().string();
        if (e.is_regular_file() && name.size() > std::string(kSampleSuffix).size() &&
            name.ends_with(kSampleSuffix)) {
          files.push_back(e.path());
        }
      }
    } else {
      files.push_back(p);
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::invalid_argument("no sample files found");
  std::vector<VplSample> samples;
  for (const auto& f : files) {
    VplSample s = load_vpl_sample(f);
    s.validate();
    samples.push_back(std::move(s));
  }
  return samples;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw std::runtime_error("cannot write " + path.string());
}

void write_run_config(const fs::path& dir, const std::string& command, const RunConfig& rc) {
  write_text(dir / kRunConfigName, "{\"command\": \"" + command + "\", \"config\": " + run_config_json(rc) + "}\n");
}

class Runner {
 public:
  Runner(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

  int run(const std::vector<std::string>& args) {
    CLI::App app{"Virtual prototype lens simulator", "vplsim"};
    app.set_version_flag("--version", std::string("vplsim ") + kVersion);
    app.require_subcommand(1);
    app.fallthrough();
    fs::path config_file;
    fs::path summary_path;
    std::optional<int> jobs;
    std::optional<std::uint64_t> seed;
    app.add_option("--config", config_file, "JSON run config; flags override it")->check(CLI::ExistingFile);
    app.add_option("--json-summary", summary_path, "Write a machine-readable summary here");
    app.add_option("--jobs", jobs, "Worker threads (default: all cores)")->check(CLI::NonNegativeNumber);

    ConfigFlags flags;

    // gen
    auto* gen = app.add_subcommand("gen", "Generate VPL sample files");
    std::string behavior_text, level_text;
    int count = 0;
    fs::path out_dir;
    gen->add_option("--behavior", behavior_text, "csl or hrdl");
    gen->add_option("--level", level_text, "1-5, or C1-C5 / H1-H5")->required();
    gen->add_option("--count", count, "Number of samples (default 1, or 20 for level 5)")->check(CLI::PositiveNumber);
    gen->add_option("--seed", seed, "First seed; sample k uses seed + k")->required();
    gen->add_option("--out", out_dir, "Output directory")->required();

    // psf
    auto* psf = app.add_subcommand("psf", "Build and cache PSF grids");
    std::vector<fs::path> sample_inputs;
    psf->add_option("--sample,--samples", sample_inputs, "Sample files or directories")->required();
    psf->add_option("--out", out_dir, "Cache directory")->required();
    flags.add_optics(psf);

    // degrade
    auto* degrade = app.add_subcommand("degrade", "Degrade an image or a manifest of images");
    fs::path manifest_path, image_path, psf_cache;
    std::string sample_id;
    auto* manifest_opt = degrade->add_option("--manifest", manifest_path, "Dataset manifest (TSV)")->check(CLI::ExistingFile);
    auto* image_opt = degrade->add_option("--image", image_path, "Single input image")->check(CLI::ExistingFile);
    manifest_opt->excludes(image_opt);
    degrade->add_option("--samples", sample_inputs, "Sample files or directories")->required();
    degrade->add_option("--sample-id", sample_id, "Sample to use with --image");
    degrade->add_option("--seed", seed, "Assignment seed");
    degrade->add_option("--out", out_dir, "Output directory")->required();
    degrade->add_option("--psf-cache", psf_cache, "Directory of cached grids from `psf`");
    flags.add_optics(degrade);
    flags.add_layout(degrade);

    // checkerboard
    auto* checker = app.add_subcommand("checkerboard", "Render a degraded checkerboard");
    fs::path sample_file, out_file;
    CheckerboardOptions cb;
    checker->add_option("--sample", sample_file, "Sample file")->required()->check(CLI::ExistingFile);
    checker->add_option("--out", out_file, "Output PNG")->required();
    checker->add_option("--width", cb.width, "Image width")->check(CLI::PositiveNumber);
    checker->add_option("--height", cb.height, "Image height")->check(CLI::PositiveNumber);
    checker->add_option("--square", cb.square_px, "Square size, pixels")->check(CLI::PositiveNumber);
    flags.add_optics(checker);
    flags.add_layout(checker);

    // eval
    auto* eval = app.add_subcommand("eval", "Score predictions against ground truth (mIoU)");
    fs::path pred_dir, gt_dir;
    int classes = kCityscapesClasses;
    int ignore_index = kIgnoreIndex;
    eval->add_option("--pred", pred_dir, "Prediction label directory")->required()->check(CLI::ExistingDirectory);
    eval->add_option("--gt", gt_dir, "Ground-truth label directory")->required()->check(CLI::ExistingDirectory);
    eval->add_option("--classes", classes, "Number of classes")->check(CLI::PositiveNumber);
    eval->add_option("--ignore-index", ignore_index, "Ignored ground-truth label");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
      app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
      out_ << app.help();
      return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
      out_ << app.help("", CLI::AppFormatMode::All);
      return kExitOk;
    } catch (const CLI::CallForVersion&) {
      out_ << app.version() << '\n';
      return kExitOk;
    } catch (const CLI::ParseError& e) {
      err_ << "error: " << e.what() << "\n" << "run with --help for usage\n";
      return kExitUsage;
    }

    try {
      RunConfig rc;
      if (!config_file.empty()) apply_config_file(rc, config_file);
      flags.apply(rc);
      if (jobs) rc.jobs = *jobs;
      if (seed) rc.seed = *seed;
      rc.optics.validate();
      rc.layout.validate();
      summary_ = ojson::object();

      if (*gen) {
        const LevelSelection sel = parse_level(level_text, behavior_text);
        run_gen(rc, sel, count, out_dir);
      } else if (*psf) {
        run_psf(rc, sample_inputs, out_dir);
      } else if (*degrade) {
        if (manifest_path.empty() == image_path.empty()) throw UsageError("degrade needs exactly one of --manifest or --image");
        run_degrade(rc, manifest_path, image_path, sample_id, sample_inputs, out_dir, psf_cache);
      } else if (*checker) {
        run_checkerboard(rc, sample_file, out_file, cb);
      } else if (*eval) {
        run_eval(rc, pred_dir, gt_dir, classes, ignore_index);
      }
      if (!summary_path.empty()) write_text(summary_path, summary_.dump(2) + "\n");
      return kExitOk;
    } catch (const UsageError& e) {
      err_ << "error: " << e.what() << '\n';
      return kExitUsage;
    } catch (const LocatedError& e) {
      err_ << "error: " << e.what() << '\n';
      return kExitFailure;
    } catch (const std::exception& e) {
      err_ << "error: " << e.what() << '\n';
      return kExitFailure;
    }
  }

 private:
  void run_gen(const RunConfig& rc, const LevelSelection& sel, int count, const fs::path& dir) {
    if (count == 0) count = sel.level == 5 ? 20 : 1;
    std::vector<std::uint64_t> seeds(static_cast<std::size_t>(count));
    std::iota(seeds.begin(), seeds.end(), rc.seed);
    std::vector<VplSample> samples;
    if (sel.level == 5) {
      samples = sample_level5(sel.behavior, count, seeds);
    } else {
      const LevelSpec spec = level_spec(sel.behavior, sel.level);
      for (auto s : seeds) samples.push_back(sample_vpl(spec, sel.behavior, s));
    }
    fs::create_directories(dir);
    write_run_config(dir, "gen", rc);
    auto& written = summary_["written"] = ojson::array();
    for (const auto& s : samples) {
      const fs::path path = dir / (s.id + kSampleSuffix);
      save_vpl_sample(s, path);
      written.push_back(path.generic_string());
    }
    summary_["command"] = "gen";
    summary_["count"] = samples.size();
    out_ << "wrote " << samples.size() << " samples to " << dir.string() << '\n';
  }

  void run_psf(const RunConfig& rc, const std::vector<fs::path>& inputs, const fs::path& dir) {
    const auto samples = load_samples(inputs);
    fs::create_directories(dir);
    write_run_config(dir, "psf", rc);
    auto& written = summary_["written"] = ojson::array();
    for (const auto& s : samples) {
      const fs::path path = dir / (s.id + ".psf");
      save_psf_grid(build_psf_grid(s, rc.optics, rc.jobs), path);
      written.push_back(path.generic_string());
      out_ << "built " << path.string() << '\n';
    }
    summary_["command"] = "psf";
  }

  void run_degrade(const RunConfig& rc, const fs::path& manifest_path, const fs::path& image_path,
                   const std::string& sample_id, const std::vector<fs::path>& inputs, const fs::path& dir,
                   const fs::path& psf_cache) {
    const auto samples = load_samples(inputs);
    DatasetManifest manifest;
    DatasetOptions opt;
    if (!manifest_path.empty()) {
      manifest = load_manifest(manifest_path);
      opt.input_root = manifest_path.parent_path();
    } else {
      manifest.entries.push_back({image_path, {}, sample_id, std::nullopt, {}});
    }
    manifest.config.push_back(run_config_json(rc));
    opt.optics = rc.optics;
    opt.render.layout = rc.layout;
    opt.render.jobs = rc.jobs;
    opt.seed = rc.seed;
    opt.output_dir = dir;
    opt.psf_cache_dir = psf_cache;
    const DatasetReport report = degrade_dataset(manifest, samples, opt);
    save_manifest(report.manifest, dir / "degraded_manifest.tsv");
    write_run_config(dir, "degrade", rc);
    summary_["command"] = "degrade";
    summary_["succeeded"] = report.succeeded;
    summary_["failed"] = report.failed;
    auto& entries = summary_["entries"] = ojson::array();
    for (const auto& e : report.manifest.entries) {
      entries.push_back({{"input", e.input.generic_string()}, {"output", e.output.generic_string()},
                         {"sample_id", e.sample_id}, {"seed", *e.seed}, {"status", e.status}});
    }
    out_ << "degraded " << report.succeeded << " of " << report.manifest.entries.size() << " images\n";
    for (const auto& e : report.manifest.entries) {
      if (e.status != "ok") err_ << "warning: " << e.input.string() << ": " << e.status << '\n';
    }
  }

  void run_checkerboard(const RunConfig& rc, const fs::path& sample_file, const fs::path& out_file,
                        CheckerboardOptions cb) {
    VplSample s = load_vpl_sample(sample_file);
    s.validate();
    cb.render.layout = rc.layout;
    cb.render.jobs = rc.jobs;
    const RgbImage img = render_checkerboard(s, rc.optics, cb);
    if (out_file.has_parent_path()) fs::create_directories(out_file.parent_path());
    save_image(img, out_file);
    const RadialSharpness sharp = radial_sharpness(img);
    summary_["command"] = "checkerboard";
    summary_["sample_id"] = s.id;
    summary_["center_gradient"] = sharp.center;
    summary_["edge_gradient"] = sharp.edge;
    summary_["edge_center_ratio"] = sharp.ratio();
    summary_["config"] = ojson::parse(run_config_json(rc));
    out_ << s.id << ": edge/center gradient ratio " << sharp.ratio() << '\n';
  }

  void run_eval(const RunConfig& rc, const fs::path& pred_dir, const fs::path& gt_dir, int classes, int ignore_index) {
    const auto pairs = pair_label_directories(pred_dir, gt_dir);
    const ConfusionMatrix conf = evaluate_pairs(pairs, classes, ignore_index, rc.jobs);
    const IouResult result = miou(conf);
    const auto& names = classes == kCityscapesClasses ? cityscapes_class_names() : std::vector<std::string>{};
    write_iou_report(result, names, out_);
    summary_ = ojson::parse(iou_summary_json(result, names));
    summary_["command"] = "eval";
    summary_["images"] = pairs.size();
  }

  std::ostream& out_;
  std::ostream& err_;
  ojson summary_;
};

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  return Runner(out, err).run(args);
}

}  // namespace vpl::cli
