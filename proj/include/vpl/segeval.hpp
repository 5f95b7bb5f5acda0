#pragma once

// Per-class IoU and mIoU from a ground-truth x prediction confusion matrix.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace vpl {

inline constexpr int kCityscapesClasses = 19;
inline constexpr int kIgnoreIndex = 255;

/// Names of the 19 Cityscapes evaluation classes, in train-id order.
const std::vector<std::string>& cityscapes_class_names();

struct LabelMap {
  int width = 0;
  int height = 0;
  std::vector<int> labels;  ///< row-major

  int at(int y, int x) const { return labels[static_cast<std::size_t>(y) * width + x]; }
};

/// Reads a single-channel 8- or 16-bit PNG.
LabelMap load_label_map(const std::filesystem::path& path);

class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int classes = kCityscapesClasses, int ignore_index = kIgnoreIndex);

  int classes() const noexcept { return n_; }
  int ignore_index() const noexcept { return ignore_; }
  /// Pixels with ground truth `gt` predicted as `pred`.
  std::uint64_t count(int gt, int pred) const { return counts_[static_cast<std::size_t>(gt) * n_ + pred]; }
  std::uint64_t total() const noexcept;

  /// Adds every pixel whose ground truth is not the ignore index. Throws std::invalid_argument
  /// on a shape mismatch or a label outside [0, classes) other than the ignore index.
  void accumulate(const LabelMap& pred, const LabelMap& gt);
  void add(int gt, int pred, std::uint64_t n = 1);
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  int n_;
  int ignore_;
  std::vector<std::uint64_t> counts_;
};

struct IouResult {
  std::vector<std::optional<double>> per_class;  ///< empty when TP + FP + FN == 0
  double miou = 0.0;
};

/// Mean over classes with a non-zero denominator; EmptyEvaluationError if there are none.
IouResult miou(const ConfusionMatrix& conf);

struct EvalPair {
  std::filesystem::path prediction;
  std::filesystem::path ground_truth;
};

/// Pairs files with the same name in both directories. Ground-truth files without a prediction
/// are an error.
std::vector<EvalPair> pair_label_directories(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir);

/// Accumulates all pairs, in parallel over images.
ConfusionMatrix evaluate_pairs(const std::vector<EvalPair>& pairs, int classes, int ignore_index, int jobs);

/// Aligned text table: one row per class, then the mIoU line.
void write_iou_report(const IouResult& result, const std::vector<std::string>& names, std::ostream& out);
/// {"miou": .., "per_class": {"road": .., ...}, "evaluated_classes": n}; undefined classes are null.
std::string iou_summary_json(const IouResult& result, const std::vector<std::string>& names);

}  // namespace vpl
