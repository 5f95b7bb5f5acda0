#include "vpl/segeval.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <set>
#include <stdexcept>

#include <json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "vpl/errors.hpp"
#include "vpl/parallel.hpp"

namespace vpl {

const std::vector<std::string>& cityscapes_class_names() {
  static const std::vector<std::string> names = {
      "road",  "sidewalk",   "building", "wall",   "fence",      "pole",  "traffic light",
      "traffic sign", "vegetation", "terrain", "sky", "person", "rider", "car",
      "truck", "bus",        "train",    "motorcycle", "bicycle"};
  return names;
}

LabelMap load_label_map(const std::filesystem::path& path) {
  const cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw std::runtime_error("cannot read label image " + path.string());
  if (raw.channels() != 1) throw FormatError(path.string() + ": label images must have one channel");
  if (raw.depth() != CV_8U && raw.depth() != CV_16U) throw FormatError(path.string() + ": labels must be 8- or 16-bit");
  LabelMap m;
  m.width = raw.cols;
  m.height = raw.rows;
  m.labels.resize(static_cast<std::size_t>(m.width) * m.height);
  for (int y = 0; y < raw.rows; ++y) {
    for (int x = 0; x < raw.cols; ++x) {
      m.labels[static_cast<std::size_t>(y) * m.width + x] =
          raw.depth() == CV_8U ? raw.ptr<std::uint8_t>(y)[x] : raw.ptr<std::uint16_t>(y)[x];
    }
  }
  return m;
}

ConfusionMatrix::ConfusionMatrix(int classes, int ignore_index)
    : n_(classes), ignore_(ignore_index), counts_(static_cast<std::size_t>(std::max(classes, 0)) * std::max(classes, 0), 0) {
  if (classes < 1) throw std::invalid_argument("class count must be positive");
  if (ignore_index >= 0 && ignore_index < classes) throw std::invalid_argument("ignore index collides with a class");
}

std::uint64_t ConfusionMatrix::total() const noexcept {
  std::uint64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

void ConfusionMatrix::add(int gt, int pred, std::uint64_t n) {
  if (gt < 0 || gt >= n_ || pred < 0 || pred >= n_) throw std::invalid_argument("label outside the class range");
  counts_[static_cast<std::size_t>(gt) * n_ + pred] += n;
}

void ConfusionMatrix::accumulate(const LabelMap& pred, const LabelMap& gt) {
  if (pred.width != gt.width || pred.height != gt.height || pred.labels.size() != gt.labels.size()) {
    throw std::invalid_argument("prediction and ground truth differ in shape");
  }
  auto valid = [&](int v) { return (v >= 0 && v < n_) || v == ignore_; };
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    const int g = gt.labels[i];
    const int p = pred.labels[i];
    if (!valid(g) || !valid(p)) {
      throw std::invalid_argument("label " + std::to_string(valid(g) ? p : g) + " is neither a class nor the ignore index");
    }
    if (g != ignore_ && p == ignore_) throw std::invalid_argument("prediction uses the ignore index on an evaluated pixel");
  }
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    const int g = gt.labels[i];
    if (g == ignore_) continue;
    ++counts_[static_cast<std::size_t>(g) * n_ + pred.labels[i]];
  }
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.n_ != n_ || other.ignore_ != ignore_) throw std::invalid_argument("confusion matrices are incompatible");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

IouResult miou(const ConfusionMatrix& conf) {
  const int n = conf.classes();
  IouResult r;
  r.per_class.resize(static_cast<std::size_t>(n));
  double sum = 0.0;
  int defined = 0;
  for (int c = 0; c < n; ++c) {
    std::uint64_t row = 0, col = 0;
    for (int k = 0; k < n; ++k) {
      row += conf.count(c, k);
      col += conf.count(k, c);
    }
    const std::uint64_t tp = conf.count(c, c);
    const std::uint64_t denom = row + col - tp;
    if (denom == 0) continue;
    const double iou = static_cast<double>(tp) / static_cast<double>(denom);
    r.per_class[static_cast<std::size_t>(c)] = iou;
    sum += iou;
    ++defined;
  }
  if (defined == 0) throw EmptyEvaluationError("no class has a defined IoU");
  r.miou = sum / defined;
  return r;
}

std::vector<EvalPair> pair_label_directories(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir) {
  std::set<std::filesystem::path> names;
  for (const auto& e : std::filesystem::directory_iterator(gt_dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") names.insert(e.path().filename());
  }
  if (names.empty()) throw std::invalid_argument("no PNG label files in " + gt_dir.string());
  std::vector<EvalPair> pairs;
  for (const auto& name : names) {
    const auto pred = pred_dir / name;
    if (!std::filesystem::exists(pred)) throw std::invalid_argument("missing prediction for " + name.string());
    pairs.push_back({pred, gt_dir / name});
  }
  return pairs;
}

ConfusionMatrix evaluate_pairs(const std::vector<EvalPair>& pairs, int classes, int ignore_index, int jobs) {
  std::vector<ConfusionMatrix> partial(pairs.size(), ConfusionMatrix(classes, ignore_index));
  parallel_for(pairs.size(), jobs, [&](std::size_t i) {
    try {
      partial[i].accumulate(load_label_map(pairs[i].prediction), load_label_map(pairs[i].ground_truth));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(pairs[i].ground_truth.filename().string() + ": " + e.what());
    }
  });
  ConfusionMatrix total(classes, ignore_index);
  for (const auto& p : partial) total += p;
  return total;
}

namespace {

std::string class_name(const std::vector<std::string>& names, std::size_t c) {
  return c < names.size() ? names[c] : "class " + std::to_string(c);
}

}  // namespace

void write_iou_report(const IouResult& result, const std::vector<std::string>& names, std::ostream& out) {
  std::size_t width = 5;
  for (std::size_t c = 0; c < result.per_class.size(); ++c) width = std::max(width, class_name(names, c).size());
  char buf[64];
  for (std::size_t c = 0; c < result.per_class.size(); ++c) {
    const std::string name = class_name(names, c);
    out << name << std::string(width - name.size() + 2, ' ');
    if (result.per_class[c]) {
      std::snprintf(buf, sizeof buf, "%6.2f", *result.per_class[c] * 100.0);
      out << buf << '\n';
    } else {
      out << "   n/a\n";
    }
  }
  std::snprintf(buf, sizeof buf, "%6.2f", result.miou * 100.0);
  out << "mIoU" << std::string(width - 4 + 2, ' ') << buf << '\n';
}

std::string iou_summary_json(const IouResult& result, const std::vector<std::string>& names) {
  nlohmann::ordered_json j;
  j["miou"] = result.miou;
  auto& per = j["per_class"] = nlohmann::ordered_json::object();
  int defined = 0;
  for (std::size_t c = 0; c < result.per_class.size(); ++c) {
    if (result.per_class[c]) {
      per[class_name(names, c)] = *result.per_class[c];
      ++defined;
    } else {
      per[class_name(names, c)] = nullptr;
    }
  }
  j["evaluated_classes"] = defined;
  return j.dump();
}

}  // namespace vpl
