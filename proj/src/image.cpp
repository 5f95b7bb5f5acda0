#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "vpl/errors.hpp"
#include "vpl/render.hpp"

namespace vpl {

namespace {

const std::array<double, 256>& decode_lut8() {
  static const std::array<double, 256> lut = [] {
    std::array<double, 256> t{};
    for (int i = 0; i < 256; ++i) t[static_cast<std::size_t>(i)] = srgb_to_linear(i / 255.0);
    return t;
  }();
  return lut;
}

}  // namespace

RgbImage::RgbImage(int width, int height, double fill) : width_(width), height_(height) {
  if (width < 1 || height < 1) throw std::invalid_argument("image dimensions must be positive");
  data_.assign(plane_size() * 3, fill);
}

double srgb_to_linear(double v) {
  return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

double linear_to_srgb(double v) {
  return v <= 0.0031308 ? 12.92 * v : 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

RgbImage load_image(const std::filesystem::path& path) {
  const cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw std::runtime_error("cannot read image " + path.string());
  const int depth = raw.depth();
  if (depth != CV_8U && depth != CV_16U) throw FormatError(path.string() + ": only 8- and 16-bit images are supported");
  const int ch = raw.channels();
  if (ch != 1 && ch != 3 && ch != 4) throw FormatError(path.string() + ": unsupported channel count");

  RgbImage img(raw.cols, raw.rows);
  img.source = path;
  const auto& lut = decode_lut8();
  for (int y = 0; y < raw.rows; ++y) {
    for (int x = 0; x < raw.cols; ++x) {
      for (int c = 0; c < 3; ++c) {
        // OpenCV stores colour as BGR(A).
        const int src = ch == 1 ? 0 : 2 - c;
        if (depth == CV_8U) {
          img.at(c, y, x) = lut[raw.ptr<std::uint8_t>(y)[x * ch + src]];
        } else {
          img.at(c, y, x) = srgb_to_linear(raw.ptr<std::uint16_t>(y)[x * ch + src] / 65535.0);
        }
      }
    }
  }
  return img;
}

std::vector<std::uint8_t> encode_srgb8(const RgbImage& image) {
  std::vector<std::uint8_t> out(image.plane_size() * 3);
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(image.at(c, y, x), 0.0, 1.0);
        const long q = std::lround(linear_to_srgb(v) * 255.0);
        out[(static_cast<std::size_t>(y) * image.width() + x) * 3 + c] = static_cast<std::uint8_t>(std::clamp(q, 0L, 255L));
      }
    }
  }
  return out;
}

void save_image(const RgbImage& image, const std::filesystem::path& path) {
  const auto bytes = encode_srgb8(image);
  cv::Mat bgr(image.height(), image.width(), CV_8UC3);
  for (int y = 0; y < image.height(); ++y) {
    auto* row = bgr.ptr<std::uint8_t>(y);
    for (int x = 0; x < image.width(); ++x) {
      const std::size_t k = (static_cast<std::size_t>(y) * image.width() + x) * 3;
      row[x * 3 + 0] = bytes[k + 2];
      row[x * 3 + 1] = bytes[k + 1];
      row[x * 3 + 2] = bytes[k + 0];
    }
  }
  if (!cv::imwrite(path.string(), bgr)) throw std::runtime_error("cannot write image " + path.string());
}

}  // namespace vpl
