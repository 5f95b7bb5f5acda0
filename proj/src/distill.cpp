#include "vpl/distill.hpp"

#include <cmath>
#include <stdexcept>

#include "vpl/errors.hpp"

namespace vpl {

namespace {

constexpr double kMinColumnNorm = 1e-12;

struct Normalized {
  Eigen::MatrixXd u;
  Eigen::VectorXd norms;
};

Normalized normalize_columns(const Eigen::MatrixXd& m) {
  Normalized out{m, m.colwise().norm().transpose()};
  for (Eigen::Index k = 0; k < m.cols(); ++k) {
    if (!(out.norms(k) > kMinColumnNorm)) {
      throw DegenerateFeatureError("feature column " + std::to_string(k) + " has zero norm");
    }
    out.u.col(k) /= out.norms(k);
  }
  return out;
}

void check_pair(const FeatureMap& fs, const FeatureMap& fr) {
  if (fs.height() != fr.height() || fs.width() != fr.width()) {
    throw std::invalid_argument("feature maps differ in spatial size");
  }
}

// dL/dF for one branch, given dL/dC (symmetric).
FeatureMap backprop(const FeatureMap& f, const Eigen::MatrixXd& p, const Normalized& n, const Eigen::MatrixXd& dc) {
  const Eigen::MatrixXd du = 2.0 * n.u * dc;
  Eigen::MatrixXd dm(du.rows(), du.cols());
  for (Eigen::Index k = 0; k < du.cols(); ++k) {
    const auto u = n.u.col(k);
    dm.col(k) = (du.col(k) - u * u.dot(du.col(k))) / n.norms(k);
  }
  const Eigen::MatrixXd df = p.transpose() * dm;
  FeatureMap out(f.channels(), f.height(), f.width());
  for (int c = 0; c < f.channels(); ++c) {
    for (int y = 0; y < f.height(); ++y) {
      for (int x = 0; x < f.width(); ++x) out.at(c, y, x) = df(c, y * f.width() + x);
    }
  }
  return out;
}

}  // namespace

FeatureMap::FeatureMap(int channels, int height, int width)
    : FeatureMap(channels, height, width,
                 std::vector<double>(static_cast<std::size_t>(std::max(channels, 0)) * std::max(height, 0) *
                                     std::max(width, 0))) {}

FeatureMap::FeatureMap(int channels, int height, int width, std::vector<double> values)
    : c_(channels), h_(height), w_(width), v_(std::move(values)) {
  if (c_ < 1 || h_ < 1 || w_ < 1) throw std::invalid_argument("feature map dimensions must be positive");
  if (v_.size() != static_cast<std::size_t>(c_) * h_ * w_) throw std::invalid_argument("feature map size mismatch");
  for (double v : v_) {
    if (!std::isfinite(v)) throw std::invalid_argument("feature map has a non-finite value");
  }
}

Eigen::MatrixXd project_and_flatten(const FeatureMap& f, const Eigen::MatrixXd& p) {
  if (p.cols() != f.channels() || p.rows() < 1) {
    throw std::invalid_argument("projection has " + std::to_string(p.cols()) + " columns for " +
                                std::to_string(f.channels()) + " channels");
  }
  Eigen::MatrixXd flat(f.channels(), f.pixels());
  for (int c = 0; c < f.channels(); ++c) {
    for (int y = 0; y < f.height(); ++y) {
      for (int x = 0; x < f.width(); ++x) flat(c, y * f.width() + x) = f.at(c, y, x);
    }
  }
  return p * flat;
}

Eigen::MatrixXd self_correlation(const Eigen::MatrixXd& m) {
  const Normalized n = normalize_columns(m);
  return n.u.transpose() * n.u;
}

double cd_loss(const FeatureMap& fs, const FeatureMap& fr, const Eigen::MatrixXd& ps, const Eigen::MatrixXd& pr,
               double eps) {
  check_pair(fs, fr);
  const Eigen::MatrixXd cs = self_correlation(project_and_flatten(fs, ps));
  const Eigen::MatrixXd cr = self_correlation(project_and_flatten(fr, pr));
  return std::sqrt((cs - cr).squaredNorm() + eps * eps);
}

CdGradient cd_loss_grad(const FeatureMap& fs, const FeatureMap& fr, const Eigen::MatrixXd& ps,
                        const Eigen::MatrixXd& pr, double eps) {
  check_pair(fs, fr);
  const Normalized ns = normalize_columns(project_and_flatten(fs, ps));
  const Normalized nr = normalize_columns(project_and_flatten(fr, pr));
  const Eigen::MatrixXd diff = ns.u.transpose() * ns.u - nr.u.transpose() * nr.u;
  const double loss = std::sqrt(diff.squaredNorm() + eps * eps);
  const Eigen::MatrixXd g = diff / loss;
  return {loss, backprop(fs, ps, ns, g), backprop(fr, pr, nr, -g)};
}

double charbonnier(std::span<const double> a, std::span<const double> b, double eps) {
  if (a.size() != b.size()) throw std::invalid_argument("charbonnier inputs differ in size");
  if (a.empty()) throw std::invalid_argument("charbonnier inputs are empty");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += std::sqrt(d * d + eps * eps);
  }
  return sum / static_cast<double>(a.size());
}

}  // namespace vpl
