#pragma once

// Correlation-based distillation loss between two feature maps and the Charbonnier image loss,
// with analytic gradients.

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace vpl {

/// C x H x W feature tensor, channel-major.
class FeatureMap {
 public:
  FeatureMap(int channels, int height, int width);
  FeatureMap(int channels, int height, int width, std::vector<double> values);

  int channels() const noexcept { return c_; }
  int height() const noexcept { return h_; }
  int width() const noexcept { return w_; }
  int pixels() const noexcept { return h_ * w_; }

  double& at(int c, int y, int x) { return v_[index(c, y, x)]; }
  double at(int c, int y, int x) const { return v_[index(c, y, x)]; }
  std::vector<double>& values() noexcept { return v_; }
  const std::vector<double>& values() const noexcept { return v_; }

 private:
  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * h_ + y) * w_ + x;
  }
  int c_, h_, w_;
  std::vector<double> v_;
};

/// P times each pixel's channel vector, one column per pixel in row-major spatial order.
Eigen::MatrixXd project_and_flatten(const FeatureMap& f, const Eigen::MatrixXd& p);

/// Cosine-similarity Gram matrix of the columns. DegenerateFeatureError for a column with
/// norm <= 1e-12.
Eigen::MatrixXd self_correlation(const Eigen::MatrixXd& m);

inline constexpr double kCdEpsilon = 1e-3;

/// sqrt(||C_s - C_r||_F^2 + eps^2).
double cd_loss(const FeatureMap& fs, const FeatureMap& fr, const Eigen::MatrixXd& ps, const Eigen::MatrixXd& pr,
               double eps = kCdEpsilon);

struct CdGradient {
  double loss = 0.0;
  FeatureMap d_source;
  FeatureMap d_reference;
};

CdGradient cd_loss_grad(const FeatureMap& fs, const FeatureMap& fr, const Eigen::MatrixXd& ps,
                        const Eigen::MatrixXd& pr, double eps = kCdEpsilon);

/// Mean of sqrt((a_i - b_i)^2 + eps^2).
double charbonnier(std::span<const double> a, std::span<const double> b, double eps = kCdEpsilon);

/// Loss weights of the adaptation objective (w1..w5). Recorded for reference; nothing here
/// trains a network.
struct ObjectiveWeights {
  static constexpr double w1 = 0.05;
  static constexpr double w2 = 1.00;
  static constexpr double w3 = 0.01;
  static constexpr double w4 = 0.05;
  static constexpr double w5 = 1.00;
};

}  // namespace vpl
