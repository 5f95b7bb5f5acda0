#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "vpl/distill.hpp"
#include "vpl/errors.hpp"

using namespace vpl;
using Eigen::MatrixXd;

namespace {

FeatureMap random_map(int c, int h, int w, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  FeatureMap f(c, h, w);
  for (double& v : f.values()) v = n(rng);
  return f;
}

MatrixXd random_matrix(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = n(rng);
  }
  return m;
}

// Straight transcription of the loss with explicit loops.
double cd_loss_oracle(const FeatureMap& fs, const FeatureMap& fr, const MatrixXd& ps, const MatrixXd& pr, double eps) {
  const int n = fs.pixels();
  auto columns = [&](const FeatureMap& f, const MatrixXd& p) {
    std::vector<std::vector<double>> cols(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(p.rows())));
    for (int y = 0; y < f.height(); ++y) {
      for (int x = 0; x < f.width(); ++x) {
        auto& col = cols[static_cast<std::size_t>(y * f.width() + x)];
        double norm = 0.0;
        for (int o = 0; o < p.rows(); ++o) {
          double v = 0.0;
          for (int c = 0; c < f.channels(); ++c) v += p(o, c) * f.at(c, y, x);
          col[static_cast<std::size_t>(o)] = v;
          norm += v * v;
        }
        for (double& v : col) v /= std::sqrt(norm);
      }
    }
    return cols;
  };
  const auto us = columns(fs, ps);
  const auto ur = columns(fr, pr);
  double sq = 0.0;
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      double cs = 0.0, cr = 0.0;
      for (std::size_t k = 0; k < us[0].size(); ++k) cs += us[static_cast<std::size_t>(a)][k] * us[static_cast<std::size_t>(b)][k];
      for (std::size_t k = 0; k < ur[0].size(); ++k) cr += ur[static_cast<std::size_t>(a)][k] * ur[static_cast<std::size_t>(b)][k];
      sq += (cs - cr) * (cs - cr);
    }
  }
  return std::sqrt(sq + eps * eps);
}

double max_rel_error(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  double scale = 0.0;
  for (double v : numeric) scale = std::max(scale, std::abs(v));
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / std::max(scale, 1e-12));
  }
  return worst;
}

}  // namespace

TEST(ProjectAndFlatten, IdentityAndScalar) {
  std::mt19937_64 rng(1);
  const FeatureMap f = random_map(3, 2, 2, rng);
  const MatrixXd m = project_and_flatten(f, MatrixXd::Identity(3, 3));
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 2; ++y) {
      for (int x = 0; x < 2; ++x) EXPECT_EQ(m(c, y * 2 + x), f.at(c, y, x));
    }
  }
  const FeatureMap one(1, 1, 1, {1.5});
  EXPECT_EQ(project_and_flatten(one, MatrixXd::Constant(1, 1, 2.0))(0, 0), 3.0);
  EXPECT_THROW(project_and_flatten(f, MatrixXd::Identity(2, 2)), std::invalid_argument);
}

TEST(ProjectAndFlatten, MatchesPerPixelProduct) {
  std::mt19937_64 rng(2);
  const FeatureMap f = random_map(3, 2, 2, rng);
  const MatrixXd p = random_matrix(4, 3, rng);
  const MatrixXd m = project_and_flatten(f, p);
  for (int y = 0; y < 2; ++y) {
    for (int x = 0; x < 2; ++x) {
      for (int o = 0; o < 4; ++o) {
        double v = 0.0;
        for (int c = 0; c < 3; ++c) v += p(o, c) * f.at(c, y, x);
        EXPECT_NEAR(m(o, y * 2 + x), v, 1e-13);
      }
    }
  }
}

TEST(SelfCorrelation, Invariants) {
  std::mt19937_64 rng(3);
  const MatrixXd m = random_matrix(4, 6, rng);
  const MatrixXd c = self_correlation(m);
  for (int a = 0; a < 6; ++a) {
    EXPECT_NEAR(c(a, a), 1.0, 1e-12);
    for (int b = 0; b < 6; ++b) {
      EXPECT_NEAR(c(a, b), c(b, a), 1e-12);
      EXPECT_LE(std::abs(c(a, b)), 1.0 + 1e-12);
      const double cosine = m.col(a).dot(m.col(b)) / (m.col(a).norm() * m.col(b).norm());
      EXPECT_NEAR(c(a, b), cosine, 1e-12);
    }
  }
}

TEST(SelfCorrelation, SpecialCases) {
  const MatrixXd same = MatrixXd::Constant(3, 4, 0.7);
  EXPECT_TRUE(self_correlation(same).isApprox(MatrixXd::Ones(4, 4), 1e-14));
  EXPECT_TRUE(self_correlation(MatrixXd::Identity(5, 5) * 3.0).isApprox(MatrixXd::Identity(5, 5), 1e-14));
  MatrixXd zero_col = MatrixXd::Identity(3, 3);
  zero_col(1, 1) = 0.0;
  EXPECT_THROW(self_correlation(zero_col), DegenerateFeatureError);
}

TEST(CdLoss, EqualMapsGiveEpsilon) {
  std::mt19937_64 rng(4);
  const FeatureMap f = random_map(3, 4, 5, rng);
  const MatrixXd id = MatrixXd::Identity(3, 3);
  EXPECT_EQ(cd_loss(f, f, id, id, 1e-3), 1e-3);
  EXPECT_EQ(cd_loss(f, f, id, id), kCdEpsilon);
}

TEST(CdLoss, SymmetricAndBoundedBelow) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 20; ++t) {
    const FeatureMap a = random_map(3, 3, 3, rng);
    const FeatureMap b = random_map(2, 3, 3, rng);
    const MatrixXd pa = random_matrix(4, 3, rng);
    const MatrixXd pb = random_matrix(4, 2, rng);
    const double ab = cd_loss(a, b, pa, pb);
    EXPECT_EQ(ab, cd_loss(b, a, pb, pa));
    EXPECT_GE(ab, kCdEpsilon);
  }
}

TEST(CdLoss, MatchesLoopOracle) {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 10; ++t) {
    const FeatureMap a = random_map(2, 2, 2, rng);
    const FeatureMap b = random_map(2, 2, 2, rng);
    const MatrixXd pa = random_matrix(3, 2, rng);
    const MatrixXd pb = random_matrix(3, 2, rng);
    EXPECT_NEAR(cd_loss(a, b, pa, pb), cd_loss_oracle(a, b, pa, pb, 1e-3), 1e-12);
  }
}

TEST(CdLoss, ShapeErrors) {
  std::mt19937_64 rng(7);
  const FeatureMap a = random_map(2, 2, 3, rng);
  const FeatureMap b = random_map(2, 3, 2, rng);
  const MatrixXd id = MatrixXd::Identity(2, 2);
  EXPECT_THROW(cd_loss(a, b, id, id), std::invalid_argument);
  EXPECT_THROW(FeatureMap(0, 1, 1), std::invalid_argument);
  EXPECT_THROW(FeatureMap(1, 1, 2, {1.0, std::nan("")}), std::invalid_argument);
}

TEST(CdLoss, MinimizedAtEqualMaps) {
  std::mt19937_64 rng(8);
  const FeatureMap fs = random_map(3, 3, 3, rng);
  const MatrixXd id = MatrixXd::Identity(3, 3);
  const double self = cd_loss(fs, fs, id, id);
  for (int t = 0; t < 30; ++t) EXPECT_LT(self, cd_loss(fs, random_map(3, 3, 3, rng), id, id));
}

TEST(CdLossGrad, ZeroAtEqualMaps) {
  std::mt19937_64 rng(9);
  const FeatureMap f = random_map(3, 3, 4, rng);
  const MatrixXd p = random_matrix(3, 3, rng);
  const CdGradient g = cd_loss_grad(f, f, p, p);
  EXPECT_EQ(g.loss, 1e-3);
  for (double v : g.d_source.values()) EXPECT_NEAR(v, 0.0, 1e-10);
  for (double v : g.d_reference.values()) EXPECT_NEAR(v, 0.0, 1e-10);
}

TEST(CdLossGrad, MatchesCentralDifferences) {
  std::mt19937_64 rng(10);
  std::uniform_int_distribution<int> dim(1, 6);
  std::uniform_int_distribution<int> chans(1, 4);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int c = chans(rng), h = dim(rng), w = dim(rng);
    const FeatureMap fs = random_map(c, h, w, rng);
    const FeatureMap fr = random_map(c, h, w, rng);
    const MatrixXd ps = random_matrix(c, c, rng);
    const MatrixXd pr = random_matrix(c, c, rng);
    const CdGradient g = cd_loss_grad(fs, fr, ps, pr);
    EXPECT_NEAR(g.loss, cd_loss(fs, fr, ps, pr), 1e-14);
    const double h_step = 1e-5;
    for (int which = 0; which < 2; ++which) {
      const FeatureMap& base = which == 0 ? fs : fr;
      std::vector<double> numeric(base.values().size());
      for (std::size_t i = 0; i < numeric.size(); ++i) {
        FeatureMap plus = base, minus = base;
        plus.values()[i] += h_step;
        minus.values()[i] -= h_step;
        const double lp = which == 0 ? cd_loss(plus, fr, ps, pr) : cd_loss(fs, plus, ps, pr);
        const double lm = which == 0 ? cd_loss(minus, fr, ps, pr) : cd_loss(fs, minus, ps, pr);
        numeric[i] = (lp - lm) / (2 * h_step);
      }
      const auto& analytic = which == 0 ? g.d_source.values() : g.d_reference.values();
      worst = std::max(worst, max_rel_error(analytic, numeric));
    }
  }
  EXPECT_LE(worst, 1e-4);
}

TEST(CdLossGrad, ScaleInvariance) {
  std::mt19937_64 rng(11);
  const FeatureMap fs = random_map(3, 3, 3, rng);
  const FeatureMap fr = random_map(3, 3, 3, rng);
  const MatrixXd id = MatrixXd::Identity(3, 3);
  FeatureMap scaled = fs;
  for (double& v : scaled.values()) v *= 2.5;
  EXPECT_NEAR(cd_loss(scaled, fr, id, id), cd_loss(fs, fr, id, id), 1e-12);
  // Per pixel, the gradient is orthogonal to that pixel's feature vector.
  const CdGradient g = cd_loss_grad(fs, fr, id, id);
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 3; ++x) {
      double dot = 0.0;
      for (int c = 0; c < 3; ++c) dot += g.d_source.at(c, y, x) * fs.at(c, y, x);
      EXPECT_NEAR(dot, 0.0, 1e-8);
    }
  }
}

TEST(Charbonnier, Values) {
  const std::vector<double> a = {0.2, 0.4, 0.9};
  EXPECT_DOUBLE_EQ(charbonnier(a, a, 1e-3), 1e-3);
  const std::vector<double> four = {4.0}, one = {1.0};
  EXPECT_EQ(charbonnier(four, one, 0.0), 3.0);
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> x(257), y(257);
  for (auto& v : x) v = n(rng);
  for (auto& v : y) v = n(rng);
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += std::sqrt((x[i] - y[i]) * (x[i] - y[i]) + 1e-6);
  EXPECT_NEAR(charbonnier(x, y, 1e-3), sum / x.size(), 1e-14);
  EXPECT_THROW(charbonnier(a, four, 1e-3), std::invalid_argument);
}

TEST(ObjectiveWeights, RecordedConstants) {
  EXPECT_EQ(ObjectiveWeights::w1, 0.05);
  EXPECT_EQ(ObjectiveWeights::w2, 1.00);
  EXPECT_EQ(ObjectiveWeights::w3, 0.01);
  EXPECT_EQ(ObjectiveWeights::w4, 0.05);
  EXPECT_EQ(ObjectiveWeights::w5, 1.00);
}
