#include <gtest/gtest.h>

#include "stlenc/objective.hpp"
#include "stlenc/rng.hpp"

namespace stlenc {
namespace {

Eigen::MatrixXd random_unit_rows(Eigen::Index b, Eigen::Index d, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd e(b, d);
  for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = normal(rng, 0.0, 1.0);
  e.rowwise().normalize();
  return e;
}

Eigen::MatrixXd rbf_gram(const Eigen::MatrixXd& e) {
  return (-(2.0 - 2.0 * (e * e.transpose()).array()) / 0.4).exp().matrix();
}

TEST(Loss, HandComputedPair) {
  // S = E E^T = [[1, 0.9], [0.9, 1]]
  Eigen::MatrixXd E(2, 2);
  E << 1.0, 0.0, 0.9, std::sqrt(1.0 - 0.81);
  Eigen::MatrixXd K(2, 2);
  K << 1.0, 0.5, 0.5, 1.0;
  const LossResult r = alignment_loss(E, K, {2.0, 5.0, true});
  EXPECT_NEAR(r.value, 0.16, 1e-12);
  EXPECT_NEAR(r.weights(0, 1), 2.0, 1e-12);
  EXPECT_NEAR(r.weights(1, 0), 2.0, 1e-12);
  EXPECT_EQ(r.weights(0, 0), 0.0);
}

TEST(Loss, ZeroResidual) {
  Eigen::MatrixXd E = random_unit_rows(5, 4, 1);
  const LossResult r = alignment_loss(E, E * E.transpose());
  EXPECT_EQ(r.value, 0.0);
  EXPECT_EQ(r.grad.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Loss, GammaZeroIsMse) {
  Eigen::MatrixXd E = random_unit_rows(6, 5, 2);
  Eigen::MatrixXd K = rbf_gram(random_unit_rows(6, 5, 3));
  const LossResult r = alignment_loss(E, K, {0.0, 5.0, true});
  EXPECT_NEAR(r.value, (K - E * E.transpose()).squaredNorm() / 36.0, 1e-15);
  EXPECT_TRUE((r.weights.array() == 1.0).all());
}

TEST(Loss, WeightsClampedAndMeanOne) {
  Eigen::MatrixXd E = random_unit_rows(12, 6, 4);
  Eigen::MatrixXd K = rbf_gram(random_unit_rows(12, 6, 5));
  const LossResult r = alignment_loss(E, K, {2.0, 1e9, true});
  EXPECT_NEAR(r.weights.mean(), 1.0, 1e-12);
  const LossResult c = alignment_loss(E, K, {2.0, 1.5, true});
  EXPECT_LE(c.weights.maxCoeff(), 1.5);
}

TEST(Loss, ExcludingDiagonal) {
  Eigen::MatrixXd E = random_unit_rows(4, 3, 6);
  Eigen::MatrixXd K = rbf_gram(random_unit_rows(4, 3, 7));
  const LossResult r = alignment_loss(E, K, {2.0, 5.0, false});
  EXPECT_EQ(r.weights.diagonal().cwiseAbs().sum(), 0.0);
  // diagonal residuals are zero anyway, so only the weight mean changes
  const LossResult d = alignment_loss(E, K, {2.0, 5.0, true});
  EXPECT_GT(r.value, 0.0);
  EXPECT_GT(d.value, 0.0);
}

TEST(Loss, PermutationSymmetric) {
  Eigen::MatrixXd E = random_unit_rows(7, 4, 8);
  Eigen::MatrixXd K = rbf_gram(random_unit_rows(7, 4, 9));
  Eigen::PermutationMatrix<Eigen::Dynamic> p(7);
  p.indices() << 3, 0, 6, 1, 5, 2, 4;
  const double a = alignment_loss(E, K).value;
  const double b = alignment_loss(p * E, p * K * p.transpose()).value;
  EXPECT_NEAR(a, b, 1e-15);
}

TEST(Loss, GradientMatchesFiniteDifferences) {
  Eigen::MatrixXd E = random_unit_rows(4, 8, 10);
  Eigen::MatrixXd K = rbf_gram(random_unit_rows(4, 8, 11));
  const LossResult r = alignment_loss(E, K);
  // weights are stop-gradient constants: hold them fixed while differencing
  auto frozen = [&](const Eigen::MatrixXd& e) {
    const Eigen::MatrixXd res = K - e * e.transpose();
    return r.weights.cwiseProduct(res).cwiseProduct(res).sum() / 16.0;
  };
  const double h = 1e-6;
  double worst = 0.0;
  for (Eigen::Index k = 0; k < E.size(); ++k) {
    Eigen::MatrixXd up = E, down = E;
    up(k) += h;
    down(k) -= h;
    const double numeric = (frozen(up) - frozen(down)) / (2 * h);
    worst = std::max(worst, std::fabs(numeric - r.grad(k)) / std::max({std::fabs(numeric), std::fabs(r.grad(k)), 1e-8}));
  }
  EXPECT_LT(worst, 1e-3);
}

TEST(Loss, Errors) {
  Eigen::MatrixXd E = random_unit_rows(3, 2, 12);
  EXPECT_THROW(alignment_loss(E, Eigen::MatrixXd::Identity(2, 2)), Error);
  Eigen::MatrixXd K = Eigen::MatrixXd::Identity(3, 3);
  K(0, 1) = std::nan("");
  EXPECT_THROW(alignment_loss(E, K), Error);
  LossConfig bad;
  bad.clamp = 0.5;
  EXPECT_THROW(alignment_loss(E, Eigen::MatrixXd::Identity(3, 3), bad), Error);
}

TEST(Alignment, Properties) {
  Eigen::MatrixXd K = rbf_gram(random_unit_rows(6, 3, 13));
  EXPECT_NEAR(kernel_alignment(K, K), 1.0, 1e-15);
  EXPECT_NEAR(kernel_alignment(K, 3.5 * K), 1.0, 1e-15);
  EXPECT_NEAR(kernel_alignment(0.25 * K, K), 1.0, 1e-15);
  Eigen::MatrixXd A(2, 2), B(2, 2);
  A << 1, 0, 0, 0;
  B << 0, 1, 1, 0;
  EXPECT_EQ(kernel_alignment(A, B), 0.0);
  EXPECT_THROW(kernel_alignment(A, Eigen::MatrixXd::Zero(2, 2)), Error);
  EXPECT_THROW(kernel_alignment(A, Eigen::MatrixXd::Zero(3, 3)), Error);
}

TEST(Uniformity, Collapse) {
  Eigen::MatrixXd E = random_unit_rows(1, 16, 14).replicate(10, 1);
  EXPECT_EQ(uniformity(E), 0.0);
}

TEST(Uniformity, Antipodal) {
  Eigen::MatrixXd E(2, 3);
  E << 0, 1, 0, 0, -1, 0;
  EXPECT_DOUBLE_EQ(uniformity(E), -8.0);
}

TEST(Uniformity, HighDimensionalApproachesLimit) {
  const double u = uniformity(random_unit_rows(400, 256, 15));
  EXPECT_GT(u, -4.0);
  EXPECT_LT(u, -3.8);
}

TEST(Uniformity, RangeAndErrors) {
  for (int s = 0; s < 20; ++s) {
    const double u = uniformity(random_unit_rows(2 + s, 3, 100 + static_cast<std::uint64_t>(s)));
    EXPECT_GE(u, -8.0);
    EXPECT_LE(u, 0.0);
  }
  EXPECT_THROW(uniformity(random_unit_rows(1, 3, 16)), Error);
}

TEST(MetricRowFormat, Csv) {
  MetricRow r{12, "val", {0.5, 0.25, -3.0}};
  EXPECT_EQ(format_metric_row(r), "12,val,0.5,0.25,-3");
}

}  // namespace
}  // namespace stlenc
