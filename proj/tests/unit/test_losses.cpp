#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "fscil/error.hpp"
#include "fscil/losses.hpp"
#include "fscil/rfe.hpp"
#include "oracles/oracles.hpp"

using namespace fscil;

TEST(CrossEntropy, NegativeLogOfTrueProbability) {
  Vector p(3);
  p << 0.2, 0.5, 0.3;
  EXPECT_DOUBLE_EQ(ce_loss(p, 1), -std::log(0.5));
  EXPECT_DOUBLE_EQ(ce_loss(p, 0), -std::log(0.2));
  EXPECT_THROW(ce_loss(p, 3), ShapeError);
}

TEST(CrossEntropy, ClampsAtFloorAndCounts) {
  reset_ce_clamp_count();
  Vector p(2);
  p << 1.0, 0.0;
  EXPECT_DOUBLE_EQ(ce_loss(p, 1), -std::log(1e-12));
  EXPECT_TRUE(std::isfinite(ce_loss(p, 1)));
  EXPECT_EQ(ce_clamp_count(), 2u);
  ce_loss(p, 0);
  EXPECT_EQ(ce_clamp_count(), 2u);
  reset_ce_clamp_count();
  EXPECT_EQ(ce_clamp_count(), 0u);
}

TEST(CrossEntropy, GradientThroughSoftmaxMatchesFiniteDifferences) {
  SplitMix64 rng(1);
  for (int t = 0; t < 20; ++t) {
    const Vector z = oracle::gaussian_vector(6, rng, 2.0);
    const Eigen::Index y = static_cast<Eigen::Index>(rng.below(6));
    const Vector g = ce_grad_logits(softmax(z), y);
    const auto num = oracle::central_differences(std::vector<double>(z.data(), z.data() + 6),
                                                 [&](const std::vector<double>& x) {
                                                   return ce_loss(softmax(Eigen::Map<const Vector>(x.data(), 6)), y);
                                                 },
                                                 1e-6);
    for (Eigen::Index i = 0; i < 6; ++i) EXPECT_NEAR(num[static_cast<std::size_t>(i)], g(i), 1e-8);
    EXPECT_NEAR(g.sum(), 0.0, 1e-14);
  }
}

TEST(InfoNce, HandEvaluated) {
  Vector s(3);
  s << 0.9, 0.1, -0.2;
  const double tau = 0.1;
  const double expected = -std::log(std::exp(9.0) / (std::exp(9.0) + std::exp(1.0) + std::exp(-2.0)));
  EXPECT_NEAR(infonce(s, 0, tau).loss, expected, 1e-12);
}

TEST(InfoNce, GradientMatchesFiniteDifferences) {
  SplitMix64 rng(2);
  for (double tau : {0.05, 0.1, 1.0}) {
    const Vector s = oracle::gaussian_vector(5, rng, 0.5);
    const auto r = infonce(s, 2, tau);
    const auto num = oracle::central_differences(std::vector<double>(s.data(), s.data() + 5),
                                                 [&](const std::vector<double>& x) {
                                                   return infonce(Eigen::Map<const Vector>(x.data(), 5), 2, tau).loss;
                                                 },
                                                 1e-6);
    for (Eigen::Index i = 0; i < 5; ++i)
      EXPECT_LE(oracle::relative_error(num[static_cast<std::size_t>(i)], r.grad_similarities(i), 1e-6), 1e-5);
  }
}

TEST(InfoNce, NonNegativeAndStableForLargeSimilarities) {
  Vector s(3);
  s << 1.0, 1.0, 1.0;
  EXPECT_NEAR(infonce(s, 0, 0.001).loss, std::log(3.0), 1e-12);
  s << 1.0, -1.0, -1.0;
  const auto r = infonce(s, 0, 0.001);
  EXPECT_TRUE(std::isfinite(r.loss));
  EXPECT_GE(r.loss, 0.0);
}

TEST(InfoNce, ExplicitVectorsUseCosine) {
  SplitMix64 rng(3);
  const Vector f = oracle::gaussian_vector(8, rng);
  const Vector pos = oracle::gaussian_vector(8, rng);
  const std::vector<Vector> negs{oracle::gaussian_vector(8, rng), oracle::gaussian_vector(8, rng)};
  Vector s(3);
  s << cosine_logit(f, pos), cosine_logit(f, negs[0]), cosine_logit(f, negs[1]);
  EXPECT_NEAR(infonce_loss(f, pos, negs, 0.1), infonce(s, 0, 0.1).loss, 1e-12);
  // scaling the feature does not change cosine similarities
  EXPECT_NEAR(infonce_loss(3.0 * f, pos, negs, 0.1), infonce_loss(f, pos, negs, 0.1), 1e-12);
}

TEST(InfoNce, RejectsBadArguments) {
  Vector s(1);
  s << 0.5;
  EXPECT_THROW(infonce(s, 0, 0.1), ShapeError);
  Vector t(2);
  t << 0.5, 0.1;
  EXPECT_THROW(infonce(t, 0, 0.0), ConfigError);
  EXPECT_THROW(infonce(t, 5, 0.1), ShapeError);
}

TEST(TotalLoss, WeightsContrastiveTerm) {
  EXPECT_DOUBLE_EQ(total_loss(1.5, 2.0, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(total_loss(1.5, 2.0, 0.0), 1.5);
}
