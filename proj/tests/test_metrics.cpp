#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "sgap/metrics.hpp"

namespace sgap {
namespace {

// Predicts the argmax of the first K input features.
Model passthrough(std::size_t k) {
  Dense d(k, k);
  for (std::size_t i = 0; i < k; ++i) d.weight.at(i, i) = 1.0f;
  return Model({d, SoftmaxCrossEntropy{k}});
}

TEST(ConfusionMatrix, PerfectClassifier) {
  auto model = passthrough(5);
  Tensor x({10, 5});
  for (std::size_t i = 0; i < 10; ++i) x.at(i, 3) = 1.0f;
  const std::vector<int> y(10, 3);
  const auto cm = confusion_matrix(model, x, y);
  EXPECT_EQ(cm.at(3, 3), 10u);
  EXPECT_EQ(cm.total(), 10u);
  EXPECT_EQ(cm.trace(), 10u);
}

TEST(ConfusionMatrix, ConstantPredictorFillsColumnZero) {
  auto model = passthrough(4);
  const Tensor x({4, 4});  // all zeros -> ties -> class 0
  const std::vector<int> y = {0, 1, 2, 3};
  const auto cm = confusion_matrix(model, x, y);
  for (std::size_t r = 0; r < 4; ++r) {
    EXPECT_EQ(cm.at(r, 0), 1u);
    for (std::size_t c = 1; c < 4; ++c) EXPECT_EQ(cm.at(r, c), 0u);
  }
  std::ostringstream os;
  cm.write_csv(os);
  EXPECT_EQ(os.str(), "1,0,0,0\n1,0,0,0\n1,0,0,0\n1,0,0,0\n");
}

TEST(ConfusionMatrix, TraceMatchesAccuracy) {
  Rng rng(8);
  auto model = passthrough(6);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor x({50, 6});
    for (float& v : x.data()) v = rng.uniform();
    std::vector<int> y(50);
    for (auto& t : y) t = static_cast<int>(rng.below(6));
    const auto cm = confusion_matrix(model, x, y);
    EXPECT_EQ(cm.accuracy(), eval_accuracy(model, x, y));
    EXPECT_EQ(cm.total(), 50u);
  }
}

TEST(ConfusionMatrix, LabelOutOfRange) {
  auto model = passthrough(3);
  EXPECT_THROW(confusion_matrix(model, Tensor({1, 3}), std::vector<int>{3}),
               DataError);
}

TEST(WeightHistogram, BoundaryRule) {
  const std::vector<float> w = {-1.0f, 0.0f, 1.0f};
  const auto h = weight_histogram(w, 2, -1.0, 1.0);
  EXPECT_EQ(h.counts, (std::vector<std::uint64_t>{1, 2}));
  EXPECT_EQ(h.total, 3u);
  EXPECT_EQ(h.below_range + h.above_range, 0u);
}

TEST(WeightHistogram, AllZeroModel) {
  const std::vector<float> w(500, 0.0f);
  const auto h = weight_histogram(w);
  std::size_t nonempty = 0;
  for (auto c : h.counts) nonempty += c != 0;
  EXPECT_EQ(nonempty, 1u);
  EXPECT_EQ(h.stddev, 0.0);
  EXPECT_EQ(h.fraction_zero, 1.0);
  EXPECT_EQ(h.fraction_unit_open, 0.0);
}

TEST(WeightHistogram, ClampsOutOfRangeAndConserves) {
  const std::vector<float> w = {-9.0f, -0.5f, 0.5f, 0.999f, 7.0f};
  const auto h = weight_histogram(w, 4, -1.0, 1.0);
  EXPECT_EQ(h.counts, (std::vector<std::uint64_t>{1, 1, 0, 3}));
  EXPECT_EQ(h.below_range, 1u);
  EXPECT_EQ(h.above_range, 1u);
  EXPECT_DOUBLE_EQ(h.fraction_unit_open, 3.0 / 5.0);
}

TEST(WeightHistogram, SampleStdOfNormalDraws) {
  Rng rng(99);
  const double sigma = 0.3;
  std::vector<float> w(100000);
  for (float& x : w) x = static_cast<float>(sigma * rng.normal());
  const auto h = weight_histogram(w);
  EXPECT_NEAR(h.stddev, sigma, 0.05 * sigma);
  std::uint64_t sum = 0;
  for (auto c : h.counts) sum += c;
  EXPECT_EQ(sum, w.size());
}

TEST(WeightHistogram, Preconditions) {
  const std::vector<float> w = {1.0f};
  EXPECT_THROW(weight_histogram(w, 0), ConfigError);
  EXPECT_THROW(weight_histogram(w, 10, 1.0, 1.0), ConfigError);
}

BoundTracker scalar_accumulator() {
  return BoundTracker({TrackedComponent{0, 0}});
}

void feed(BoundTracker& acc, const std::vector<float>& g,
          const std::vector<float>& phi) {
  for (std::size_t t = 0; t < g.size(); ++t) {
    const std::vector<Tensor> gs = {Tensor({1}, {g[t]})};
    const std::vector<Tensor> ps = {Tensor({1}, {phi[t]})};
    acc.update(gs, ps, t + 1);
  }
}

TEST(BoundChain, FullSamplingGivesEqualSums) {
  auto acc = scalar_accumulator();
  feed(acc, {1, 2, 3}, {1, 2, 3});
  const auto& c = acc.components()[0];
  EXPECT_EQ(c.sampled_sum, c.gradient_sum);
  EXPECT_TRUE(acc.check().left_ok());
}

TEST(BoundChain, NoSamplingGivesZeroLeftSum) {
  auto acc = scalar_accumulator();
  feed(acc, {1, 2, 3}, {0, 0, 0});
  EXPECT_EQ(acc.components()[0].sampled_sum, 0.0);
  EXPECT_TRUE(acc.check().ok());
}

// g = 1 for t = 1..4, phi alternating 1, 0, 1, 0:
// left = 1 + 1/sqrt(3), middle = 1 + 1/sqrt(2) + 1/sqrt(3) + 1/2, right = 4.
TEST(BoundChain, FourTermHandComputation) {
  auto acc = scalar_accumulator();
  feed(acc, {1, 1, 1, 1}, {1, 0, 1, 0});
  const auto& c = acc.components()[0];
  EXPECT_NEAR(c.sampled_sum, 1.0 + 1.0 / std::sqrt(3.0), 1e-12);
  EXPECT_NEAR(c.sampled_sum, 1.5774, 1e-4);
  EXPECT_NEAR(c.gradient_sum, 2.7844, 1e-4);
  EXPECT_DOUBLE_EQ(c.bound(), 4.0);
  EXPECT_TRUE(acc.check().ok());
}

TEST(BoundChain, RightBoundFailsForSmallGradients) {
  // With |g| = 0.1 the middle sum is 0.1 and the bound 2 * 0.1 * 0.1.
  auto acc = scalar_accumulator();
  feed(acc, {0.1f}, {0.1f});
  const auto check = acc.check();
  EXPECT_TRUE(check.left_ok());
  EXPECT_FALSE(check.right_ok());
}

TEST(BoundChain, StepsMustBeConsecutive) {
  auto acc = scalar_accumulator();
  const std::vector<Tensor> g = {Tensor({1}, 1.0f)};
  EXPECT_THROW(acc.update(g, g, 2), Error);
}

TEST(BoundChain, SelectsSeededSubset) {
  const std::vector<Shape> shapes = {{10, 20}, {5}};
  Rng a(3), b(3);
  const auto first = select_components(shapes, 64, a);
  const auto second = select_components(shapes, 64, b);
  ASSERT_EQ(first.size(), 64u + 5u);
  for (std::size_t i = 0; i < first.size(); ++i) {
    EXPECT_EQ(first[i].param, second[i].param);
    EXPECT_EQ(first[i].element, second[i].element);
  }
  std::set<std::size_t> unique;
  for (std::size_t i = 0; i < 64; ++i) unique.insert(first[i].element);
  EXPECT_EQ(unique.size(), 64u);
}

TEST(RelativeLoss, TableArithmetic) {
  EXPECT_EQ(format_relative_loss(relative_accuracy_loss(83.95, 62.84)), "25.15%");
  EXPECT_EQ(format_relative_loss(relative_accuracy_loss(85.64, 85.67)), "+0.04%");
  EXPECT_EQ(format_relative_loss(relative_accuracy_loss(0.8, 0.8)), "0.00%");
  EXPECT_NEAR(relative_accuracy_loss(0.8395, 0.6284), 25.1459, 1e-4);
  EXPECT_THROW(relative_accuracy_loss(0.0, 0.5), ConfigError);
}

}  // namespace
}  // namespace sgap
