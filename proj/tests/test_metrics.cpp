#include <gtest/gtest.h>

#include <algorithm>
#include <boost/multiprecision/cpp_int.hpp>
#include <boost/rational.hpp>

#include "mapnet/errors.hpp"
#include "mapnet/metrics.hpp"
#include "support.hpp"

using namespace mapnet;
using mapnet::testing::random_tensor;
using Q = boost::rational<boost::multiprecision::cpp_int>;

namespace {

Tensor<float> grid(int h, int w, std::vector<float> v) { return Tensor<float>({1, 1, h, w}, std::move(v)); }

ConfusionCounts random_counts(Rng& rng, std::int64_t max) {
  // Mixed magnitudes: tiny counts hit denominators near zero, large ones
  // stress the floating-point path.
  auto draw = [&] { return static_cast<std::uint64_t>(rng.uniform_int(0, rng.bernoulli(0.5) ? 5 : max)); };
  return {draw(), draw(), draw(), draw()};
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1e-300, std::abs(b)); }

}  // namespace

TEST(Counts, WorkedExamples) {
  EXPECT_EQ(confusion_counts(grid(2, 2, {0.9f, 0.9f, 0.9f, 0.9f}), grid(2, 2, {1, 1, 1, 1}), 0.5),
            (ConfusionCounts{4, 0, 0, 0}));
  EXPECT_EQ(confusion_counts(grid(2, 2, {0.5f, 0.5f, 0.5f, 0.5f}), grid(2, 2, {1, 0, 1, 0}), 0.5),
            (ConfusionCounts{0, 0, 2, 2}));
  EXPECT_EQ(confusion_counts(grid(2, 2, {0.9f, 0.2f, 0.6f, 0.4f}), grid(2, 2, {1, 0, 0, 1}), 0.5),
            (ConfusionCounts{1, 1, 1, 1}));
}

TEST(Counts, Errors) {
  EXPECT_THROW(confusion_counts(grid(2, 2, {0, 0, 0, 0}), grid(1, 4, {0, 0, 0, 0}), 0.5), ShapeError);
  EXPECT_THROW(confusion_counts(grid(1, 1, {0}), grid(1, 1, {0}), 0.0), ConfigError);
  EXPECT_THROW(confusion_counts(grid(1, 1, {0}), grid(1, 1, {0}), 1.0), ConfigError);
}

TEST(Scores, WorkedExamples) {
  const auto s = scores({6, 2, 0, 2});
  EXPECT_DOUBLE_EQ(*s.precision, 0.75);
  EXPECT_DOUBLE_EQ(*s.recall, 0.75);
  EXPECT_DOUBLE_EQ(*s.f1, 0.75);
  EXPECT_NEAR(*s.iou, 0.6, 1e-15);
  EXPECT_NEAR(*s.iou, 6.0 / 10.0, 1e-15);

  const auto perfect = scores({5, 0, 11, 0});
  EXPECT_EQ(*perfect.precision, 1.0);
  EXPECT_EQ(*perfect.recall, 1.0);
  EXPECT_EQ(*perfect.f1, 1.0);
  EXPECT_EQ(*perfect.iou, 1.0);

  const auto none = scores({0, 0, 4, 3});
  EXPECT_FALSE(none.precision.has_value());
  EXPECT_EQ(*none.recall, 0.0);

  const auto zero = scores({0, 2, 4, 3});
  EXPECT_EQ(*zero.precision, 0.0);
  EXPECT_EQ(*zero.recall, 0.0);
  EXPECT_FALSE(zero.f1.has_value());
  EXPECT_FALSE(zero.iou.has_value());

  const auto empty = scores({0, 0, 9, 0});
  EXPECT_FALSE(empty.precision || empty.recall || empty.f1 || empty.iou);
}

TEST(Scores, RationalIdentities) {
  Rng rng(1);
  int checked = 0;
  while (checked < 1000) {
    const auto c = random_counts(rng, 1'000'000'000'000);
    if (c.tp + c.fp == 0 || c.tp + c.fn == 0 || c.tp == 0) continue;
    ++checked;
    const Q tp(static_cast<long long>(c.tp)), fp(static_cast<long long>(c.fp)), fn(static_cast<long long>(c.fn));
    const Q P = tp / (tp + fp), R = tp / (tp + fn);
    ASSERT_EQ(P * R / (P + R - P * R), tp / (tp + fp + fn));
    ASSERT_EQ(2 * P * R / (P + R), 2 * tp / (2 * tp + fp + fn));
    // The floating-point scores track the exact count forms.
    const auto s = scores(c);
    const double t = static_cast<double>(c.tp), f = static_cast<double>(c.fp), n = static_cast<double>(c.fn);
    ASSERT_LT(rel(*s.iou, t / (t + f + n)), 1e-12);
    ASSERT_LT(rel(*s.f1, 2 * t / (2 * t + f + n)), 1e-12);
    ASSERT_LT(rel(*s.precision, t / (t + f)), 1e-15);
  }
}

TEST(Scores, FalsePositiveToTrueNegativeNeverHurts) {
  Rng rng(2);
  for (int i = 0; i < 2000; ++i) {
    auto c = random_counts(rng, 1000);
    if (c.fp == 0) continue;
    const auto before = scores(c);
    --c.fp;
    ++c.tn;
    const auto after = scores(c);
    if (before.precision && after.precision) {
      EXPECT_GE(*after.precision, *before.precision);
    }
    if (before.iou && after.iou) {
      EXPECT_GE(*after.iou, *before.iou);
    }
    EXPECT_EQ(before.recall.has_value(), after.recall.has_value());
  }
}

TEST(Counts, RaisingThresholdNeverAddsPositives) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto prob = random_tensor<float>({2, 1, 7, 5}, rng, 0, 1);
    Tensor<float> truth(prob.shape());
    for (auto& v : truth.data()) v = rng.bernoulli(0.4) ? 1.0f : 0.0f;
    std::uint64_t prev = UINT64_MAX;
    for (double th : {0.01, 0.1, 0.3, 0.5, 0.5000001, 0.7, 0.99}) {
      const auto c = confusion_counts(prob, truth, th);
      EXPECT_EQ(c.total(), prob.size());
      EXPECT_LE(c.tp + c.fp, prev);
      prev = c.tp + c.fp;
    }
  }
}

TEST(Counts, AccumulationIsAdditive) {
  const ConfusionCounts a{3, 1, 12, 0}, b{1, 0, 14, 1};
  const auto sum = a + b;
  EXPECT_EQ(sum, (ConfusionCounts{4, 1, 26, 1}));
  EXPECT_NEAR(*scores(sum).iou, 4.0 / 6.0, 1e-15);

  Rng rng(4);
  const auto p1 = random_tensor<float>({1, 1, 6, 6}, rng, 0, 1), p2 = random_tensor<float>({1, 1, 6, 6}, rng, 0, 1);
  Tensor<float> t1(p1.shape()), t2(p2.shape());
  for (auto& v : t1.data()) v = rng.bernoulli(0.5);
  for (auto& v : t2.data()) v = rng.bernoulli(0.5);
  Tensor<float> both({2, 1, 6, 6});
  std::copy(p1.data().begin(), p1.data().end(), both.plane(0, 0));
  std::copy(p2.data().begin(), p2.data().end(), both.plane(1, 0));
  Tensor<float> both_t({2, 1, 6, 6});
  std::copy(t1.data().begin(), t1.data().end(), both_t.plane(0, 0));
  std::copy(t2.data().begin(), t2.data().end(), both_t.plane(1, 0));
  EXPECT_EQ(confusion_counts(both, both_t, 0.5), confusion_counts(p1, t1, 0.5) + confusion_counts(p2, t2, 0.5));
}

namespace {

ModelConfig eval_config() {
  ModelConfig c;
  c.base_channels = 4;
  c.n_blocks = 3;
  c.input_h = c.input_w = 32;
  return c;
}

}  // namespace

TEST(Evaluate, MicroAggregationOverTiles) {
  Model<float> m(eval_config(), 5);
  Rng rng(6);
  std::vector<Sample> tiles;
  for (int i = 0; i < 4; ++i) tiles.push_back(mapnet::testing::toy_sample("t" + std::to_string(i), 32, 32, rng));

  ConfusionCounts manual;
  for (const auto& t : tiles) manual += confusion_counts(m.predict(t.image), t.mask, 0.5);
  const auto e = evaluate_dataset(m, tiles, 0.5);
  EXPECT_EQ(e.counts, manual);
  EXPECT_EQ(e.counts.total(), 4u * 32 * 32);
  EXPECT_EQ(e.scores.iou, scores(manual).iou);

  auto shuffled = tiles;
  std::reverse(shuffled.begin(), shuffled.end());
  std::swap(shuffled[0], shuffled[2]);
  const auto e2 = evaluate_dataset(m, shuffled, 0.5);
  EXPECT_EQ(e2.counts, e.counts);
  EXPECT_EQ(e2.scores.f1, e.scores.f1);

  const auto single = evaluate_dataset(m, {tiles[1]}, 0.5);
  EXPECT_EQ(single.counts, confusion_counts(m.predict(tiles[1].image), tiles[1].mask, 0.5));
  EXPECT_THROW(evaluate_dataset(m, {}, 0.5), UsageError);
}

TEST(Evaluate, PerfectPredictorScoresOne) {
  // Zero head output plus a bias above zero predicts positive everywhere.
  Model<float> m(eval_config(), 5);
  m.params().fill_matching("head/out/weight", 0.0f);
  m.params().param("head/out/bias")[0] = 3.0f;
  Sample all;
  all.image = Tensor<float>({1, 3, 32, 32}, 0.5f);
  all.mask = Tensor<float>({1, 1, 32, 32}, 1.0f);
  const auto e = evaluate_dataset(m, {all}, 0.5);
  EXPECT_EQ(e.counts, (ConfusionCounts{1024, 0, 0, 0}));
  EXPECT_EQ(*e.scores.iou, 1.0);
}

TEST(Report, CsvFormat) {
  EXPECT_EQ(report_header(), "variant,threshold,tp,fp,tn,fn,precision,recall,f1,iou");
  Evaluation e{{6, 2, 0, 2}, scores({6, 2, 0, 2})};
  EXPECT_EQ(report_row("full", 0.5, e), "full,0.5,6,2,0,2,0.750000,0.750000,0.750000,0.600000");
  Evaluation u{{0, 0, 3, 0}, scores({0, 0, 3, 0})};
  EXPECT_EQ(report_row("baseline", 0.25, u), "baseline,0.25,0,0,3,0,undefined,undefined,undefined,undefined");
}
