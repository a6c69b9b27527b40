#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "mapnet/errors.hpp"
#include "mapnet/gradcheck.hpp"
#include "mapnet/kernels.hpp"
#include "mapnet/loss.hpp"
#include "mapnet/ops.hpp"
#include "support.hpp"

using namespace mapnet;
using mapnet::testing::random_shape;
using mapnet::testing::random_tensor;

namespace {

constexpr int instances = 24;

// Random projection so every output element carries a distinct weight.
Var project(Graph<double>& g, Var y, Rng& rng) {
  return ops::weighted_sum(g, y, random_tensor<double>(g.value(y).shape(), rng));
}

// Values spaced far apart so no max-pool window is near a tie.
Tensor<double> distinct_values(Shape s, Rng& rng) {
  Tensor<double> t(s);
  std::vector<double> v(t.size());
  std::iota(v.begin(), v.end(), 0.0);
  shuffle(v, rng);
  for (std::size_t i = 0; i < v.size(); ++i) t[i] = 0.05 * v[i] - 1.0;
  return t;
}

// Values bounded away from zero so relu kinks are never straddled.
Tensor<double> away_from_zero(Shape s, Rng& rng) {
  Tensor<double> t(s);
  for (auto& v : t.data()) v = (rng.bernoulli(0.5) ? 1 : -1) * rng.uniform(0.05, 1.0);
  return t;
}

void expect_pass(const GradCheckReport& r, int trial) {
  EXPECT_TRUE(r.pass) << "trial " << trial << " max_rel_err " << r.max_rel_err << " input " << r.worst_input
                      << " index " << r.worst_index;
  EXPECT_LE(r.max_rel_err, 1e-4);
  EXPECT_GT(r.checked, 0u);
}

}  // namespace

TEST(GradCheck, RejectsSinglePrecisionAndBadSteps) {
  GraphClosure<float> ff = [](Graph<float>& g, std::span<const Var> in) { return ops::sum(g, in[0]); };
  EXPECT_THROW(finite_diff_check<float>(ff, {Tensor<float>({1, 1, 2, 2})}), UsageError);
  GraphClosure<double> fd = [](Graph<double>& g, std::span<const Var> in) { return ops::sum(g, in[0]); };
  GradCheckOptions opt;
  opt.step = 1e-7;
  EXPECT_THROW(finite_diff_check<double>(fd, {Tensor<double>({1, 1, 2, 2})}, opt), UsageError);
  opt.step = 0.1;
  EXPECT_THROW(finite_diff_check<double>(fd, {Tensor<double>({1, 1, 2, 2})}, opt), UsageError);
}

TEST(Gradients, Conv2d) {
  Rng rng(100);
  for (int t = 0; t < instances; ++t) {
    const int k = rng.uniform_int(0, 1) ? 3 : 1;
    const int stride = int(rng.uniform_int(1, 2));
    const int pad = int(rng.uniform_int(0, k / 2));
    const Shape xs = random_shape(rng, 2, 3, k, 7);
    const int oc = int(rng.uniform_int(1, 3));
    Rng proj(rng.next_u64());
    GraphClosure<double> f = [&, stride, pad](Graph<double>& g, std::span<const Var> in) {
      Rng p = proj;
      return project(g, ops::conv2d(g, in[0], in[1], in[2], stride, pad), p);
    };
    expect_pass(finite_diff_check<double>(f, {random_tensor<double>(xs, rng), random_tensor<double>({oc, xs.c, k, k}, rng),
                                               random_tensor<double>({oc, 1, 1, 1}, rng)}),
                t);
  }
}

TEST(Gradients, ConvWeightGradientMatchesFiniteDifferencesTightly) {
  Rng rng(101);
  GraphClosure<double> f = [](Graph<double>& g, std::span<const Var> in) {
    return ops::sum(g, ops::conv2d(g, in[0], in[1], in[2], 1, 1));
  };
  GradCheckOptions opt;
  opt.tolerance = 1e-6;
  const auto r = finite_diff_check<double>(
      f, {random_tensor<double>({1, 1, 3, 3}, rng), random_tensor<double>({1, 1, 3, 3}, rng), Tensor<double>({1, 1, 1, 1})},
      opt);
  EXPECT_TRUE(r.pass) << r.max_rel_err;
}

TEST(Gradients, ConvSigmoidSumChain) {
  Rng rng(102);
  GraphClosure<double> f = [](Graph<double>& g, std::span<const Var> in) {
    return ops::sum(g, ops::sigmoid(g, ops::conv2d(g, in[0], in[1], in[2], 1, 1)));
  };
  GradCheckOptions opt;
  opt.tolerance = 1e-6;
  const auto r = finite_diff_check<double>(
      f, {random_tensor<double>({1, 2, 4, 4}, rng), random_tensor<double>({2, 2, 3, 3}, rng), random_tensor<double>({2, 1, 1, 1}, rng)},
      opt);
  EXPECT_TRUE(r.pass) << r.max_rel_err;
}

// A conv whose weight gradient is deliberately negated must be caught.
TEST(Gradients, MutatedConvGradientFails) {
  Rng rng(103);
  GraphClosure<double> f = [](Graph<double>& g, std::span<const Var> in) {
    const Var x = in[0], w = in[1], b = in[2];
    Tensor<double> y = kernels::conv2d_forward(g.value(x), g.value(w), g.value(b), 1, 1);
    const Var out = g.record(OpKind::custom, std::move(y), {x, w, b}, [x, w, b](BackwardContext<double>& ctx) {
      kernels::conv2d_backward_input(ctx.grad_output(), ctx.value(w), 1, 1, ctx.grad(x));
      Tensor<double> gw(ctx.value(w).shape());
      kernels::conv2d_backward_weight(ctx.grad_output(), ctx.value(x), 1, 1, gw);
      Tensor<double>& acc = ctx.grad(w);
      for (std::size_t i = 0; i < gw.size(); ++i) acc[i] -= gw[i];
      kernels::conv2d_backward_bias(ctx.grad_output(), ctx.grad(b));
    });
    return ops::sum(g, out);
  };
  const auto r = finite_diff_check<double>(
      f, {random_tensor<double>({1, 2, 5, 5}, rng, 0.5, 1.5), random_tensor<double>({2, 2, 3, 3}, rng),
          random_tensor<double>({2, 1, 1, 1}, rng)});
  EXPECT_FALSE(r.pass);
  EXPECT_GE(r.max_rel_err, 1e-1);
  EXPECT_EQ(r.worst_input, 1u);
}

TEST(Gradients, MaxPool) {
  Rng rng(104);
  for (int t = 0; t < instances; ++t) {
    const int k = int(rng.uniform_int(1, 3));
    const int s = int(rng.uniform_int(1, 3));
    const Shape xs = random_shape(rng, 2, 2, k, 7);
    Rng proj(rng.next_u64());
    GraphClosure<double> f = [&, k, s](Graph<double>& g, std::span<const Var> in) {
      Rng p = proj;
      return project(g, ops::pool2d(g, in[0], ops::PoolKind::max, ops::PoolWindowSpec{k, s}), p);
    };
    expect_pass(finite_diff_check<double>(f, {distinct_values(xs, rng)}), t);
  }
}

TEST(Gradients, AvgPoolWindowAdaptiveGlobal) {
  Rng rng(105);
  for (int t = 0; t < instances; ++t) {
    const int mode = t % 3;
    const int bins = int(rng.uniform_int(1, 3));
    Shape xs = random_shape(rng, 2, 2, 2, 7);
    if (mode == 1) {
      xs.h = bins * int(rng.uniform_int(1, 3));
      xs.w = bins * int(rng.uniform_int(1, 3));
    }
    const ops::PoolSpec spec = mode == 0   ? ops::PoolSpec{ops::PoolWindowSpec{2, int(rng.uniform_int(1, 2))}}
                               : mode == 1 ? ops::PoolSpec{ops::AdaptiveBins{bins}}
                                           : ops::PoolSpec{ops::GlobalPool{}};
    Rng proj(rng.next_u64());
    GraphClosure<double> f = [&](Graph<double>& g, std::span<const Var> in) {
      Rng p = proj;
      return project(g, ops::pool2d(g, in[0], ops::PoolKind::avg, spec), p);
    };
    expect_pass(finite_diff_check<double>(f, {random_tensor<double>(xs, rng)}), t);
  }
}

TEST(Gradients, BilinearResize) {
  Rng rng(106);
  for (int t = 0; t < instances; ++t) {
    const Shape xs = random_shape(rng, 2, 2, 1, 6);
    const int oh = int(rng.uniform_int(1, 12)), ow = int(rng.uniform_int(1, 12));
    Rng proj(rng.next_u64());
    GraphClosure<double> f = [&, oh, ow](Graph<double>& g, std::span<const Var> in) {
      Rng p = proj;
      return project(g, ops::bilinear_resize(g, in[0], oh, ow), p);
    };
    expect_pass(finite_diff_check<double>(f, {random_tensor<double>(xs, rng)}), t);
  }
}

TEST(Gradients, BatchNormTrainAndInfer) {
  Rng rng(107);
  for (int t = 0; t < instances; ++t) {
    const Mode mode = t % 2 ? Mode::infer : Mode::train;
    Shape xs = random_shape(rng, 3, 3, 1, 4);
    if (xs.n * xs.h * xs.w < 4) xs.h = 4;
    const auto rm = random_tensor<double>({1, xs.c, 1, 1}, rng);
    const auto rv = random_tensor<double>({1, xs.c, 1, 1}, rng, 0.5, 2.0);
    Rng proj(rng.next_u64());
    GraphClosure<double> f = [&, mode](Graph<double>& g, std::span<const Var> in) {
      Tensor<double> m = rm, v = rv;
      Rng p = proj;
      return project(g, ops::batch_norm(g, in[0], in[1], in[2], m, v, mode), p);
    };
    expect_pass(finite_diff_check<double>(f, {random_tensor<double>(xs, rng, -2, 2), random_tensor<double>({1, xs.c, 1, 1}, rng, 0.5, 2),
                                               random_tensor<double>({1, xs.c, 1, 1}, rng)}),
                t);
  }
}

TEST(Gradients, ReluAndSigmoid) {
  Rng rng(108);
  for (int t = 0; t < instances; ++t) {
    const Shape xs = random_shape(rng, 2, 3, 1, 5);
    const auto kind = t % 2 ? ops::Activation::sigmoid : ops::Activation::relu;
    Rng proj(rng.next_u64());
    GraphClosure<double> f = [&, kind](Graph<double>& g, std::span<const Var> in) {
      Rng p = proj;
      return project(g, ops::activation(g, in[0], kind), p);
    };
    const auto x = kind == ops::Activation::relu ? away_from_zero(xs, rng) : random_tensor<double>(xs, rng, -4, 4);
    expect_pass(finite_diff_check<double>(f, {x}), t);
  }
}

TEST(Gradients, ReluExcludesExactZeros) {
  Tensor<double> x({1, 1, 2, 3}, std::vector<double>{0.0, 0.7, -0.4, 0.0, 1.2, -2.0});
  GraphClosure<double> f = [](Graph<double>& g, std::span<const Var> in) { return ops::sum(g, ops::relu(g, in[0])); };
  GradCheckOptions opt;
  opt.exclude = [&x](std::size_t input, std::size_t index) { return input == 0 && x[index] == 0.0; };
  const auto r = finite_diff_check<double>(f, {x}, opt);
  EXPECT_TRUE(r.pass) << r.max_rel_err;
  EXPECT_EQ(r.checked, 4u);
}

TEST(Gradients, Dense) {
  Rng rng(109);
  for (int t = 0; t < instances; ++t) {
    const int n = int(rng.uniform_int(1, 3)), k = int(rng.uniform_int(1, 6)), ko = int(rng.uniform_int(1, 6));
    Rng proj(rng.next_u64());
    GraphClosure<double> f = [&](Graph<double>& g, std::span<const Var> in) {
      Rng p = proj;
      return project(g, ops::dense(g, in[0], in[1], in[2]), p);
    };
    expect_pass(finite_diff_check<double>(f, {random_tensor<double>({n, k, 1, 1}, rng), random_tensor<double>({ko, k, 1, 1}, rng),
                                               random_tensor<double>({ko, 1, 1, 1}, rng)}),
                t);
  }
}

TEST(Gradients, ConcatAddScale) {
  Rng rng(110);
  for (int t = 0; t < instances; ++t) {
    const Shape a = random_shape(rng, 2, 3, 1, 4);
    Shape b = a;
    b.c = int(rng.uniform_int(1, 3));
    Rng proj(rng.next_u64());
    GraphClosure<double> f = [&](Graph<double>& g, std::span<const Var> in) {
      Rng p = proj;
      const std::vector<Var> parts{in[0], in[1]};
      const Var cat = ops::concat_channels<double>(g, parts);
      const Var scaled = ops::scale_channels(g, cat, in[2]);
      return project(g, ops::add(g, scaled, in[3]), p);
    };
    Shape gates{a.n, a.c + b.c, 1, 1}, full{a.n, a.c + b.c, a.h, a.w};
    expect_pass(finite_diff_check<double>(f, {random_tensor<double>(a, rng), random_tensor<double>(b, rng),
                                               random_tensor<double>(gates, rng), random_tensor<double>(full, rng)}),
                t);
  }
}

TEST(Gradients, Reductions) {
  Rng rng(111);
  for (int t = 0; t < instances; ++t) {
    const Shape xs = random_shape(rng, 2, 3, 1, 5);
    const int which = t % 3;
    const auto w = random_tensor<double>(xs, rng);
    GraphClosure<double> f = [&, which](Graph<double>& g, std::span<const Var> in) {
      const Var s = ops::sigmoid(g, in[0]);
      return which == 0 ? ops::sum(g, s) : which == 1 ? ops::mean(g, s) : ops::weighted_sum(g, s, w);
    };
    expect_pass(finite_diff_check<double>(f, {random_tensor<double>(xs, rng)}), t);
  }
}

TEST(Gradients, BceLossAtTightTolerance) {
  Rng rng(112);
  for (int t = 0; t < instances; ++t) {
    const Shape s{int(rng.uniform_int(1, 3)), 1, int(rng.uniform_int(1, 5)), int(rng.uniform_int(1, 5))};
    Tensor<double> labels(s);
    for (auto& v : labels.data()) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
    GraphClosure<double> f = [&](Graph<double>& g, std::span<const Var> in) { return bce_loss(g, in[0], labels); };
    GradCheckOptions opt;
    opt.tolerance = 1e-6;
    opt.step = 1e-5;
    const auto r = finite_diff_check<double>(f, {random_tensor<double>(s, rng, -6, 6)}, opt);
    EXPECT_TRUE(r.pass) << t << " " << r.max_rel_err;
    EXPECT_LE(r.max_rel_err, 1e-6);
  }
}
