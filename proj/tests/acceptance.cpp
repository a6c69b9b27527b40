// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only when
// every criterion passes.

#include <boost/multiprecision/cpp_int.hpp>
#include <boost/rational.hpp>
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>

#include "block_check.hpp"
#include "cli.hpp"
#include "mapnet/checkpoint.hpp"
#include "mapnet/image_io.hpp"
#include "mapnet/kernels.hpp"
#include "mapnet/loss.hpp"
#include "mapnet/metrics.hpp"
#include "mapnet/scene.hpp"
#include "mapnet/tiling.hpp"
#include "mapnet/train.hpp"
#include "support.hpp"

using namespace mapnet;
using namespace mapnet::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects failed expectations of one criterion.
struct Checker {
  Outcome o;
  void expect(bool ok, const std::string& what) {
    if (!ok) {
      o.pass = false;
      if (!o.detail.empty()) o.detail += "; ";
      o.detail += what;
    }
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

int run_cli(std::vector<std::string> args, std::string* out = nullptr) {
  args.insert(args.begin(), "mapnet");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), o, e);
  if (out) *out = o.str();
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// ---------------------------------------------------------------- gradients

Outcome gradient_suite() {
  Checker c;
  double worst = 0;
  std::size_t checks = 0;
  auto record = [&](const std::string& name, const GradCheckReport& r) {
    worst = std::max(worst, r.max_rel_err);
    ++checks;
    c.expect(r.pass && r.max_rel_err <= 1e-4 && r.checked > 0, name + " rel " + fmt("%.2e", r.max_rel_err));
  };
  Rng rng(1);
  auto projected = [&](std::function<Var(Graph<double>&, std::span<const Var>)> body, Shape out) {
    const auto proj = random_tensor<double>(out, rng);
    return GraphClosure<double>([body, proj](Graph<double>& g, std::span<const Var> in) {
      return ops::weighted_sum(g, body(g, in), proj);
    });
  };

  struct ConvCase {
    int k, stride, pad;
  };
  for (const auto [k, stride, pad] : {ConvCase{3, 1, 1}, ConvCase{3, 2, 1}, ConvCase{1, 1, 0}, ConvCase{3, 1, 0}}) {
    const Shape xs{2, 3, 6, 5};
    const int oh = (xs.h + 2 * pad - k) / stride + 1, ow = (xs.w + 2 * pad - k) / stride + 1;
    auto f = projected([=](Graph<double>& g, std::span<const Var> in) { return ops::conv2d(g, in[0], in[1], in[2], stride, pad); },
                       {2, 2, oh, ow});
    record("conv2d", finite_diff_check<double>(f, {random_tensor<double>(xs, rng), random_tensor<double>({2, 3, k, k}, rng),
                                                   random_tensor<double>({2, 1, 1, 1}, rng)}));
  }
  {
    Tensor<double> x({2, 2, 6, 6});
    std::vector<double> v(x.size());
    std::iota(v.begin(), v.end(), 0.0);
    shuffle(v, rng);
    for (std::size_t i = 0; i < v.size(); ++i) x[i] = 0.05 * v[i] - 1.0;  // no ties inside a window
    auto f = projected([](Graph<double>& g, std::span<const Var> in) {
      return ops::pool2d(g, in[0], ops::PoolKind::max, ops::PoolWindowSpec{2, 2});
    }, {2, 2, 3, 3});
    record("max_pool", finite_diff_check<double>(f, {x}));
  }
  const std::vector<std::pair<ops::PoolSpec, Shape>> avg{{ops::PoolWindowSpec{2, 1}, {2, 2, 5, 5}},
                                                         {ops::AdaptiveBins{2}, {2, 2, 2, 2}},
                                                         {ops::GlobalPool{}, {2, 2, 1, 1}}};
  for (const auto& [spec, out] : avg) {
    auto f = projected([spec](Graph<double>& g, std::span<const Var> in) { return ops::pool2d(g, in[0], ops::PoolKind::avg, spec); },
                       out);
    record("avg_pool", finite_diff_check<double>(f, {random_tensor<double>({2, 2, 6, 6}, rng)}));
  }
  {
    auto f = projected([](Graph<double>& g, std::span<const Var> in) { return ops::bilinear_resize(g, in[0], 9, 7); },
                       {1, 2, 9, 7});
    record("bilinear", finite_diff_check<double>(f, {random_tensor<double>({1, 2, 4, 3}, rng)}));
  }
  for (Mode mode : {Mode::train, Mode::infer}) {
    const auto rm = random_tensor<double>({1, 3, 1, 1}, rng);
    const auto rv = random_tensor<double>({1, 3, 1, 1}, rng, 0.5, 2.0);
    auto f = projected([=](Graph<double>& g, std::span<const Var> in) {
      Tensor<double> m = rm, v = rv;
      return ops::batch_norm(g, in[0], in[1], in[2], m, v, mode);
    }, {2, 3, 3, 3});
    record("batch_norm", finite_diff_check<double>(f, {random_tensor<double>({2, 3, 3, 3}, rng, -2, 2),
                                                       random_tensor<double>({1, 3, 1, 1}, rng, 0.5, 2),
                                                       random_tensor<double>({1, 3, 1, 1}, rng)}));
  }
  {
    Tensor<double> x({2, 2, 3, 3});
    for (auto& v : x.data()) v = (rng.bernoulli(0.5) ? 1 : -1) * rng.uniform(0.05, 1.0);
    auto f = projected([](Graph<double>& g, std::span<const Var> in) { return ops::relu(g, in[0]); }, x.shape());
    record("relu", finite_diff_check<double>(f, {x}));
    auto s = projected([](Graph<double>& g, std::span<const Var> in) { return ops::sigmoid(g, in[0]); }, x.shape());
    record("sigmoid", finite_diff_check<double>(s, {random_tensor<double>(x.shape(), rng, -4, 4)}));
  }
  {
    auto f = projected([](Graph<double>& g, std::span<const Var> in) { return ops::dense(g, in[0], in[1], in[2]); },
                       {2, 4, 1, 1});
    record("dense", finite_diff_check<double>(f, {random_tensor<double>({2, 5, 1, 1}, rng), random_tensor<double>({4, 5, 1, 1}, rng),
                                                  random_tensor<double>({4, 1, 1, 1}, rng)}));
  }
  {
    auto f = projected([](Graph<double>& g, std::span<const Var> in) {
      const std::vector<Var> parts{in[0], in[1]};
      return ops::add(g, ops::scale_channels(g, ops::concat_channels<double>(g, parts), in[2]), in[3]);
    }, {2, 5, 3, 3});
    record("concat_scale_add",
           finite_diff_check<double>(f, {random_tensor<double>({2, 2, 3, 3}, rng), random_tensor<double>({2, 3, 3, 3}, rng),
                                         random_tensor<double>({2, 5, 1, 1}, rng), random_tensor<double>({2, 5, 3, 3}, rng)}));
  }
  {
    GraphClosure<double> f = [](Graph<double>& g, std::span<const Var> in) {
      return ops::add(g, ops::sum(g, ops::sigmoid(g, in[0])), ops::mean(g, ops::sigmoid(g, in[0])));
    };
    record("sum_mean", finite_diff_check<double>(f, {random_tensor<double>({2, 2, 3, 3}, rng)}));
    Tensor<double> labels({2, 1, 3, 3});
    for (auto& v : labels.data()) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
    GraphClosure<double> l = [labels](Graph<double>& g, std::span<const Var> in) { return bce_loss(g, in[0], labels); };
    record("bce_loss", finite_diff_check<double>(l, {random_tensor<double>(labels.shape(), rng, -6, 6)}));
  }

  GradCheckOptions bo;
  bo.step = 1e-6;
  bo.max_elements_per_input = 24;
  bo.seed = 5;
  auto declared = [](const auto& block, std::uint64_t seed) {
    ParamStore<double> store;
    Rng r(seed);
    block.declare(store, r);
    return store;
  };
  {
    ResidualBlock b("res", 8);
    auto s = declared(b, 21);
    record("residual", check_block(s, random_tensor<double>({2, 8, 4, 4}, rng), [&](Context<double>& x, Var v) { return b.forward(x, v); },
                                   Mode::train, bo, 1));
  }
  {
    ConvBlock b("p", 4, 3);
    auto s = declared(b, 23);
    record("conv_block", check_block(s, random_tensor<double>({1, 4, 5, 5}, rng), [&](Context<double>& x, Var v) { return b.forward(x, v); },
                                     Mode::infer, bo, 2));
  }
  {
    DownsampleBlock b("down", 4);
    auto s = declared(b, 25);
    record("downsample", check_block(s, random_tensor<double>({2, 3, 16, 16}, rng, 0, 1),
                                     [&](Context<double>& x, Var v) { return b.forward(x, v).out; }, Mode::train, bo, 3));
  }
  {
    GenBlock b("gen", 3);
    auto s = declared(b, 27);
    record("gen_block", check_block(s, random_tensor<double>({2, 3, 6, 6}, rng), [&](Context<double>& x, Var v) { return b.forward(x, v); },
                                    Mode::train, bo, 4));
  }
  {
    AttentionSqueeze b("attn", 7);
    auto s = declared(b, 29);
    record("attention", check_block(s, random_tensor<double>({2, 7, 3, 3}, rng),
                                    [&](Context<double>& x, Var v) { return b.forward(x, v).out; }, Mode::train, bo, 5));
  }
  {
    SpatialPoolEnhance b("spp", 8);
    auto s = declared(b, 31);
    record("spatial_pool", check_block(s, random_tensor<double>({1, 8, 8, 8}, rng),
                                       [&](Context<double>& x, Var v) { return b.forward(x, v); }, Mode::train, bo, 6));
  }
  {
    UpsampleHead b("head", 7, 2, 2);
    auto s = declared(b, 33);
    const auto skip = random_tensor<double>({2, 2, 8, 8}, rng);
    record("head", check_block(s, random_tensor<double>({2, 7, 4, 4}, rng),
                               [&](Context<double>& x, Var v) {
                                 const Var k = x.graph().input(skip);
                                 return b.forward(x, v, &k).logits;
                               },
                               Mode::train, bo, 7));
  }

  // Mutation: a conv whose weight gradient is negated must be caught.
  GraphClosure<double> mutated = [](Graph<double>& g, std::span<const Var> in) {
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
  const auto m = finite_diff_check<double>(mutated, {random_tensor<double>({1, 2, 5, 5}, rng, 0.5, 1.5),
                                                     random_tensor<double>({2, 2, 3, 3}, rng),
                                                     random_tensor<double>({2, 1, 1, 1}, rng)});
  c.expect(!m.pass && m.max_rel_err >= 1e-1, "mutation rel " + fmt("%.2e", m.max_rel_err));
  if (c.o.pass) {
    c.o.detail = std::to_string(checks) + " checks, max rel " + fmt("%.2e", worst) + ", mutation rel " +
                 fmt("%.2f", m.max_rel_err);
  }
  return c.o;
}

// ---------------------------------------------------------------- accounting

ModelConfig paper_config(Variant v) {
  ModelConfig mc;
  mc.variant = v;
  return mc;
}

Outcome parameter_deltas() {
  Checker c;
  std::map<Variant, std::uint64_t> n;
  const std::vector<Variant> order{Variant::baseline, Variant::plus_c, Variant::plus_s, Variant::full, Variant::full_f};
  for (Variant v : order) n[v] = Model<float>(paper_config(v), 0).count_params().total;
  const auto dc = n[Variant::plus_c] - n[Variant::baseline];
  const auto ds = n[Variant::plus_s] - n[Variant::baseline];
  c.expect(dc == 201152, "plus_c delta " + std::to_string(dc));
  c.expect(ds == 402304, "plus_s delta " + std::to_string(ds));
  // Published totals are in millions to two decimals.
  auto rounded = [](std::uint64_t x) { return std::round(x / 1e4) / 100.0; };
  c.expect(std::abs(rounded(dc) - (23.54 - 23.35)) <= 0.01 + 1e-9, "plus_c delta off the published 0.19M");
  c.expect(std::abs(rounded(ds) - (23.75 - 23.35)) <= 0.01 + 1e-9, "plus_s delta off the published 0.40M");
  for (std::size_t i = 1; i < order.size(); ++i) {
    c.expect(n[order[i - 1]] < n[order[i]], to_string(order[i - 1]) + " !< " + to_string(order[i]));
  }
  if (c.o.pass) {
    c.o.detail = "deltas " + std::to_string(dc) + " and " + std::to_string(ds) + ", baseline " +
                 std::to_string(n[Variant::baseline]) + " < ... < full_f " + std::to_string(n[Variant::full_f]);
  }
  return c.o;
}

// ---------------------------------------------------------------- metrics

Outcome metric_oracle() {
  using Q = boost::rational<boost::multiprecision::cpp_int>;
  Checker c;
  Rng rng(2024);
  int compared = 0;
  while (compared < 1000) {
    auto draw = [&] { return static_cast<long long>(rng.uniform_int(0, rng.bernoulli(0.5) ? 5 : 1'000'000'000)); };
    const long long a = draw(), b = draw(), d = draw();
    if (a == 0) continue;  // precision or recall undefined
    const Q tp(a), fp(b), fn(d);
    const Q p = tp / (tp + fp), r = tp / (tp + fn);
    c.expect(p * r / (p + r - p * r) == tp / (tp + fp + fn), "iou identity");
    c.expect(2 * p * r / (p + r) == 2 * tp / (2 * tp + fp + fn), "f1 identity");
    ++compared;
  }
  const auto s = scores({6, 2, 0, 2});
  c.expect(s.iou && std::abs(*s.iou - 0.6) < 1e-12, "worked IoU");
  c.expect(s.f1 && std::abs(*s.f1 - 0.75) < 1e-12, "worked F1");
  if (c.o.pass) c.o.detail = std::to_string(compared) + " exact rational identities, worked example IoU 0.6 F1 0.75";
  return c.o;
}

// ---------------------------------------------------------------- overfit

Outcome overfit() {
  Checker c;
  std::vector<Sample> tiles;
  for (int i = 0; i < 8; ++i) {
    SceneSpec s;
    s.seed = 1000 + i;
    s.id = "tile" + std::to_string(i);
    s.height = s.width = 64;
    s.min_buildings = 1;
    s.max_buildings = 3;
    s.min_scale = 16;
    s.max_scale = 32;
    s.bg_cell = 16;
    s.noise = 0.02;
    tiles.push_back(generate_scene(s));
  }
  ModelConfig mc;
  mc.base_channels = 16;
  mc.input_h = mc.input_w = 64;
  Model<float> model(mc, 7);
  TrainConfig tc;
  tc.batch_size = 8;
  tc.epochs = 1000;
  tc.max_steps = 300;
  tc.augment = false;
  tc.seed = 3;
  tc.lr = 1e-3;
  const auto result = train(model, tiles, tc);
  const double loss = result.log.back().loss;
  const auto e = evaluate_dataset(model, tiles, 0.5);
  const double iou = e.scores.iou.value_or(0.0);
  c.expect(result.log.size() == 300, "steps " + std::to_string(result.log.size()));
  c.expect(loss < 0.05, "final loss " + fmt("%.4f", loss) + " >= 0.05");
  c.expect(iou >= 0.95, "training IoU " + fmt("%.4f", iou) + " < 0.95");
  if (c.o.pass) c.o.detail = "final loss " + fmt("%.4f", loss) + ", training IoU " + fmt("%.4f", iou);
  return c.o;
}

// ---------------------------------------------------------------- identities

Outcome identities() {
  Checker c;
  Rng rng(5);
  auto run_block = [](ParamStore<float>& s, const Tensor<float>& x, auto&& fwd) {
    Graph<float> g;
    Context<float> ctx(g, s, Mode::infer);
    return g.value(fwd(ctx, g.input(x)));
  };
  auto declared = [](const auto& block) {
    ParamStore<float> store;
    Rng r(1);
    block.declare(store, r);
    return store;
  };
  {
    ResidualBlock b("res", 16);
    auto s = declared(b);
    s.fill_matching("conv", 0.0f);
    const auto x = random_tensor<float>({2, 16, 12, 12}, rng, -3, 3);
    c.expect(bitwise_equal(x, run_block(s, x, [&](Context<float>& k, Var v) { return b.forward(k, v); })), "residual");
  }
  {
    ConvBlock b("path1/stage1", 16, 4);
    auto s = declared(b);
    s.fill_matching("conv", 0.0f);
    const auto x = random_tensor<float>({2, 16, 8, 8}, rng);
    c.expect(bitwise_equal(x, run_block(s, x, [&](Context<float>& k, Var v) { return b.forward(k, v); })), "conv block");
  }
  {
    SpatialPoolEnhance b("spp", 28);
    auto s = declared(b);
    s.fill_matching("conv", 0.0f);
    const auto x = random_tensor<float>({2, 28, 16, 16}, rng);
    c.expect(bitwise_equal(x, run_block(s, x, [&](Context<float>& k, Var v) { return b.forward(k, v); })), "spatial pool");
  }
  {
    AttentionSqueeze b("attn", 28);
    auto s = declared(b);
    s.fill_matching("dense", 0.0f);
    const auto x = random_tensor<float>({2, 28, 4, 4}, rng);
    const auto y = run_block(s, x, [&](Context<float>& k, Var v) { return b.forward(k, v).out; });
    bool half = true;
    for (std::size_t i = 0; i < y.size(); ++i) half = half && y[i] == 0.5f * x[i];
    c.expect(half, "attention half gate");
  }
  for (Variant v : {Variant::baseline, Variant::plus_c, Variant::plus_s, Variant::full, Variant::full_f}) {
    ModelConfig mc;
    mc.variant = v;
    mc.base_channels = 8;
    mc.n_blocks = 3;
    mc.input_h = mc.input_w = 64;
    Model<float> m(mc, 19);
    m.params().fill_matching("head/out/", 0.0f);
    bool half = true;
    const auto prob = m.predict(random_tensor<float>({1, 3, 64, 64}, rng, 0, 1));
    for (float p : prob.data()) half = half && p == 0.5f;
    c.expect(half, "zero head " + to_string(v));
  }
  if (c.o.pass) c.o.detail = "residual, conv block and spatial pooling exact; attention 0.5x; head 0.5 for all variants";
  return c.o;
}

// ---------------------------------------------------------------- determinism

Outcome determinism() {
  Checker c;
  Rng rng(6);
  std::vector<Sample> data;
  for (int i = 0; i < 6; ++i) data.push_back(toy_sample("s" + std::to_string(i), 32, 32, rng));
  ModelConfig mc;
  mc.base_channels = 4;
  mc.n_blocks = 3;
  mc.input_h = mc.input_w = 32;
  mc.variant = Variant::full_f;
  TrainConfig tc;
  tc.batch_size = 2;
  tc.epochs = 2;
  tc.seed = 9;
  auto once = [&] {
    Model<float> m(mc, 4);
    return train(m, data, tc);
  };
  const auto a = once(), b = once();
  c.expect(serialize(a.checkpoint) == serialize(b.checkpoint), "checkpoint bytes differ");
  bool same_log = a.log.size() == b.log.size();
  for (std::size_t i = 0; same_log && i < a.log.size(); ++i) {
    same_log = a.log[i].step == b.log[i].step && a.log[i].epoch == b.log[i].epoch &&
               std::memcmp(&a.log[i].loss, &b.log[i].loss, sizeof(double)) == 0;
  }
  c.expect(same_log, "loss logs differ");

  const auto dir = scratch_dir("acceptance_determinism");
  std::size_t files = 0;
  c.expect(run_cli({"generate-data", "--out", (dir / "a").string(), "--seed", "11"}) == 0, "generate-data a");
  c.expect(run_cli({"generate-data", "--out", (dir / "b").string(), "--seed", "11"}) == 0, "generate-data b");
  for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
    if (!e.is_regular_file()) continue;
    ++files;
    if (slurp(e.path()) != slurp(dir / "b" / fs::relative(e.path(), dir / "a"))) {
      c.expect(false, "generate-data differs at " + e.path().filename().string());
      break;
    }
  }
  c.expect(files > 0, "generate-data wrote nothing");
  if (c.o.pass) {
    c.o.detail = std::to_string(a.log.size()) + " steps bitwise equal twice, " + std::to_string(files) +
                 " generated files byte-identical";
  }
  return c.o;
}

// ---------------------------------------------------------------- round trips

Outcome round_trips() {
  Checker c;
  Rng rng(7);
  auto random_raster = [&](int h, int w) {
    Sample s;
    s.id = "raster";
    s.image = random_tensor<float>({1, 3, h, w}, rng, 0, 1);
    s.mask = Tensor<float>({1, 1, h, w});
    for (auto& v : s.mask.data()) v = rng.bernoulli(0.3) ? 1.0f : 0.0f;
    return s;
  };
  {
    const auto big = random_raster(2048, 2048);
    const auto tiles = tile(big, 512, 512);
    bool regular = tiles.size() == 16;
    for (const auto& t : tiles) regular = regular && t.height() == 512 && t.width() == 512;
    c.expect(regular, "2048 raster did not cut into 16 tiles of 512");
    const auto back = stitch(tiles, "raster", 2048, 2048);
    c.expect(bitwise_equal(back.image, big.image) && bitwise_equal(back.mask, big.mask), "2048 stitch");
  }
  for (int i = 0; i < 20; ++i) {
    const int th = int(rng.uniform_int(4, 24)), tw = int(rng.uniform_int(4, 24));
    const auto r = random_raster(int(rng.uniform_int(th, 80)), int(rng.uniform_int(tw, 80)));
    const auto back = stitch(tile(r, th, tw), "raster", r.height(), r.width());
    c.expect(bitwise_equal(back.image, r.image) && bitwise_equal(back.mask, r.mask), "random stitch " + std::to_string(i));
  }
  {
    ModelConfig mc;
    mc.base_channels = 8;
    mc.n_blocks = 3;
    mc.input_h = mc.input_w = 32;
    mc.variant = Variant::full_f;
    Model<float> m(mc, 3);
    const auto dir = scratch_dir("acceptance_roundtrip");
    save_checkpoint(make_checkpoint(m, AdamState<float>::zeros_like(m.params().params()), 77), dir / "a.mapn");
    save_checkpoint(load_checkpoint(dir / "a.mapn"), dir / "b.mapn");
    c.expect(slurp(dir / "a.mapn") == slurp(dir / "b.mapn"), "checkpoint save-load-save");

    const auto mask = random_raster(37, 53).mask;
    write_pnm(dir / "m.pgm", mask_to_raw(mask));
    c.expect(bitwise_equal(mask_from_raw(read_pnm(dir / "m.pgm")), mask), "PGM mask");
    const auto rgb = from_raw(to_raw(random_raster(29, 31).image));
    write_pnm(dir / "i.ppm", to_raw(rgb));
    c.expect(bitwise_equal(from_raw(read_pnm(dir / "i.ppm")), rgb), "PPM image");
  }
  if (c.o.pass) c.o.detail = "2048 -> 16 x 512 and 20 random rasters stitched exactly; checkpoint and PGM/PPM byte-stable";
  return c.o;
}

// ---------------------------------------------------------------- sweep

Outcome sweep() {
  Checker c;
  std::string csv;
  c.expect(run_cli({"sweep", "--blocks", "3..6", "--paths", "2..4"}, &csv) == 0, "sweep exit code");
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  std::map<std::pair<int, int>, long long> n;
  while (std::getline(in, line)) {
    int p = 0, b = 0;
    long long params = 0, macs = 0;
    if (std::sscanf(line.c_str(), "%d,%d,%lld,%lld", &p, &b, &params, &macs) == 4) n[{p, b}] = params;
  }
  c.expect(n.size() == 12, std::to_string(n.size()) + " rows");
  if (n.size() != 12) return c.o;
  double min_ratio = 1e300;
  for (int p = 2; p <= 4; ++p) {
    const long long step = n[{p, 4}] - n[{p, 3}];
    c.expect(step > 0, "no growth in blocks");
    for (int b = 5; b <= 6; ++b) c.expect(n[{p, b}] - n[{p, b - 1}] == step, "block growth not linear");
  }
  for (int b = 3; b <= 6; ++b) {
    const double d1 = double(n[{3, b}] - n[{2, b}]), d2 = double(n[{4, b}] - n[{3, b}]);
    c.expect(d1 > 0 && d2 / d1 > 1.0, "path growth not super-linear");
    min_ratio = std::min(min_ratio, d2 / d1);
  }
  if (c.o.pass) c.o.detail = "constant block increments, path increment ratio >= " + fmt("%.2f", min_ratio);
  return c.o;
}

}  // namespace

// Optional arguments pick criteria by number; the default runs all of them.
int main(int argc, char** argv) {
  std::vector<std::size_t> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::stoul(argv[i]));
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
    double budget_seconds;  // 0 = no runtime bound
  };
  const std::vector<Criterion> criteria{
      {"gradient suite", gradient_suite, 120},  {"parameter deltas", parameter_deltas, 0},
      {"metric oracle", metric_oracle, 0},      {"overfit run", overfit, 600},
      {"identity degeneracies", identities, 0}, {"determinism", determinism, 0},
      {"pipeline round trips", round_trips, 0}, {"sweep behavior", sweep, 60},
  };
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && std::find(only.begin(), only.end(), i + 1) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (criteria[i].budget_seconds > 0 && secs > criteria[i].budget_seconds) {
      o.pass = false;
      o.detail += " (over the " + fmt("%.0f", criteria[i].budget_seconds) + " s budget)";
    }
    all = all && o.pass;
    std::printf("%s criterion %zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name,
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
