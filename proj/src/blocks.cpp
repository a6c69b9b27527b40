#include "mapnet/blocks.hpp"

namespace mapnet {

namespace {

std::string join(const std::string& prefix, const std::string& leaf) {
  return prefix.empty() ? leaf : prefix + "/" + leaf;
}

ConvLayer conv(const std::string& prefix, int in_c, int out_c, int kernel, int stride = 1) {
  return ConvLayer{prefix, in_c, out_c, kernel, stride, kernel == 3 ? 1 : 0};
}

}  // namespace

// --- layers ---

template <typename T>
void ConvLayer::declare(ParamStore<T>& store, Rng& rng) const {
  store.add_param(join(prefix, "weight"), {out_c, in_c, kernel, kernel}, Init::he_normal, rng);
  store.add_param(join(prefix, "bias"), {out_c, 1, 1, 1}, Init::zeros, rng);
}

template <typename T>
Var ConvLayer::forward(Context<T>& ctx, Var x) const {
  return ops::conv2d(ctx.graph(), x, ctx.param(join(prefix, "weight")),
                     ctx.param(join(prefix, "bias")), stride, pad);
}

std::uint64_t ConvLayer::macs(int h, int w) const {
  return static_cast<std::uint64_t>(out_extent(h)) * out_extent(w) * out_c * in_c * kernel * kernel;
}

template <typename T>
void BatchNormLayer::declare(ParamStore<T>& store, Rng& rng) const {
  store.add_param(join(prefix, "gamma"), {channels, 1, 1, 1}, Init::ones, rng);
  store.add_param(join(prefix, "beta"), {channels, 1, 1, 1}, Init::zeros, rng);
  store.add_buffer(join(prefix, "running_mean"), {channels, 1, 1, 1}, T{0});
  store.add_buffer(join(prefix, "running_var"), {channels, 1, 1, 1}, T{1});
}

template <typename T>
Var BatchNormLayer::forward(Context<T>& ctx, Var x) const {
  return ops::batch_norm(ctx.graph(), x, ctx.param(join(prefix, "gamma")),
                         ctx.param(join(prefix, "beta")), ctx.buffer(join(prefix, "running_mean")),
                         ctx.buffer(join(prefix, "running_var")), ctx.mode(), ctx.bn_options());
}

template <typename T>
void DenseLayer::declare(ParamStore<T>& store, Rng& rng) const {
  store.add_param(join(prefix, "weight"), {out, in, 1, 1}, Init::he_normal, rng);
  store.add_param(join(prefix, "bias"), {out, 1, 1, 1}, Init::zeros, rng);
}

template <typename T>
Var DenseLayer::forward(Context<T>& ctx, Var v) const {
  return ops::dense(ctx.graph(), v, ctx.param(join(prefix, "weight")),
                    ctx.param(join(prefix, "bias")));
}

// --- downsample ---

DownsampleBlock::DownsampleBlock(std::string prefix, int channels)
    : prefix_(std::move(prefix)), channels_(channels) {
  if (channels < 2 || channels % 2 != 0) {
    throw ConfigError("downsample block needs an even channel count, got " + std::to_string(channels));
  }
  const int half = channels / 2;
  convs_ = {conv(join(prefix_, "conv1"), 3, half, 3, 2), conv(join(prefix_, "conv2"), half, channels, 3),
            conv(join(prefix_, "conv3"), channels, channels, 3)};
  norms_ = {BatchNormLayer{join(prefix_, "bn1"), half}, BatchNormLayer{join(prefix_, "bn2"), channels},
            BatchNormLayer{join(prefix_, "bn3"), channels}};
}

template <typename T>
void DownsampleBlock::declare(ParamStore<T>& store, Rng& rng) const {
  for (int i = 0; i < 3; ++i) {
    convs_[i].declare(store, rng);
    norms_[i].declare(store, rng);
  }
}

template <typename T>
DownsampleBlock::Output DownsampleBlock::forward(Context<T>& ctx, Var image) const {
  auto& g = ctx.graph();
  const Shape s = g.value(image).shape();
  if (s.c != 3) throw ShapeError("downsample block expects 3 input channels, got " + s.str());
  if (s.h % 16 != 0 || s.w % 16 != 0) {
    throw ConfigError("input height and width must be multiples of 16, got " + s.str());
  }
  Var x = image;
  for (int i = 0; i < 3; ++i) {
    x = convs_[i].forward(ctx, x);
    x = norms_[i].forward(ctx, x);
    x = ops::relu(g, x);
  }
  const Var pooled = ops::pool2d(g, x, ops::PoolKind::max, ops::PoolWindowSpec{2, 2});
  return {pooled, x};
}

std::uint64_t DownsampleBlock::macs(int h, int w) const {
  const int h2 = convs_[0].out_extent(h), w2 = convs_[0].out_extent(w);
  return convs_[0].macs(h, w) + convs_[1].macs(h2, w2) + convs_[2].macs(h2, w2);
}

// --- residual ---

ResidualBlock::ResidualBlock(std::string prefix, int channels) {
  if (channels % bottleneck != 0 || channels < bottleneck) {
    throw ConfigError("residual block channels " + std::to_string(channels) +
                      " not divisible by the bottleneck factor " + std::to_string(bottleneck));
  }
  const int mid = channels / bottleneck;
  norms_ = {BatchNormLayer{join(prefix, "bn1"), channels}, BatchNormLayer{join(prefix, "bn2"), mid},
            BatchNormLayer{join(prefix, "bn3"), mid}, BatchNormLayer{join(prefix, "bn4"), mid}};
  convs_ = {conv(join(prefix, "conv1"), channels, mid, 1), conv(join(prefix, "conv2"), mid, mid, 3),
            conv(join(prefix, "conv3"), mid, mid, 3), conv(join(prefix, "conv4"), mid, channels, 1)};
}

template <typename T>
void ResidualBlock::declare(ParamStore<T>& store, Rng& rng) const {
  for (int i = 0; i < 4; ++i) {
    norms_[i].declare(store, rng);
    convs_[i].declare(store, rng);
  }
}

template <typename T>
Var ResidualBlock::forward(Context<T>& ctx, Var x) const {
  auto& g = ctx.graph();
  const int c = g.value(x).c();
  if (c != norms_[0].channels) {
    throw ShapeError("residual block built for " + std::to_string(norms_[0].channels) +
                     " channels given " + g.value(x).shape().str());
  }
  Var branch = x;
  for (int i = 0; i < 4; ++i) {
    branch = norms_[i].forward(ctx, branch);
    branch = ops::relu(g, branch);
    branch = convs_[i].forward(ctx, branch);
  }
  return ops::add(g, x, branch);
}

std::uint64_t ResidualBlock::macs(int h, int w) const {
  std::uint64_t total = 0;
  for (const auto& c : convs_) total += c.macs(h, w);
  return total;
}

// --- conv block ---

ConvBlock::ConvBlock(std::string prefix, int channels, int n_blocks) : prefix_(std::move(prefix)) {
  if (n_blocks < min_blocks || n_blocks > max_blocks) {
    throw ConfigError("n_blocks must lie in [" + std::to_string(min_blocks) + "," +
                      std::to_string(max_blocks) + "], got " + std::to_string(n_blocks));
  }
  for (int i = 1; i <= n_blocks; ++i) {
    blocks_.emplace_back(join(prefix_, "res" + std::to_string(i)), channels);
  }
}

template <typename T>
void ConvBlock::declare(ParamStore<T>& store, Rng& rng) const {
  for (const auto& b : blocks_) b.declare(store, rng);
}

template <typename T>
Var ConvBlock::forward(Context<T>& ctx, Var x) const {
  for (const auto& b : blocks_) x = b.forward(ctx, x);
  return x;
}

std::uint64_t ConvBlock::macs(int h, int w) const {
  std::uint64_t total = 0;
  for (const auto& b : blocks_) total += b.macs(h, w);
  return total;
}

// --- gen block ---

GenBlock::GenBlock(std::string prefix, int channels)
    : norm_{join(prefix, "bn"), channels}, conv_(conv(join(prefix, "conv"), channels, 2 * channels, 1)) {}

template <typename T>
void GenBlock::declare(ParamStore<T>& store, Rng& rng) const {
  norm_.declare(store, rng);
  conv_.declare(store, rng);
}

template <typename T>
Var GenBlock::forward(Context<T>& ctx, Var x) const {
  auto& g = ctx.graph();
  const Shape s = g.value(x).shape();
  if (s.h % 2 != 0 || s.w % 2 != 0) {
    throw ConfigError("gen block needs even spatial dims, got " + s.str());
  }
  Var y = ops::pool2d(g, x, ops::PoolKind::max, ops::PoolWindowSpec{2, 2});
  y = norm_.forward(ctx, y);
  y = ops::relu(g, y);
  return conv_.forward(ctx, y);
}

std::uint64_t GenBlock::macs(int h, int w) const { return conv_.macs(h / 2, w / 2); }

// --- attention ---

AttentionSqueeze::AttentionSqueeze(std::string prefix, int channels)
    : channels_(channels), dense_{join(prefix, "dense"), channels, channels} {}

template <typename T>
void AttentionSqueeze::declare(ParamStore<T>& store, Rng& rng) const {
  dense_.declare(store, rng);
}

template <typename T>
AttentionSqueeze::Output AttentionSqueeze::forward(Context<T>& ctx, Var fused) const {
  auto& g = ctx.graph();
  const Shape s = g.value(fused).shape();
  if (s.c != channels_) {
    throw ShapeError("attention squeeze built for " + std::to_string(channels_) +
                     " channels given " + s.str());
  }
  const Var pooled = ops::pool2d(g, fused, ops::PoolKind::avg, ops::GlobalPool{});
  const Var logits = dense_.forward(ctx, pooled);
  const Var gates = ops::sigmoid(g, logits);
  return {ops::scale_channels(g, fused, gates), gates};
}

// --- spatial pooling ---

SpatialPoolEnhance::SpatialPoolEnhance(std::string prefix, int channels) : channels_(channels) {
  if (channels % 4 != 0) {
    throw ConfigError("spatial pooling needs channels divisible by 4, got " + std::to_string(channels));
  }
  for (std::size_t i = 0; i < bins.size(); ++i) {
    branches_[i] = conv(join(prefix, "branch" + std::to_string(bins[i]) + "/conv"), channels,
                        channels / 4, 1);
  }
  fuse_ = conv(join(prefix, "fuse/conv"), channels, channels, 1);
}

template <typename T>
void SpatialPoolEnhance::declare(ParamStore<T>& store, Rng& rng) const {
  for (const auto& b : branches_) b.declare(store, rng);
  fuse_.declare(store, rng);
}

template <typename T>
Var SpatialPoolEnhance::forward(Context<T>& ctx, Var x) const {
  auto& g = ctx.graph();
  const Shape s = g.value(x).shape();
  if (s.c != channels_) {
    throw ShapeError("spatial pooling built for " + std::to_string(channels_) +
                     " channels given " + s.str());
  }
  const int largest = bins.back();
  if (s.h % largest != 0 || s.w % largest != 0) {
    throw ConfigError("spatial pooling needs spatial dims divisible by " + std::to_string(largest) +
                      ", got " + s.str());
  }
  std::vector<Var> parts;
  for (std::size_t i = 0; i < bins.size(); ++i) {
    Var b = ops::pool2d(g, x, ops::PoolKind::avg, ops::AdaptiveBins{bins[i]});
    b = branches_[i].forward(ctx, b);
    parts.push_back(ops::bilinear_resize(g, b, s.h, s.w));
  }
  const Var merged = ops::concat_channels<T>(g, parts);
  return ops::add(g, x, fuse_.forward(ctx, merged));
}

std::uint64_t SpatialPoolEnhance::macs(int h, int w) const {
  std::uint64_t total = fuse_.macs(h, w);
  for (std::size_t i = 0; i < bins.size(); ++i) total += branches_[i].macs(bins[i], bins[i]);
  return total;
}

// --- head ---

UpsampleHead::UpsampleHead(std::string prefix, int in_channels, int base_channels, int skip_channels)
    : skip_channels_(skip_channels),
      conv1_(conv(join(prefix, "conv1"), in_channels, 2 * base_channels, 3)),
      norm1_{join(prefix, "bn1"), 2 * base_channels},
      conv2_(conv(join(prefix, "conv2"), 2 * base_channels + skip_channels, base_channels, 3)),
      norm2_{join(prefix, "bn2"), base_channels},
      out_(conv(join(prefix, "out"), base_channels, 1, 1)) {}

template <typename T>
void UpsampleHead::declare(ParamStore<T>& store, Rng& rng) const {
  conv1_.declare(store, rng);
  norm1_.declare(store, rng);
  conv2_.declare(store, rng);
  norm2_.declare(store, rng);
  out_.declare(store, rng);
}

template <typename T>
UpsampleHead::Output UpsampleHead::forward(Context<T>& ctx, Var x, const Var* skip) const {
  auto& g = ctx.graph();
  const Shape s = g.value(x).shape();
  if (s.c != conv1_.in_c) {
    throw ShapeError("upsample head built for " + std::to_string(conv1_.in_c) +
                     " channels given " + s.str());
  }
  Var y = conv1_.forward(ctx, x);
  y = ops::relu(g, norm1_.forward(ctx, y));
  y = ops::bilinear_resize(g, y, 2 * s.h, 2 * s.w);
  if (skip_channels_ > 0) {
    if (skip == nullptr) throw ShapeError("upsample head expects a skip feature");
    const Shape want{s.n, skip_channels_, 2 * s.h, 2 * s.w};
    const Shape got = g.value(*skip).shape();
    if (got != want) {
      throw ShapeError("skip feature " + got.str() + " does not match half resolution " + want.str());
    }
    const std::array<Var, 2> parts{y, *skip};
    y = ops::concat_channels<T>(g, parts);
  } else if (skip != nullptr) {
    throw ShapeError("upsample head built without a skip connection was given one");
  }
  y = conv2_.forward(ctx, y);
  y = ops::relu(g, norm2_.forward(ctx, y));
  y = ops::bilinear_resize(g, y, 4 * s.h, 4 * s.w);
  const Var logits = out_.forward(ctx, y);
  return {logits, ops::sigmoid(g, logits)};
}

std::uint64_t UpsampleHead::macs(int h, int w) const {
  return conv1_.macs(h, w) + conv2_.macs(2 * h, 2 * w) + out_.macs(4 * h, 4 * w);
}

#define MAPNET_INSTANTIATE(T)                                                                     \
  template void ConvLayer::declare(ParamStore<T>&, Rng&) const;                                  \
  template Var ConvLayer::forward(Context<T>&, Var) const;                                       \
  template void BatchNormLayer::declare(ParamStore<T>&, Rng&) const;                             \
  template Var BatchNormLayer::forward(Context<T>&, Var) const;                                  \
  template void DenseLayer::declare(ParamStore<T>&, Rng&) const;                                 \
  template Var DenseLayer::forward(Context<T>&, Var) const;                                      \
  template void DownsampleBlock::declare(ParamStore<T>&, Rng&) const;                            \
  template DownsampleBlock::Output DownsampleBlock::forward(Context<T>&, Var) const;             \
  template void ResidualBlock::declare(ParamStore<T>&, Rng&) const;                              \
  template Var ResidualBlock::forward(Context<T>&, Var) const;                                   \
  template void ConvBlock::declare(ParamStore<T>&, Rng&) const;                                  \
  template Var ConvBlock::forward(Context<T>&, Var) const;                                       \
  template void GenBlock::declare(ParamStore<T>&, Rng&) const;                                   \
  template Var GenBlock::forward(Context<T>&, Var) const;                                        \
  template void AttentionSqueeze::declare(ParamStore<T>&, Rng&) const;                           \
  template AttentionSqueeze::Output AttentionSqueeze::forward(Context<T>&, Var) const;          \
  template void SpatialPoolEnhance::declare(ParamStore<T>&, Rng&) const;                         \
  template Var SpatialPoolEnhance::forward(Context<T>&, Var) const;                              \
  template void UpsampleHead::declare(ParamStore<T>&, Rng&) const;                               \
  template UpsampleHead::Output UpsampleHead::forward(Context<T>&, Var, const Var*) const;

MAPNET_INSTANTIATE(float)
MAPNET_INSTANTIATE(double)

#undef MAPNET_INSTANTIATE

}  // namespace mapnet
