#pragma once

// Building blocks of the multi-path encoder and its decoder. Each block
// owns a key prefix in a ParamStore, declares its tensors once, and records
// its forward computation onto a Graph through a Context.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mapnet/params.hpp"

namespace mapnet {

// Convolution with bias; 3x3 kernels use padding 1, 1x1 kernels padding 0
// unless overridden.
struct ConvLayer {
  std::string prefix;
  int in_c = 0;
  int out_c = 0;
  int kernel = 1;
  int stride = 1;
  int pad = 0;

  template <typename T>
  void declare(ParamStore<T>& store, Rng& rng) const;
  template <typename T>
  Var forward(Context<T>& ctx, Var x) const;

  [[nodiscard]] int out_extent(int extent) const { return (extent + 2 * pad - kernel) / stride + 1; }
  [[nodiscard]] std::uint64_t macs(int h, int w) const;
};

struct BatchNormLayer {
  std::string prefix;
  int channels = 0;

  template <typename T>
  void declare(ParamStore<T>& store, Rng& rng) const;
  template <typename T>
  Var forward(Context<T>& ctx, Var x) const;
};

struct DenseLayer {
  std::string prefix;
  int in = 0;
  int out = 0;

  template <typename T>
  void declare(ParamStore<T>& store, Rng& rng) const;
  template <typename T>
  Var forward(Context<T>& ctx, Var v) const;
  [[nodiscard]] std::uint64_t macs() const { return static_cast<std::uint64_t>(in) * out; }
};

// 3x3 stride-2 conv, two 3x3 convs (each with BN and ReLU), then 2x2 max
// pool: (n,3,H,W) -> (n,C,H/4,W/4). Channel progression 3 -> C/2 -> C -> C.
class DownsampleBlock {
 public:
  DownsampleBlock(std::string prefix, int channels);

  template <typename T>
  void declare(ParamStore<T>& store, Rng& rng) const;

  // skip is the half-resolution activation before pooling.
  struct Output {
    Var out;
    Var skip;
  };
  template <typename T>
  Output forward(Context<T>& ctx, Var image) const;

  [[nodiscard]] std::uint64_t macs(int h, int w) const;
  [[nodiscard]] int channels() const { return channels_; }

 private:
  std::string prefix_;
  int channels_;
  std::array<ConvLayer, 3> convs_;
  std::array<BatchNormLayer, 3> norms_;
};

// Pre-activation bottleneck residual unit, bottleneck factor 4:
// x + [BN ReLU 1x1 c->c/4][BN ReLU 3x3][BN ReLU 3x3][BN ReLU 1x1 c/4->c](x).
class ResidualBlock {
 public:
  static constexpr int bottleneck = 4;

  ResidualBlock(std::string prefix, int channels);

  template <typename T>
  void declare(ParamStore<T>& store, Rng& rng) const;
  template <typename T>
  Var forward(Context<T>& ctx, Var x) const;

  [[nodiscard]] std::uint64_t macs(int h, int w) const;

 private:
  std::array<BatchNormLayer, 4> norms_;
  std::array<ConvLayer, 4> convs_;
};

// n_blocks residual blocks in series.
class ConvBlock {
 public:
  static constexpr int min_blocks = 3;
  static constexpr int max_blocks = 6;

  ConvBlock(std::string prefix, int channels, int n_blocks);

  template <typename T>
  void declare(ParamStore<T>& store, Rng& rng) const;
  template <typename T>
  Var forward(Context<T>& ctx, Var x) const;

  [[nodiscard]] std::uint64_t macs(int h, int w) const;
  [[nodiscard]] const std::string& prefix() const { return prefix_; }

 private:
  std::string prefix_;
  std::vector<ResidualBlock> blocks_;
};

// Spawns a new path: 2x2 max pool, then BN ReLU 1x1 conv c -> 2c.
class GenBlock {
 public:
  GenBlock(std::string prefix, int channels);

  template <typename T>
  void declare(ParamStore<T>& store, Rng& rng) const;
  template <typename T>
  Var forward(Context<T>& ctx, Var x) const;

  [[nodiscard]] std::uint64_t macs(int h, int w) const;

 private:
  BatchNormLayer norm_;
  ConvLayer conv_;
};

// Channel attention: global average pool, channels x channels dense layer,
// sigmoid, per-channel rescale of the input.
class AttentionSqueeze {
 public:
  AttentionSqueeze(std::string prefix, int channels);

  template <typename T>
  void declare(ParamStore<T>& store, Rng& rng) const;

  struct Output {
    Var out;
    Var gates;  // (n, channels, 1, 1)
  };
  template <typename T>
  Output forward(Context<T>& ctx, Var fused) const;

  [[nodiscard]] std::uint64_t macs() const { return dense_.macs(); }

 private:
  int channels_;
  DenseLayer dense_;
};

// Pyramid pooling: per bin size b, adaptive average pool to b x b, 1x1 conv
// to channels/4, bilinear resize back; concatenate, 1x1 fuse conv, and add
// to the input pixel-wise.
class SpatialPoolEnhance {
 public:
  static constexpr std::array<int, 4> bins{1, 2, 4, 8};

  SpatialPoolEnhance(std::string prefix, int channels);

  template <typename T>
  void declare(ParamStore<T>& store, Rng& rng) const;
  template <typename T>
  Var forward(Context<T>& ctx, Var x) const;

  [[nodiscard]] std::uint64_t macs(int h, int w) const;

 private:
  int channels_;
  std::array<ConvLayer, 4> branches_;
  ConvLayer fuse_;
};

// Decoder: 3x3 conv in -> 2C, BN ReLU, bilinear x2, optional concat of a
// C-channel half-resolution skip, 3x3 conv -> C, BN ReLU, bilinear x2,
// 1x1 conv C -> 1. Returns logits; probabilities are sigmoid(logits).
class UpsampleHead {
 public:
  UpsampleHead(std::string prefix, int in_channels, int base_channels, int skip_channels);

  template <typename T>
  void declare(ParamStore<T>& store, Rng& rng) const;

  struct Output {
    Var logits;
    Var prob;
  };
  template <typename T>
  Output forward(Context<T>& ctx, Var x, const Var* skip) const;

  [[nodiscard]] std::uint64_t macs(int h, int w) const;
  [[nodiscard]] int skip_channels() const { return skip_channels_; }

 private:
  int skip_channels_;
  ConvLayer conv1_;
  BatchNormLayer norm1_;
  ConvLayer conv2_;
  BatchNormLayer norm2_;
  ConvLayer out_;
};

}  // namespace mapnet
