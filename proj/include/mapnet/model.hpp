#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mapnet/blocks.hpp"

namespace mapnet {

// Ablation variants: encoder only, +channel attention, +spatial pooling,
// both, and both plus a half-resolution skip into the decoder.
enum class Variant { baseline, plus_c, plus_s, full, full_f };

std::string to_string(Variant v);
Variant parse_variant(const std::string& name);
std::string to_string(Precision p);
Precision parse_precision(const std::string& name);

struct ModelConfig {
  int n_paths = 3;
  int n_blocks = 4;
  int base_channels = 64;
  Variant variant = Variant::full;
  int input_h = 512;
  int input_w = 512;
  Precision precision = Precision::single;

  // Throws ConfigError naming the offending field.
  void validate() const;

  [[nodiscard]] int path_channels(int path) const { return base_channels << (path - 1); }
  // Downsampling factor of a path relative to the input image.
  [[nodiscard]] int path_stride(int path) const { return 4 << (path - 1); }
  [[nodiscard]] int fused_channels() const { return base_channels * ((1 << n_paths) - 1); }
  [[nodiscard]] bool has_attention() const {
    return variant == Variant::plus_c || variant == Variant::full || variant == Variant::full_f;
  }
  [[nodiscard]] bool has_spatial_pool() const {
    return variant == Variant::plus_s || variant == Variant::full || variant == Variant::full_f;
  }
  [[nodiscard]] bool has_skip() const { return variant == Variant::full_f; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// One step of the encoder schedule. A gen step spawns `path` from
// `source_path`; a conv step advances `path` by one conv block.
struct ScheduleStep {
  enum class Kind { gen, conv };
  Kind kind;
  int path;
  int stage;
  int source_path;
};

std::vector<ScheduleStep> encoder_schedule(int n_paths);

struct FeatureSelector {
  int path = 1;
  int stage = 1;
};

struct FeatureImage {
  FeatureSelector selector;
  int height = 0;
  int width = 0;
  int stride = 0;  // input pixels per feature pixel
  std::vector<std::uint8_t> pixels;
};

struct Accounting {
  std::uint64_t total = 0;
  std::map<std::string, std::uint64_t> per_module;
  double per_pixel = 0.0;  // MACs only
};

template <typename T>
class Model {
 public:
  Model(ModelConfig config, std::uint64_t seed);

  struct Output {
    Var logits;
    Var prob;
    // Activation of every path at the end of every stage, keyed (path, stage).
    std::map<std::pair<int, int>, Var> features;
  };

  // Records the full network onto g. images: (n, 3, H, W) at the configured
  // size. Keys in `bindings` use the given variables instead of fresh leaves.
  Output forward(Graph<T>& g, Var images, Mode mode, const std::map<std::string, Var>& bindings = {});

  // Infer-mode probabilities without gradients.
  Tensor<T> predict(const Tensor<T>& images);

  [[nodiscard]] Accounting count_params() const;
  [[nodiscard]] Accounting count_macs(int input_h, int input_w) const;

  std::vector<FeatureImage> export_features(const Tensor<T>& image,
                                            const std::vector<FeatureSelector>& selectors);

  [[nodiscard]] const ModelConfig& config() const { return config_; }
  [[nodiscard]] ParamStore<T>& params() { return params_; }
  [[nodiscard]] const ParamStore<T>& params() const { return params_; }
  [[nodiscard]] const std::vector<ScheduleStep>& schedule() const { return schedule_; }

 private:
  ModelConfig config_;
  std::vector<ScheduleStep> schedule_;
  ParamStore<T> params_;
  std::unique_ptr<DownsampleBlock> down_;
  std::map<std::pair<int, int>, ConvBlock> conv_blocks_;
  std::map<int, GenBlock> gen_blocks_;
  std::optional<AttentionSqueeze> attention_;
  std::optional<SpatialPoolEnhance> spatial_;
  std::unique_ptr<UpsampleHead> head_;
};

// Top-level module of a parameter key ("path2/stage3/..." -> "path2").
std::string module_of(const std::string& key);

}  // namespace mapnet
