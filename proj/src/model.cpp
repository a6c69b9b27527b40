#include "mapnet/model.hpp"

#include <algorithm>
#include <cmath>

namespace mapnet {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::baseline:
      return "baseline";
    case Variant::plus_c:
      return "plus_c";
    case Variant::plus_s:
      return "plus_s";
    case Variant::full:
      return "full";
    case Variant::full_f:
      return "full_f";
  }
  return "unknown";
}

Variant parse_variant(const std::string& name) {
  for (Variant v : {Variant::baseline, Variant::plus_c, Variant::plus_s, Variant::full, Variant::full_f}) {
    if (to_string(v) == name) return v;
  }
  throw ConfigError("variant must be one of baseline|plus_c|plus_s|full|full_f, got '" + name + "'");
}

std::string to_string(Precision p) { return p == Precision::single ? "single" : "double"; }

Precision parse_precision(const std::string& name) {
  if (name == "single") return Precision::single;
  if (name == "double") return Precision::dbl;
  throw ConfigError("precision must be single or double, got '" + name + "'");
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& rule, int got) {
    throw ConfigError(field + " " + rule + ", got " + std::to_string(got));
  };
  if (n_paths < 2 || n_paths > 4) fail("n_paths", "must lie in [2,4]", n_paths);
  if (n_blocks < ConvBlock::min_blocks || n_blocks > ConvBlock::max_blocks) {
    fail("n_blocks", "must lie in [3,6]", n_blocks);
  }
  if (base_channels < 4 || base_channels % 4 != 0) {
    fail("base_channels", "must be a positive multiple of 4", base_channels);
  }
  const int stride = std::max(16, path_stride(n_paths));
  // Spatial pooling needs the path-1 map divisible by its largest bin.
  const int align = has_spatial_pool() ? std::max(stride, 4 * SpatialPoolEnhance::bins.back()) : stride;
  if (input_h < align || input_h % align != 0) {
    fail("input_h", "must be a positive multiple of " + std::to_string(align), input_h);
  }
  if (input_w < align || input_w % align != 0) {
    fail("input_w", "must be a positive multiple of " + std::to_string(align), input_w);
  }
}

std::vector<ScheduleStep> encoder_schedule(int n_paths) {
  std::vector<ScheduleStep> steps;
  steps.push_back({ScheduleStep::Kind::conv, 1, 1, 1});
  for (int stage = 2; stage <= n_paths; ++stage) {
    steps.push_back({ScheduleStep::Kind::gen, stage, stage, stage - 1});
    for (int path = 1; path <= stage; ++path) {
      steps.push_back({ScheduleStep::Kind::conv, path, stage, path});
    }
  }
  return steps;
}

std::string module_of(const std::string& key) { return key.substr(0, key.find('/')); }

namespace {

std::string conv_prefix(int path, int stage) {
  return "path" + std::to_string(path) + "/stage" + std::to_string(stage);
}

}  // namespace

template <typename T>
Model<T>::Model(ModelConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  schedule_ = encoder_schedule(config_.n_paths);
  const int C = config_.base_channels;
  down_ = std::make_unique<DownsampleBlock>("down", C);
  for (const auto& step : schedule_) {
    if (step.kind == ScheduleStep::Kind::gen) {
      gen_blocks_.emplace(step.path, GenBlock("gen" + std::to_string(step.path),
                                              config_.path_channels(step.source_path)));
    } else {
      conv_blocks_.emplace(std::make_pair(step.path, step.stage),
                           ConvBlock(conv_prefix(step.path, step.stage),
                                     config_.path_channels(step.path), config_.n_blocks));
    }
  }
  const int fused = config_.fused_channels();
  if (config_.has_attention()) attention_.emplace("attn", fused);
  if (config_.has_spatial_pool()) spatial_.emplace("spp", fused);
  head_ = std::make_unique<UpsampleHead>("head", fused, C, config_.has_skip() ? C : 0);

  Rng rng(seed);
  down_->declare(params_, rng);
  for (const auto& step : schedule_) {
    if (step.kind == ScheduleStep::Kind::gen) {
      gen_blocks_.at(step.path).declare(params_, rng);
    } else {
      conv_blocks_.at({step.path, step.stage}).declare(params_, rng);
    }
  }
  if (attention_) attention_->declare(params_, rng);
  if (spatial_) spatial_->declare(params_, rng);
  head_->declare(params_, rng);
}

template <typename T>
typename Model<T>::Output Model<T>::forward(Graph<T>& g, Var images, Mode mode,
                                            const std::map<std::string, Var>& bindings) {
  const Shape s = g.value(images).shape();
  if (s.c != 3 || s.h != config_.input_h || s.w != config_.input_w) {
    throw ShapeError("model expects images (n,3," + std::to_string(config_.input_h) + "," +
                     std::to_string(config_.input_w) + "), got " + s.str());
  }
  Context<T> ctx(g, params_, mode);
  for (const auto& [key, v] : bindings) ctx.bind(key, v);
  Output result;

  DownsampleBlock::Output stem;
  {
    typename Graph<T>::Scope scope(g, "down");
    stem = down_->forward(ctx, images);
  }
  std::map<int, Var> current;
  current[1] = stem.out;
  for (const auto& step : schedule_) {
    if (step.kind == ScheduleStep::Kind::gen) {
      typename Graph<T>::Scope scope(g, "gen" + std::to_string(step.path));
      current[step.path] = gen_blocks_.at(step.path).forward(ctx, current.at(step.source_path));
    } else {
      typename Graph<T>::Scope scope(g, conv_prefix(step.path, step.stage));
      current[step.path] = conv_blocks_.at({step.path, step.stage}).forward(ctx, current.at(step.path));
      result.features[{step.path, step.stage}] = current[step.path];
    }
  }

  Var fused;
  {
    typename Graph<T>::Scope scope(g, "fuse");
    const Shape base = g.value(current.at(1)).shape();
    std::vector<Var> parts{current.at(1)};
    for (int p = 2; p <= config_.n_paths; ++p) {
      parts.push_back(ops::bilinear_resize(g, current.at(p), base.h, base.w));
    }
    fused = ops::concat_channels<T>(g, parts);
  }
  if (attention_) {
    typename Graph<T>::Scope scope(g, "attn");
    fused = attention_->forward(ctx, fused).out;
  }
  if (spatial_) {
    typename Graph<T>::Scope scope(g, "spp");
    fused = spatial_->forward(ctx, fused);
  }
  typename Graph<T>::Scope scope(g, "head");
  const auto head = head_->forward(ctx, fused, config_.has_skip() ? &stem.skip : nullptr);
  result.logits = head.logits;
  result.prob = head.prob;
  return result;
}

template <typename T>
Tensor<T> Model<T>::predict(const Tensor<T>& images) {
  Graph<T> g;
  const Var x = g.input(images);
  const auto out = forward(g, x, Mode::infer);
  return g.value(out.prob);
}

template <typename T>
Accounting Model<T>::count_params() const {
  Accounting acc;
  for (const auto& [key, t] : params_.params()) {
    acc.per_module[module_of(key)] += t.size();
    acc.total += t.size();
  }
  return acc;
}

template <typename T>
Accounting Model<T>::count_macs(int input_h, int input_w) const {
  ModelConfig probe = config_;
  probe.input_h = input_h;
  probe.input_w = input_w;
  probe.validate();

  Accounting acc;
  auto add = [&acc](const std::string& module, std::uint64_t macs) {
    acc.per_module[module] += macs;
    acc.total += macs;
  };
  add("down", down_->macs(input_h, input_w));
  for (const auto& step : schedule_) {
    const int ph = input_h / config_.path_stride(step.path);
    const int pw = input_w / config_.path_stride(step.path);
    if (step.kind == ScheduleStep::Kind::gen) {
      add("gen" + std::to_string(step.path), gen_blocks_.at(step.path).macs(2 * ph, 2 * pw));
    } else {
      add("path" + std::to_string(step.path), conv_blocks_.at({step.path, step.stage}).macs(ph, pw));
    }
  }
  const int h4 = input_h / 4, w4 = input_w / 4;
  if (attention_) add("attn", attention_->macs());
  if (spatial_) add("spp", spatial_->macs(h4, w4));
  add("head", head_->macs(h4, w4));
  acc.per_pixel = static_cast<double>(acc.total) / (static_cast<double>(input_h) * input_w);
  return acc;
}

template <typename T>
std::vector<FeatureImage> Model<T>::export_features(const Tensor<T>& image,
                                                    const std::vector<FeatureSelector>& selectors) {
  for (const auto& sel : selectors) {
    if (sel.path < 1 || sel.path > config_.n_paths || sel.stage < sel.path ||
        sel.stage > config_.n_paths) {
      throw UsageError("feature selector " + std::to_string(sel.path) + ":" +
                       std::to_string(sel.stage) + " outside the topology of " +
                       std::to_string(config_.n_paths) + " paths");
    }
  }
  Graph<T> g;
  const Var x = g.input(image);
  const auto out = forward(g, x, Mode::infer);

  std::vector<FeatureImage> images;
  for (const auto& sel : selectors) {
    const Tensor<T>& act = g.value(out.features.at({sel.path, sel.stage}));
    FeatureImage img;
    img.selector = sel;
    img.height = act.h();
    img.width = act.w();
    img.stride = config_.path_stride(sel.path);
    const std::size_t plane = act.shape().plane();
    std::vector<double> mean(plane, 0.0);
    for (int c = 0; c < act.c(); ++c) {
      const T* p = act.plane(0, c);
      for (std::size_t i = 0; i < plane; ++i) mean[i] += p[i];
    }
    for (double& m : mean) m /= act.c();
    const auto [lo, hi] = std::minmax_element(mean.begin(), mean.end());
    const double range = *hi - *lo;
    img.pixels.assign(plane, 0);
    if (range > 0) {
      for (std::size_t i = 0; i < plane; ++i) {
        img.pixels[i] = static_cast<std::uint8_t>(std::lround((mean[i] - *lo) / range * 255.0));
      }
    }
    images.push_back(std::move(img));
  }
  return images;
}

template class Model<float>;
template class Model<double>;

}  // namespace mapnet
