#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mapnet/graph.hpp"
#include "mapnet/ops.hpp"
#include "mapnet/rng.hpp"

namespace mapnet {

enum class Init { he_normal, zeros, ones };

// Named trainable tensors plus non-trainable buffers (batch-norm running
// statistics), keyed by hierarchical path strings such as
// "path1/stage2/res3/conv2/weight".
template <typename T>
class ParamStore {
 public:
  // He-normal draws use std = sqrt(2 / fan_in) with fan_in = c*h*w of the
  // shape, consumed from rng in declaration order.
  Tensor<T>& add_param(const std::string& key, Shape shape, Init init, Rng& rng);
  Tensor<T>& add_buffer(const std::string& key, Shape shape, T fill);

  [[nodiscard]] bool has_param(const std::string& key) const { return params_.contains(key); }
  [[nodiscard]] bool has_buffer(const std::string& key) const { return buffers_.contains(key); }
  Tensor<T>& param(const std::string& key);
  const Tensor<T>& param(const std::string& key) const;
  Tensor<T>& buffer(const std::string& key);
  const Tensor<T>& buffer(const std::string& key) const;

  [[nodiscard]] const std::map<std::string, Tensor<T>>& params() const { return params_; }
  [[nodiscard]] std::map<std::string, Tensor<T>>& params() { return params_; }
  [[nodiscard]] const std::map<std::string, Tensor<T>>& buffers() const { return buffers_; }
  [[nodiscard]] std::map<std::string, Tensor<T>>& buffers() { return buffers_; }

  // Trainable scalars whose key starts with prefix (all when empty).
  [[nodiscard]] std::size_t count(std::string_view prefix = {}) const;

  // Sets every parameter whose key contains `fragment` to value.
  void fill_matching(std::string_view fragment, T value);

 private:
  std::map<std::string, Tensor<T>> params_;
  std::map<std::string, Tensor<T>> buffers_;
};

// Per-forward binding of a ParamStore onto a Graph. Each parameter becomes a
// graph leaf the first time a block asks for it.
template <typename T>
class Context {
 public:
  Context(Graph<T>& graph, ParamStore<T>& store, Mode mode) : graph_(graph), store_(store), mode_(mode) {}

  Var param(const std::string& key) {
    auto it = bound_.find(key);
    if (it != bound_.end()) return it->second;
    const Var v = graph_.parameter(key, store_.param(key));
    bound_.emplace(key, v);
    return v;
  }
  Tensor<T>& buffer(const std::string& key) { return store_.buffer(key); }

  // Routes a parameter key to an existing graph variable instead of a fresh
  // leaf; used to differentiate with respect to externally owned tensors.
  void bind(const std::string& key, Var v) {
    if (!store_.has_param(key)) throw UsageError("bind: unknown parameter '" + key + "'");
    bound_[key] = v;
  }

  [[nodiscard]] Graph<T>& graph() { return graph_; }
  [[nodiscard]] ParamStore<T>& store() { return store_; }
  [[nodiscard]] Mode mode() const { return mode_; }
  [[nodiscard]] const ops::BatchNormOptions& bn_options() const { return bn_; }

 private:
  Graph<T>& graph_;
  ParamStore<T>& store_;
  Mode mode_;
  ops::BatchNormOptions bn_;
  std::map<std::string, Var> bound_;
};

}  // namespace mapnet
