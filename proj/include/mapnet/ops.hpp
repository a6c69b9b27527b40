#pragma once

// Differentiable operations recorded onto a Graph. Each op checks its
// shape contract, runs the forward kernel, and registers the matching
// backward kernel.

#include <span>
#include <variant>

#include "mapnet/graph.hpp"
#include "mapnet/kernels.hpp"

namespace mapnet {

enum class Mode { train, infer };

}  // namespace mapnet

namespace mapnet::ops {

template <typename T>
Var conv2d(Graph<T>& g, Var x, Var weight, Var bias, int stride, int pad);

enum class PoolKind { max, avg };

struct PoolWindowSpec {
  int k = 2;
  int stride = 2;
};
struct AdaptiveBins {
  int bins = 1;
};
struct GlobalPool {};
using PoolSpec = std::variant<PoolWindowSpec, AdaptiveBins, GlobalPool>;

template <typename T>
Var pool2d(Graph<T>& g, Var x, PoolKind kind, const PoolSpec& spec);

template <typename T>
Var bilinear_resize(Graph<T>& g, Var x, int out_h, int out_w);

struct BatchNormOptions {
  double momentum = 0.9;
  double epsilon = 1e-5;
};

// Running statistics are read in infer mode and updated in train mode as
// running = momentum * running + (1 - momentum) * batch (biased variance).
template <typename T>
Var batch_norm(Graph<T>& g, Var x, Var gamma, Var beta, Tensor<T>& running_mean,
               Tensor<T>& running_var, Mode mode, const BatchNormOptions& options = {});

enum class Activation { relu, sigmoid };

template <typename T>
Var activation(Graph<T>& g, Var x, Activation kind);
template <typename T>
Var relu(Graph<T>& g, Var x) {
  return activation(g, x, Activation::relu);
}
template <typename T>
Var sigmoid(Graph<T>& g, Var x) {
  return activation(g, x, Activation::sigmoid);
}

// v: (n, k, 1, 1); weight: (k_out, k, 1, 1); bias: (k_out, 1, 1, 1).
template <typename T>
Var dense(Graph<T>& g, Var v, Var weight, Var bias);

template <typename T>
Var concat_channels(Graph<T>& g, std::span<const Var> xs);
template <typename T>
Var add(Graph<T>& g, Var x, Var y);
// gates: (n, c, 1, 1), one gate per channel per batch item.
template <typename T>
Var scale_channels(Graph<T>& g, Var x, Var gates);

// Scalar reductions.
template <typename T>
Var sum(Graph<T>& g, Var x);
template <typename T>
Var mean(Graph<T>& g, Var x);
// sum_i weights[i] * x[i]; weights are constants.
template <typename T>
Var weighted_sum(Graph<T>& g, Var x, const Tensor<T>& weights);

}  // namespace mapnet::ops
