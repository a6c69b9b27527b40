#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "mapnet/tensor.hpp"

namespace mapnet {

template <typename T>
using TensorMap = std::map<std::string, Tensor<T>>;

template <typename T>
struct AdamState {
  TensorMap<T> m;
  TensorMap<T> v;
  std::uint64_t t = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  // Zero moments for every key of params.
  static AdamState zeros_like(const TensorMap<T>& params, double lr = 1e-3);
};

// One bias-corrected Adam update of every parameter. Moments missing from
// state are created as zeros; a parameter without a gradient is a usage
// error.
template <typename T>
void adam_step(TensorMap<T>& params, const TensorMap<T>& grads, AdamState<T>& state);

}  // namespace mapnet
