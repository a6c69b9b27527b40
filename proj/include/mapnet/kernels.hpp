#pragma once

// Forward and backward numeric kernels, parallelised with OpenMP over
// independent output planes. Every output element is produced by exactly
// one thread in a fixed summation order, so results do not depend on the
// thread count. Backward kernels accumulate into the gradient they are
// given.

#include <cstdint>
#include <vector>

#include "mapnet/tensor.hpp"

namespace mapnet::kernels {

// Output dims of a cross-correlation of x with a [out_c, in_c, kh, kw]
// kernel. Uses floor((h + 2 pad - kh) / stride) + 1.
Shape conv2d_output_shape(const Shape& x, const Shape& weight, int stride, int pad);

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                         int stride, int pad);
template <typename T>
void conv2d_backward_input(const Tensor<T>& grad_out, const Tensor<T>& weight, int stride, int pad,
                           Tensor<T>& grad_x);
template <typename T>
void conv2d_backward_weight(const Tensor<T>& grad_out, const Tensor<T>& x, int stride, int pad,
                            Tensor<T>& grad_weight);
template <typename T>
void conv2d_backward_bias(const Tensor<T>& grad_out, Tensor<T>& grad_bias);

// Rectangular pooling window.
struct PoolWindow {
  int kh = 2;
  int kw = 2;
  int sh = 2;
  int sw = 2;
};

Shape pool_output_shape(const Shape& x, const PoolWindow& win);

// argmax receives, per output element, the in-plane linear index of the
// winning input. Ties go to the lowest index.
template <typename T>
Tensor<T> max_pool_forward(const Tensor<T>& x, const PoolWindow& win,
                           std::vector<std::uint32_t>& argmax);
template <typename T>
void max_pool_backward(const Tensor<T>& grad_out, const std::vector<std::uint32_t>& argmax,
                       Tensor<T>& grad_x);
template <typename T>
Tensor<T> avg_pool_forward(const Tensor<T>& x, const PoolWindow& win);
template <typename T>
void avg_pool_backward(const Tensor<T>& grad_out, const PoolWindow& win, Tensor<T>& grad_x);

// Half-pixel-centre bilinear sampling with border clamping.
template <typename T>
Tensor<T> bilinear_forward(const Tensor<T>& x, int out_h, int out_w);
template <typename T>
void bilinear_backward(const Tensor<T>& grad_out, Tensor<T>& grad_x);

// Per-channel statistics saved by the training-mode forward pass.
template <typename T>
struct BatchNormSaved {
  Tensor<T> xhat;
  std::vector<T> mean;
  std::vector<T> var;
  std::vector<T> invstd;
};

template <typename T>
Tensor<T> batch_norm_train_forward(const Tensor<T>& x, const Tensor<T>& gamma,
                                   const Tensor<T>& beta, T eps, BatchNormSaved<T>& saved);
// Uses fixed statistics; saved.xhat/invstd are filled for the backward pass.
template <typename T>
Tensor<T> batch_norm_infer_forward(const Tensor<T>& x, const Tensor<T>& gamma,
                                   const Tensor<T>& beta, const Tensor<T>& running_mean,
                                   const Tensor<T>& running_var, T eps, BatchNormSaved<T>& saved);
// batch_stats selects the training-mode gradient (statistics depend on x).
template <typename T>
void batch_norm_backward(const Tensor<T>& grad_out, const Tensor<T>& gamma,
                         const BatchNormSaved<T>& saved, bool batch_stats, Tensor<T>* grad_x,
                         Tensor<T>* grad_gamma, Tensor<T>* grad_beta);

template <typename T>
T sigmoid_scalar(T z);

}  // namespace mapnet::kernels
