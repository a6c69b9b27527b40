#pragma once

// Serial direct-summation kernels. They mirror the signatures in
// kernels.hpp and exist so the parallel versions have something simple to
// be checked and benchmarked against.

#include "mapnet/kernels.hpp"

namespace mapnet::reference {

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                         int stride, int pad);
template <typename T>
Tensor<T> conv2d_backward_input(const Tensor<T>& grad_out, const Tensor<T>& weight,
                                const Shape& x_shape, int stride, int pad);
template <typename T>
Tensor<T> conv2d_backward_weight(const Tensor<T>& grad_out, const Tensor<T>& x,
                                 const Shape& w_shape, int stride, int pad);

template <typename T>
Tensor<T> max_pool_forward(const Tensor<T>& x, const kernels::PoolWindow& win);
template <typename T>
Tensor<T> avg_pool_forward(const Tensor<T>& x, const kernels::PoolWindow& win);
template <typename T>
Tensor<T> bilinear_forward(const Tensor<T>& x, int out_h, int out_w);
template <typename T>
Tensor<T> batch_norm_train_forward(const Tensor<T>& x, const Tensor<T>& gamma,
                                   const Tensor<T>& beta, T eps);

}  // namespace mapnet::reference
