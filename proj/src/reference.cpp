#include "mapnet/reference.hpp"

#include <algorithm>
#include <cmath>

namespace mapnet::reference {

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                         int stride, int pad) {
  const Shape os = kernels::conv2d_output_shape(x.shape(), weight.shape(), stride, pad);
  Tensor<T> y(os);
  for (int n = 0; n < os.n; ++n)
    for (int oc = 0; oc < os.c; ++oc)
      for (int oy = 0; oy < os.h; ++oy)
        for (int ox = 0; ox < os.w; ++ox) {
          T acc = bias[oc];
          for (int ic = 0; ic < x.c(); ++ic)
            for (int ky = 0; ky < weight.h(); ++ky)
              for (int kx = 0; kx < weight.w(); ++kx) {
                const int iy = oy * stride + ky - pad;
                const int ix = ox * stride + kx - pad;
                if (iy < 0 || iy >= x.h() || ix < 0 || ix >= x.w()) continue;
                acc += weight(oc, ic, ky, kx) * x(n, ic, iy, ix);
              }
          y(n, oc, oy, ox) = acc;
        }
  return y;
}

template <typename T>
Tensor<T> conv2d_backward_input(const Tensor<T>& grad_out, const Tensor<T>& weight,
                                const Shape& x_shape, int stride, int pad) {
  Tensor<T> gx(x_shape);
  for (int n = 0; n < grad_out.n(); ++n)
    for (int oc = 0; oc < grad_out.c(); ++oc)
      for (int oy = 0; oy < grad_out.h(); ++oy)
        for (int ox = 0; ox < grad_out.w(); ++ox)
          for (int ic = 0; ic < x_shape.c; ++ic)
            for (int ky = 0; ky < weight.h(); ++ky)
              for (int kx = 0; kx < weight.w(); ++kx) {
                const int iy = oy * stride + ky - pad;
                const int ix = ox * stride + kx - pad;
                if (iy < 0 || iy >= x_shape.h || ix < 0 || ix >= x_shape.w) continue;
                gx(n, ic, iy, ix) += weight(oc, ic, ky, kx) * grad_out(n, oc, oy, ox);
              }
  return gx;
}

template <typename T>
Tensor<T> conv2d_backward_weight(const Tensor<T>& grad_out, const Tensor<T>& x,
                                 const Shape& w_shape, int stride, int pad) {
  Tensor<T> gw(w_shape);
  for (int n = 0; n < grad_out.n(); ++n)
    for (int oc = 0; oc < grad_out.c(); ++oc)
      for (int oy = 0; oy < grad_out.h(); ++oy)
        for (int ox = 0; ox < grad_out.w(); ++ox)
          for (int ic = 0; ic < x.c(); ++ic)
            for (int ky = 0; ky < w_shape.h; ++ky)
              for (int kx = 0; kx < w_shape.w; ++kx) {
                const int iy = oy * stride + ky - pad;
                const int ix = ox * stride + kx - pad;
                if (iy < 0 || iy >= x.h() || ix < 0 || ix >= x.w()) continue;
                gw(oc, ic, ky, kx) += grad_out(n, oc, oy, ox) * x(n, ic, iy, ix);
              }
  return gw;
}

template <typename T>
Tensor<T> max_pool_forward(const Tensor<T>& x, const kernels::PoolWindow& win) {
  const Shape os = kernels::pool_output_shape(x.shape(), win);
  Tensor<T> y(os);
  for (int n = 0; n < os.n; ++n)
    for (int c = 0; c < os.c; ++c)
      for (int oy = 0; oy < os.h; ++oy)
        for (int ox = 0; ox < os.w; ++ox) {
          T best = x(n, c, oy * win.sh, ox * win.sw);
          for (int ky = 0; ky < win.kh; ++ky)
            for (int kx = 0; kx < win.kw; ++kx)
              best = std::max(best, x(n, c, oy * win.sh + ky, ox * win.sw + kx));
          y(n, c, oy, ox) = best;
        }
  return y;
}

template <typename T>
Tensor<T> avg_pool_forward(const Tensor<T>& x, const kernels::PoolWindow& win) {
  const Shape os = kernels::pool_output_shape(x.shape(), win);
  Tensor<T> y(os);
  for (int n = 0; n < os.n; ++n)
    for (int c = 0; c < os.c; ++c)
      for (int oy = 0; oy < os.h; ++oy)
        for (int ox = 0; ox < os.w; ++ox) {
          T acc = 0;
          for (int ky = 0; ky < win.kh; ++ky)
            for (int kx = 0; kx < win.kw; ++kx) acc += x(n, c, oy * win.sh + ky, ox * win.sw + kx);
          y(n, c, oy, ox) = acc / static_cast<T>(win.kh * win.kw);
        }
  return y;
}

namespace {

// Source coordinate and neighbour weights for one output position.
void sample_axis(int dst, int in, int out, int& i0, int& i1, double& frac) {
  double src = (dst + 0.5) * static_cast<double>(in) / out - 0.5;
  src = std::clamp(src, 0.0, static_cast<double>(in - 1));
  i0 = static_cast<int>(std::floor(src));
  i1 = std::min(i0 + 1, in - 1);
  frac = src - i0;
}

}  // namespace

template <typename T>
Tensor<T> bilinear_forward(const Tensor<T>& x, int out_h, int out_w) {
  Tensor<T> y({x.n(), x.c(), out_h, out_w});
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c)
      for (int oy = 0; oy < out_h; ++oy)
        for (int ox = 0; ox < out_w; ++ox) {
          int y0, y1, x0, x1;
          double fy, fx;
          sample_axis(oy, x.h(), out_h, y0, y1, fy);
          sample_axis(ox, x.w(), out_w, x0, x1, fx);
          const double v = (1 - fy) * (1 - fx) * x(n, c, y0, x0) + (1 - fy) * fx * x(n, c, y0, x1) +
                           fy * (1 - fx) * x(n, c, y1, x0) + fy * fx * x(n, c, y1, x1);
          y(n, c, oy, ox) = static_cast<T>(v);
        }
  return y;
}

template <typename T>
Tensor<T> batch_norm_train_forward(const Tensor<T>& x, const Tensor<T>& gamma,
                                   const Tensor<T>& beta, T eps) {
  Tensor<T> y(x.shape());
  const double m = static_cast<double>(x.n()) * x.h() * x.w();
  for (int c = 0; c < x.c(); ++c) {
    double mean = 0;
    for (int n = 0; n < x.n(); ++n)
      for (int i = 0; i < x.h(); ++i)
        for (int j = 0; j < x.w(); ++j) mean += x(n, c, i, j);
    mean /= m;
    double var = 0;
    for (int n = 0; n < x.n(); ++n)
      for (int i = 0; i < x.h(); ++i)
        for (int j = 0; j < x.w(); ++j) var += (x(n, c, i, j) - mean) * (x(n, c, i, j) - mean);
    var /= m;
    for (int n = 0; n < x.n(); ++n)
      for (int i = 0; i < x.h(); ++i)
        for (int j = 0; j < x.w(); ++j)
          y(n, c, i, j) = static_cast<T>(gamma[c] * (x(n, c, i, j) - mean) / std::sqrt(var + eps) +
                                         beta[c]);
  }
  return y;
}

#define MAPNET_INSTANTIATE(T)                                                                     \
  template Tensor<T> conv2d_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int,   \
                                    int);                                                         \
  template Tensor<T> conv2d_backward_input(const Tensor<T>&, const Tensor<T>&, const Shape&, int, \
                                           int);                                                  \
  template Tensor<T> conv2d_backward_weight(const Tensor<T>&, const Tensor<T>&, const Shape&,     \
                                            int, int);                                            \
  template Tensor<T> max_pool_forward(const Tensor<T>&, const kernels::PoolWindow&);              \
  template Tensor<T> avg_pool_forward(const Tensor<T>&, const kernels::PoolWindow&);              \
  template Tensor<T> bilinear_forward(const Tensor<T>&, int, int);                                \
  template Tensor<T> batch_norm_train_forward(const Tensor<T>&, const Tensor<T>&,                 \
                                              const Tensor<T>&, T);

MAPNET_INSTANTIATE(float)
MAPNET_INSTANTIATE(double)

#undef MAPNET_INSTANTIATE

}  // namespace mapnet::reference
