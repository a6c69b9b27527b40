#include "mapnet/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mapnet::kernels {

namespace {

// Range [lo, hi] of output positions o for which o*stride + tap - pad lands
// inside [0, extent). Empty when hi < lo.
struct TapRange {
  int lo;
  int hi;
};

TapRange tap_range(int tap, int pad, int stride, int extent, int out_extent) {
  const int shift = tap - pad;
  int lo = 0;
  if (shift < 0) lo = (-shift + stride - 1) / stride;
  const int last = extent - 1 - shift;
  int hi = last < 0 ? -1 : last / stride;
  hi = std::min(hi, out_extent - 1);
  return {lo, hi};
}

struct LerpTable {
  std::vector<int> i0;
  std::vector<int> i1;
  std::vector<double> frac;
};

LerpTable lerp_table(int in, int out) {
  LerpTable t;
  t.i0.resize(out);
  t.i1.resize(out);
  t.frac.resize(out);
  const double scale = static_cast<double>(in) / out;
  for (int d = 0; d < out; ++d) {
    double src = (d + 0.5) * scale - 0.5;
    if (src < 0.0) src = 0.0;
    int i0 = static_cast<int>(std::floor(src));
    if (i0 >= in - 1) {
      t.i0[d] = in - 1;
      t.i1[d] = in - 1;
      t.frac[d] = 0.0;
    } else {
      t.i0[d] = i0;
      t.i1[d] = i0 + 1;
      t.frac[d] = src - i0;
    }
  }
  return t;
}

}  // namespace

Shape conv2d_output_shape(const Shape& x, const Shape& weight, int stride, int pad) {
  if (stride < 1) throw ConfigError("conv2d stride must be positive, got " + std::to_string(stride));
  if (pad < 0) throw ConfigError("conv2d padding must be non-negative, got " + std::to_string(pad));
  if (x.c != weight.c) {
    throw ShapeError("conv2d input " + x.str() + " has " + std::to_string(x.c) +
                     " channels but kernel " + weight.str() + " expects " + std::to_string(weight.c));
  }
  const int span_h = x.h + 2 * pad - weight.h;
  const int span_w = x.w + 2 * pad - weight.w;
  if (span_h < 0 || span_w < 0) {
    throw ShapeError("conv2d kernel " + weight.str() + " larger than padded input " + x.str());
  }
  return {x.n, weight.n, span_h / stride + 1, span_w / stride + 1};
}

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                         int stride, int pad) {
  const Shape os = conv2d_output_shape(x.shape(), weight.shape(), stride, pad);
  if (bias.size() != static_cast<std::size_t>(weight.n())) {
    throw ShapeError("conv2d bias has " + std::to_string(bias.size()) + " elements, kernel " +
                     weight.shape().str() + " needs " + std::to_string(weight.n()));
  }
  Tensor<T> y(os);
  const int C = x.c(), H = x.h(), W = x.w();
  const int KH = weight.h(), KW = weight.w();
  const int OC = os.c, OH = os.h, OW = os.w;
  const long long total = static_cast<long long>(os.n) * OC;

#pragma omp parallel for schedule(static)
  for (long long idx = 0; idx < total; ++idx) {
    const int n = static_cast<int>(idx / OC);
    const int oc = static_cast<int>(idx % OC);
    T* out = y.plane(n, oc);
    std::fill(out, out + static_cast<std::size_t>(OH) * OW, bias[oc]);
    for (int ic = 0; ic < C; ++ic) {
      const T* in = x.plane(n, ic);
      const T* wk = &weight(oc, ic, 0, 0);
      for (int ky = 0; ky < KH; ++ky) {
        const TapRange ry = tap_range(ky, pad, stride, H, OH);
        for (int kx = 0; kx < KW; ++kx) {
          const TapRange rx = tap_range(kx, pad, stride, W, OW);
          const T wv = wk[ky * KW + kx];
          for (int oy = ry.lo; oy <= ry.hi; ++oy) {
            const T* in_row = in + static_cast<std::size_t>(oy * stride + ky - pad) * W;
            T* out_row = out + static_cast<std::size_t>(oy) * OW;
            if (stride == 1) {
              const T* src = in_row + (kx - pad);
#pragma omp simd
              for (int ox = rx.lo; ox <= rx.hi; ++ox) out_row[ox] += wv * src[ox];
            } else {
              for (int ox = rx.lo; ox <= rx.hi; ++ox) {
                out_row[ox] += wv * in_row[ox * stride + kx - pad];
              }
            }
          }
        }
      }
    }
  }
  return y;
}

template <typename T>
void conv2d_backward_input(const Tensor<T>& grad_out, const Tensor<T>& weight, int stride, int pad,
                           Tensor<T>& grad_x) {
  const int C = grad_x.c(), H = grad_x.h(), W = grad_x.w();
  const int KH = weight.h(), KW = weight.w();
  const int OC = grad_out.c(), OH = grad_out.h(), OW = grad_out.w();
  const long long total = static_cast<long long>(grad_x.n()) * C;

#pragma omp parallel for schedule(static)
  for (long long idx = 0; idx < total; ++idx) {
    const int n = static_cast<int>(idx / C);
    const int ic = static_cast<int>(idx % C);
    T* gin = grad_x.plane(n, ic);
    for (int oc = 0; oc < OC; ++oc) {
      const T* gout = grad_out.plane(n, oc);
      const T* wk = &weight(oc, ic, 0, 0);
      for (int ky = 0; ky < KH; ++ky) {
        const TapRange ry = tap_range(ky, pad, stride, H, OH);
        for (int kx = 0; kx < KW; ++kx) {
          const TapRange rx = tap_range(kx, pad, stride, W, OW);
          const T wv = wk[ky * KW + kx];
          for (int oy = ry.lo; oy <= ry.hi; ++oy) {
            T* gin_row = gin + static_cast<std::size_t>(oy * stride + ky - pad) * W;
            const T* gout_row = gout + static_cast<std::size_t>(oy) * OW;
            if (stride == 1) {
              T* dst = gin_row + (kx - pad);
#pragma omp simd
              for (int ox = rx.lo; ox <= rx.hi; ++ox) dst[ox] += wv * gout_row[ox];
            } else {
              for (int ox = rx.lo; ox <= rx.hi; ++ox) {
                gin_row[ox * stride + kx - pad] += wv * gout_row[ox];
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward_weight(const Tensor<T>& grad_out, const Tensor<T>& x, int stride, int pad,
                            Tensor<T>& grad_weight) {
  const int N = x.n(), C = x.c(), H = x.h(), W = x.w();
  const int KH = grad_weight.h(), KW = grad_weight.w();
  const int OC = grad_out.c(), OH = grad_out.h(), OW = grad_out.w();
  const long long total = static_cast<long long>(OC) * C;

#pragma omp parallel for schedule(static)
  for (long long idx = 0; idx < total; ++idx) {
    const int oc = static_cast<int>(idx / C);
    const int ic = static_cast<int>(idx % C);
    T* gw = &grad_weight(oc, ic, 0, 0);
    for (int ky = 0; ky < KH; ++ky) {
      const TapRange ry = tap_range(ky, pad, stride, H, OH);
      for (int kx = 0; kx < KW; ++kx) {
        const TapRange rx = tap_range(kx, pad, stride, W, OW);
        T acc = 0;
        for (int n = 0; n < N; ++n) {
          const T* in = x.plane(n, ic);
          const T* gout = grad_out.plane(n, oc);
          for (int oy = ry.lo; oy <= ry.hi; ++oy) {
            const T* in_row = in + static_cast<std::size_t>(oy * stride + ky - pad) * W;
            const T* gout_row = gout + static_cast<std::size_t>(oy) * OW;
            if (stride == 1) {
              const T* src = in_row + (kx - pad);
#pragma omp simd reduction(+ : acc)
              for (int ox = rx.lo; ox <= rx.hi; ++ox) acc += gout_row[ox] * src[ox];
            } else {
              for (int ox = rx.lo; ox <= rx.hi; ++ox) {
                acc += gout_row[ox] * in_row[ox * stride + kx - pad];
              }
            }
          }
        }
        gw[ky * KW + kx] += acc;
      }
    }
  }
}

template <typename T>
void conv2d_backward_bias(const Tensor<T>& grad_out, Tensor<T>& grad_bias) {
  const int N = grad_out.n(), OC = grad_out.c();
  const std::size_t plane = grad_out.shape().plane();
#pragma omp parallel for schedule(static)
  for (int oc = 0; oc < OC; ++oc) {
    T acc = 0;
    for (int n = 0; n < N; ++n) {
      const T* g = grad_out.plane(n, oc);
#pragma omp simd reduction(+ : acc)
      for (std::size_t i = 0; i < plane; ++i) acc += g[i];
    }
    grad_bias[oc] += acc;
  }
}

Shape pool_output_shape(const Shape& x, const PoolWindow& win) {
  if (win.kh < 1 || win.kw < 1 || win.sh < 1 || win.sw < 1) {
    throw ConfigError("pool window and stride must be positive");
  }
  if (x.h < win.kh || x.w < win.kw) {
    throw ShapeError("pool window " + std::to_string(win.kh) + "x" + std::to_string(win.kw) +
                     " larger than input " + x.str());
  }
  return {x.n, x.c, (x.h - win.kh) / win.sh + 1, (x.w - win.kw) / win.sw + 1};
}

template <typename T>
Tensor<T> max_pool_forward(const Tensor<T>& x, const PoolWindow& win,
                           std::vector<std::uint32_t>& argmax) {
  const Shape os = pool_output_shape(x.shape(), win);
  Tensor<T> y(os);
  argmax.assign(os.numel(), 0);
  const int W = x.w();
  const long long planes = static_cast<long long>(os.n) * os.c;
  const std::size_t out_plane = os.plane();

#pragma omp parallel for schedule(static)
  for (long long p = 0; p < planes; ++p) {
    const T* in = x.data().data() + p * x.shape().plane();
    T* out = y.data().data() + p * out_plane;
    std::uint32_t* arg = argmax.data() + p * out_plane;
    for (int oy = 0; oy < os.h; ++oy) {
      for (int ox = 0; ox < os.w; ++ox) {
        const int y0 = oy * win.sh, x0 = ox * win.sw;
        std::uint32_t best_i = static_cast<std::uint32_t>(y0 * W + x0);
        T best = in[best_i];
        for (int ky = 0; ky < win.kh; ++ky) {
          for (int kx = 0; kx < win.kw; ++kx) {
            const auto i = static_cast<std::uint32_t>((y0 + ky) * W + x0 + kx);
            if (in[i] > best) {
              best = in[i];
              best_i = i;
            }
          }
        }
        out[oy * os.w + ox] = best;
        arg[oy * os.w + ox] = best_i;
      }
    }
  }
  return y;
}

template <typename T>
void max_pool_backward(const Tensor<T>& grad_out, const std::vector<std::uint32_t>& argmax,
                       Tensor<T>& grad_x) {
  const long long planes = static_cast<long long>(grad_out.n()) * grad_out.c();
  const std::size_t out_plane = grad_out.shape().plane();
  const std::size_t in_plane = grad_x.shape().plane();
#pragma omp parallel for schedule(static)
  for (long long p = 0; p < planes; ++p) {
    const T* g = grad_out.data().data() + p * out_plane;
    const std::uint32_t* arg = argmax.data() + p * out_plane;
    T* gin = grad_x.data().data() + p * in_plane;
    for (std::size_t i = 0; i < out_plane; ++i) gin[arg[i]] += g[i];
  }
}

template <typename T>
Tensor<T> avg_pool_forward(const Tensor<T>& x, const PoolWindow& win) {
  const Shape os = pool_output_shape(x.shape(), win);
  Tensor<T> y(os);
  const int W = x.w();
  const long long planes = static_cast<long long>(os.n) * os.c;
  const T inv = T{1} / static_cast<T>(win.kh * win.kw);

#pragma omp parallel for schedule(static)
  for (long long p = 0; p < planes; ++p) {
    const T* in = x.data().data() + p * x.shape().plane();
    T* out = y.data().data() + p * os.plane();
    for (int oy = 0; oy < os.h; ++oy) {
      for (int ox = 0; ox < os.w; ++ox) {
        T acc = 0;
        for (int ky = 0; ky < win.kh; ++ky) {
          const T* row = in + static_cast<std::size_t>(oy * win.sh + ky) * W + ox * win.sw;
          for (int kx = 0; kx < win.kw; ++kx) acc += row[kx];
        }
        out[oy * os.w + ox] = acc * inv;
      }
    }
  }
  return y;
}

template <typename T>
void avg_pool_backward(const Tensor<T>& grad_out, const PoolWindow& win, Tensor<T>& grad_x) {
  const Shape& os = grad_out.shape();
  const int W = grad_x.w();
  const long long planes = static_cast<long long>(os.n) * os.c;
  const T inv = T{1} / static_cast<T>(win.kh * win.kw);

#pragma omp parallel for schedule(static)
  for (long long p = 0; p < planes; ++p) {
    const T* g = grad_out.data().data() + p * os.plane();
    T* gin = grad_x.data().data() + p * grad_x.shape().plane();
    for (int oy = 0; oy < os.h; ++oy) {
      for (int ox = 0; ox < os.w; ++ox) {
        const T share = g[oy * os.w + ox] * inv;
        for (int ky = 0; ky < win.kh; ++ky) {
          T* row = gin + static_cast<std::size_t>(oy * win.sh + ky) * W + ox * win.sw;
          for (int kx = 0; kx < win.kw; ++kx) row[kx] += share;
        }
      }
    }
  }
}

template <typename T>
Tensor<T> bilinear_forward(const Tensor<T>& x, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) {
    throw ShapeError("bilinear_resize target must be >= 1, got " + std::to_string(out_h) + "x" +
                     std::to_string(out_w));
  }
  const LerpTable ty = lerp_table(x.h(), out_h);
  const LerpTable tx = lerp_table(x.w(), out_w);
  Tensor<T> y({x.n(), x.c(), out_h, out_w});
  const int W = x.w();
  const long long planes = static_cast<long long>(x.n()) * x.c();

#pragma omp parallel for schedule(static)
  for (long long p = 0; p < planes; ++p) {
    const T* in = x.data().data() + p * x.shape().plane();
    T* out = y.data().data() + p * y.shape().plane();
    for (int oy = 0; oy < out_h; ++oy) {
      const T* r0 = in + static_cast<std::size_t>(ty.i0[oy]) * W;
      const T* r1 = in + static_cast<std::size_t>(ty.i1[oy]) * W;
      const T ly = static_cast<T>(ty.frac[oy]);
      for (int ox = 0; ox < out_w; ++ox) {
        const int a = tx.i0[ox], b = tx.i1[ox];
        const T lx = static_cast<T>(tx.frac[ox]);
        // Difference form keeps constant inputs exactly constant.
        const T top = r0[a] + lx * (r0[b] - r0[a]);
        const T bottom = r1[a] + lx * (r1[b] - r1[a]);
        out[static_cast<std::size_t>(oy) * out_w + ox] = top + ly * (bottom - top);
      }
    }
  }
  return y;
}

template <typename T>
void bilinear_backward(const Tensor<T>& grad_out, Tensor<T>& grad_x) {
  const int out_h = grad_out.h(), out_w = grad_out.w();
  const LerpTable ty = lerp_table(grad_x.h(), out_h);
  const LerpTable tx = lerp_table(grad_x.w(), out_w);
  const int W = grad_x.w();
  const long long planes = static_cast<long long>(grad_x.n()) * grad_x.c();

#pragma omp parallel for schedule(static)
  for (long long p = 0; p < planes; ++p) {
    const T* g = grad_out.data().data() + p * grad_out.shape().plane();
    T* gin = grad_x.data().data() + p * grad_x.shape().plane();
    for (int oy = 0; oy < out_h; ++oy) {
      T* r0 = gin + static_cast<std::size_t>(ty.i0[oy]) * W;
      T* r1 = gin + static_cast<std::size_t>(ty.i1[oy]) * W;
      const T ly = static_cast<T>(ty.frac[oy]);
      for (int ox = 0; ox < out_w; ++ox) {
        const int a = tx.i0[ox], b = tx.i1[ox];
        const T lx = static_cast<T>(tx.frac[ox]);
        const T v = g[static_cast<std::size_t>(oy) * out_w + ox];
        const T top = v * (T{1} - ly);
        const T bottom = v * ly;
        r0[a] += top * (T{1} - lx);
        r0[b] += top * lx;
        r1[a] += bottom * (T{1} - lx);
        r1[b] += bottom * lx;
      }
    }
  }
}

template <typename T>
Tensor<T> batch_norm_train_forward(const Tensor<T>& x, const Tensor<T>& gamma,
                                   const Tensor<T>& beta, T eps, BatchNormSaved<T>& saved) {
  const int N = x.n(), C = x.c();
  if (gamma.size() != static_cast<std::size_t>(C) || beta.size() != static_cast<std::size_t>(C)) {
    throw ShapeError("batch_norm parameters of length " + std::to_string(gamma.size()) +
                     " for input " + x.shape().str());
  }
  const std::size_t plane = x.shape().plane();
  const double m = static_cast<double>(N) * static_cast<double>(plane);
  Tensor<T> y(x.shape());
  saved.xhat = Tensor<T>(x.shape());
  saved.mean.assign(C, 0);
  saved.var.assign(C, 0);
  saved.invstd.assign(C, 0);

#pragma omp parallel for schedule(static)
  for (int c = 0; c < C; ++c) {
    double sum = 0;
    for (int n = 0; n < N; ++n) {
      const T* p = x.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) sum += p[i];
    }
    const double mean = sum / m;
    double sq = 0;
    for (int n = 0; n < N; ++n) {
      const T* p = x.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) {
        const double d = p[i] - mean;
        sq += d * d;
      }
    }
    const double var = sq / m;
    const T invstd = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
    const T mu = static_cast<T>(mean);
    for (int n = 0; n < N; ++n) {
      const T* p = x.plane(n, c);
      T* xh = saved.xhat.plane(n, c);
      T* out = y.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) {
        xh[i] = (p[i] - mu) * invstd;
        out[i] = gamma[c] * xh[i] + beta[c];
      }
    }
    saved.mean[c] = mu;
    saved.var[c] = static_cast<T>(var);
    saved.invstd[c] = invstd;
  }
  return y;
}

template <typename T>
Tensor<T> batch_norm_infer_forward(const Tensor<T>& x, const Tensor<T>& gamma,
                                   const Tensor<T>& beta, const Tensor<T>& running_mean,
                                   const Tensor<T>& running_var, T eps, BatchNormSaved<T>& saved) {
  const int N = x.n(), C = x.c();
  const auto uc = static_cast<std::size_t>(C);
  if (gamma.size() != uc || beta.size() != uc || running_mean.size() != uc ||
      running_var.size() != uc) {
    throw ShapeError("batch_norm state of length " + std::to_string(gamma.size()) +
                     " for input " + x.shape().str());
  }
  const std::size_t plane = x.shape().plane();
  Tensor<T> y(x.shape());
  saved.xhat = Tensor<T>(x.shape());
  saved.mean.assign(C, 0);
  saved.var.assign(C, 0);
  saved.invstd.assign(C, 0);

#pragma omp parallel for schedule(static)
  for (int c = 0; c < C; ++c) {
    const T mu = running_mean[c];
    const T invstd = static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var[c]) +
                                                    static_cast<double>(eps)));
    for (int n = 0; n < N; ++n) {
      const T* p = x.plane(n, c);
      T* xh = saved.xhat.plane(n, c);
      T* out = y.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) {
        xh[i] = (p[i] - mu) * invstd;
        out[i] = gamma[c] * xh[i] + beta[c];
      }
    }
    saved.mean[c] = mu;
    saved.var[c] = running_var[c];
    saved.invstd[c] = invstd;
  }
  return y;
}

template <typename T>
void batch_norm_backward(const Tensor<T>& grad_out, const Tensor<T>& gamma,
                         const BatchNormSaved<T>& saved, bool batch_stats, Tensor<T>* grad_x,
                         Tensor<T>* grad_gamma, Tensor<T>* grad_beta) {
  const int N = grad_out.n(), C = grad_out.c();
  const std::size_t plane = grad_out.shape().plane();
  const double m = static_cast<double>(N) * static_cast<double>(plane);

#pragma omp parallel for schedule(static)
  for (int c = 0; c < C; ++c) {
    double sum_dy = 0;
    double sum_dy_xhat = 0;
    for (int n = 0; n < N; ++n) {
      const T* g = grad_out.plane(n, c);
      const T* xh = saved.xhat.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) {
        sum_dy += g[i];
        sum_dy_xhat += static_cast<double>(g[i]) * xh[i];
      }
    }
    if (grad_gamma) (*grad_gamma)[c] += static_cast<T>(sum_dy_xhat);
    if (grad_beta) (*grad_beta)[c] += static_cast<T>(sum_dy);
    if (!grad_x) continue;
    const T scale = gamma[c] * saved.invstd[c];
    const T mean_dy = static_cast<T>(sum_dy / m);
    const T mean_dy_xhat = static_cast<T>(sum_dy_xhat / m);
    for (int n = 0; n < N; ++n) {
      const T* g = grad_out.plane(n, c);
      const T* xh = saved.xhat.plane(n, c);
      T* gx = grad_x->plane(n, c);
      if (batch_stats) {
        for (std::size_t i = 0; i < plane; ++i) {
          gx[i] += scale * (g[i] - mean_dy - xh[i] * mean_dy_xhat);
        }
      } else {
        for (std::size_t i = 0; i < plane; ++i) gx[i] += scale * g[i];
      }
    }
  }
}

template <typename T>
T sigmoid_scalar(T z) {
  T s;
  if (z >= 0) {
    s = T{1} / (T{1} + std::exp(-z));
  } else {
    const T e = std::exp(z);
    s = e / (T{1} + e);
  }
  // Saturated values are pulled back inside the open interval.
  constexpr T lo = std::numeric_limits<T>::min();
  constexpr T hi = T{1} - std::numeric_limits<T>::epsilon() / 2;
  return std::clamp(s, lo, hi);
}

#define MAPNET_INSTANTIATE(T)                                                                    \
  template Tensor<T> conv2d_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int,  \
                                    int);                                                        \
  template void conv2d_backward_input(const Tensor<T>&, const Tensor<T>&, int, int, Tensor<T>&); \
  template void conv2d_backward_weight(const Tensor<T>&, const Tensor<T>&, int, int,            \
                                       Tensor<T>&);                                              \
  template void conv2d_backward_bias(const Tensor<T>&, Tensor<T>&);                              \
  template Tensor<T> max_pool_forward(const Tensor<T>&, const PoolWindow&,                       \
                                      std::vector<std::uint32_t>&);                              \
  template void max_pool_backward(const Tensor<T>&, const std::vector<std::uint32_t>&,           \
                                  Tensor<T>&);                                                   \
  template Tensor<T> avg_pool_forward(const Tensor<T>&, const PoolWindow&);                      \
  template void avg_pool_backward(const Tensor<T>&, const PoolWindow&, Tensor<T>&);              \
  template Tensor<T> bilinear_forward(const Tensor<T>&, int, int);                               \
  template void bilinear_backward(const Tensor<T>&, Tensor<T>&);                                 \
  template Tensor<T> batch_norm_train_forward(const Tensor<T>&, const Tensor<T>&,                \
                                              const Tensor<T>&, T, BatchNormSaved<T>&);          \
  template Tensor<T> batch_norm_infer_forward(const Tensor<T>&, const Tensor<T>&,                \
                                              const Tensor<T>&, const Tensor<T>&,                \
                                              const Tensor<T>&, T, BatchNormSaved<T>&);          \
  template void batch_norm_backward(const Tensor<T>&, const Tensor<T>&,                          \
                                    const BatchNormSaved<T>&, bool, Tensor<T>*, Tensor<T>*,      \
                                    Tensor<T>*);                                                 \
  template T sigmoid_scalar(T);

MAPNET_INSTANTIATE(float)
MAPNET_INSTANTIATE(double)

#undef MAPNET_INSTANTIATE

}  // namespace mapnet::kernels
