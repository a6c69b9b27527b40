#include "mapnet/ops.hpp"

#include <memory>

namespace mapnet::ops {

namespace {

void require_dims(const Shape& a, const Shape& b, const char* op) {
  if (a != b) {
    throw ShapeError(std::string(op) + ": operand shapes differ, " + a.str() + " vs " + b.str());
  }
}

template <typename T>
void accumulate(Tensor<T>& dst, const Tensor<T>& src) {
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

}  // namespace

template <typename T>
Var conv2d(Graph<T>& g, Var x, Var weight, Var bias, int stride, int pad) {
  const Tensor<T>& xv = g.value(x);
  const Tensor<T>& wv = g.value(weight);
  Tensor<T> y = kernels::conv2d_forward(xv, wv, g.value(bias), stride, pad);
  const Shape& os = y.shape();
  const std::uint64_t macs = static_cast<std::uint64_t>(os.numel()) * wv.c() * wv.h() * wv.w();
  return g.record(
      OpKind::conv2d, std::move(y), {x, weight, bias},
      [x, weight, bias, stride, pad](BackwardContext<T>& ctx) {
        const Tensor<T>& gout = ctx.grad_output();
        if (ctx.needs_grad(x)) {
          kernels::conv2d_backward_input(gout, ctx.value(weight), stride, pad, ctx.grad(x));
        }
        if (ctx.needs_grad(weight)) {
          kernels::conv2d_backward_weight(gout, ctx.value(x), stride, pad, ctx.grad(weight));
        }
        if (ctx.needs_grad(bias)) kernels::conv2d_backward_bias(gout, ctx.grad(bias));
      },
      macs);
}

template <typename T>
Var pool2d(Graph<T>& g, Var x, PoolKind kind, const PoolSpec& spec) {
  const Shape& s = g.value(x).shape();
  kernels::PoolWindow win;
  if (const auto* w = std::get_if<PoolWindowSpec>(&spec)) {
    if (w->k < 1 || w->stride < 1) throw ConfigError("pool window and stride must be positive");
    if (s.h < w->k || s.w < w->k) {
      throw ShapeError("pool window " + std::to_string(w->k) + " larger than input " + s.str());
    }
    win = {w->k, w->k, w->stride, w->stride};
  } else if (const auto* a = std::get_if<AdaptiveBins>(&spec)) {
    if (a->bins < 1 || s.h % a->bins != 0 || s.w % a->bins != 0) {
      throw ConfigError("adaptive pooling with " + std::to_string(a->bins) +
                        " bins does not divide spatial dims of " + s.str());
    }
    const int kh = s.h / a->bins, kw = s.w / a->bins;
    win = {kh, kw, kh, kw};
  } else {
    win = {s.h, s.w, s.h, s.w};
  }

  if (kind == PoolKind::max) {
    auto argmax = std::make_shared<std::vector<std::uint32_t>>();
    Tensor<T> y = kernels::max_pool_forward(g.value(x), win, *argmax);
    return g.record(OpKind::max_pool, std::move(y), {x},
                    [x, argmax](BackwardContext<T>& ctx) {
                      kernels::max_pool_backward(ctx.grad_output(), *argmax, ctx.grad(x));
                    });
  }
  Tensor<T> y = kernels::avg_pool_forward(g.value(x), win);
  return g.record(OpKind::avg_pool, std::move(y), {x}, [x, win](BackwardContext<T>& ctx) {
    kernels::avg_pool_backward(ctx.grad_output(), win, ctx.grad(x));
  });
}

template <typename T>
Var bilinear_resize(Graph<T>& g, Var x, int out_h, int out_w) {
  Tensor<T> y = kernels::bilinear_forward(g.value(x), out_h, out_w);
  return g.record(OpKind::bilinear, std::move(y), {x}, [x](BackwardContext<T>& ctx) {
    kernels::bilinear_backward(ctx.grad_output(), ctx.grad(x));
  });
}

template <typename T>
Var batch_norm(Graph<T>& g, Var x, Var gamma, Var beta, Tensor<T>& running_mean,
               Tensor<T>& running_var, Mode mode, const BatchNormOptions& options) {
  const Tensor<T>& xv = g.value(x);
  if (xv.size() == 0) throw ConfigError("batch_norm over an empty batch");
  const auto channels = static_cast<std::size_t>(xv.c());
  if (running_mean.size() != channels || running_var.size() != channels) {
    throw ShapeError("batch_norm running statistics of length " +
                     std::to_string(running_mean.size()) + " for input " + xv.shape().str());
  }
  auto saved = std::make_shared<kernels::BatchNormSaved<T>>();
  const T eps = static_cast<T>(options.epsilon);
  Tensor<T> y;
  const bool batch_stats = mode == Mode::train;
  if (batch_stats) {
    y = kernels::batch_norm_train_forward(xv, g.value(gamma), g.value(beta), eps, *saved);
    const T mom = static_cast<T>(options.momentum);
    for (std::size_t c = 0; c < channels; ++c) {
      running_mean[c] = mom * running_mean[c] + (T{1} - mom) * saved->mean[c];
      running_var[c] = mom * running_var[c] + (T{1} - mom) * saved->var[c];
    }
  } else {
    y = kernels::batch_norm_infer_forward(xv, g.value(gamma), g.value(beta), running_mean,
                                          running_var, eps, *saved);
  }
  return g.record(OpKind::batch_norm, std::move(y), {x, gamma, beta},
                  [x, gamma, beta, saved, batch_stats](BackwardContext<T>& ctx) {
                    Tensor<T>* gx = ctx.needs_grad(x) ? &ctx.grad(x) : nullptr;
                    Tensor<T>* gg = ctx.needs_grad(gamma) ? &ctx.grad(gamma) : nullptr;
                    Tensor<T>* gb = ctx.needs_grad(beta) ? &ctx.grad(beta) : nullptr;
                    kernels::batch_norm_backward(ctx.grad_output(), ctx.value(gamma), *saved,
                                                 batch_stats, gx, gg, gb);
                  });
}

template <typename T>
Var activation(Graph<T>& g, Var x, Activation kind) {
  const Tensor<T>& xv = g.value(x);
  Tensor<T> y(xv.shape());
  auto in = xv.data();
  auto out = y.data();
  if (kind == Activation::relu) {
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > T{0} ? in[i] : T{0};
    return g.record(OpKind::relu, std::move(y), {x}, [x](BackwardContext<T>& ctx) {
      auto gin = ctx.grad(x).data();
      auto go = ctx.grad_output().data();
      auto xs = ctx.value(x).data();
#pragma omp parallel for schedule(static)
      for (std::size_t i = 0; i < gin.size(); ++i) {
        if (xs[i] > T{0}) gin[i] += go[i];
      }
    });
  }
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = kernels::sigmoid_scalar(in[i]);
  return g.record(OpKind::sigmoid, std::move(y), {x}, [x](BackwardContext<T>& ctx) {
    auto gin = ctx.grad(x).data();
    auto go = ctx.grad_output().data();
    auto s = ctx.output().data();
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < gin.size(); ++i) gin[i] += go[i] * s[i] * (T{1} - s[i]);
  });
}

template <typename T>
Var dense(Graph<T>& g, Var v, Var weight, Var bias) {
  const Tensor<T>& vv = g.value(v);
  const Tensor<T>& wv = g.value(weight);
  const Tensor<T>& bv = g.value(bias);
  const int n = vv.n();
  const std::size_t k = vv.size() / n;
  const int k_out = wv.n();
  if (wv.size() != static_cast<std::size_t>(k_out) * k || bv.size() != static_cast<std::size_t>(k_out)) {
    throw ShapeError("dense: input " + vv.shape().str() + " weights " + wv.shape().str() +
                     " bias " + bv.shape().str());
  }
  Tensor<T> y({n, k_out, 1, 1});
  const T* W = wv.data().data();
  for (int b = 0; b < n; ++b) {
    const T* x = vv.data().data() + b * k;
#pragma omp parallel for schedule(static)
    for (int o = 0; o < k_out; ++o) {
      T acc = 0;
      const T* row = W + o * k;
#pragma omp simd reduction(+ : acc)
      for (std::size_t j = 0; j < k; ++j) acc += row[j] * x[j];
      y[static_cast<std::size_t>(b) * k_out + o] = acc + bv[o];
    }
  }
  const std::uint64_t macs = static_cast<std::uint64_t>(n) * k_out * k;
  return g.record(
      OpKind::dense, std::move(y), {v, weight, bias},
      [v, weight, bias, n, k, k_out](BackwardContext<T>& ctx) {
        const T* go = ctx.grad_output().data().data();
        if (ctx.needs_grad(v)) {
          const T* W = ctx.value(weight).data().data();
          T* gv = ctx.grad(v).data().data();
          for (int b = 0; b < n; ++b)
            for (int o = 0; o < k_out; ++o) {
              const T gb = go[static_cast<std::size_t>(b) * k_out + o];
              const T* row = W + o * k;
              for (std::size_t j = 0; j < k; ++j) gv[b * k + j] += gb * row[j];
            }
        }
        if (ctx.needs_grad(weight)) {
          const T* x = ctx.value(v).data().data();
          T* gw = ctx.grad(weight).data().data();
#pragma omp parallel for schedule(static)
          for (int o = 0; o < k_out; ++o)
            for (int b = 0; b < n; ++b) {
              const T gb = go[static_cast<std::size_t>(b) * k_out + o];
              for (std::size_t j = 0; j < k; ++j) gw[o * k + j] += gb * x[b * k + j];
            }
        }
        if (ctx.needs_grad(bias)) {
          Tensor<T>& gbias = ctx.grad(bias);
          for (int b = 0; b < n; ++b)
            for (int o = 0; o < k_out; ++o) gbias[o] += go[static_cast<std::size_t>(b) * k_out + o];
        }
      },
      macs);
}

template <typename T>
Var concat_channels(Graph<T>& g, std::span<const Var> xs) {
  if (xs.empty()) throw UsageError("concat of zero tensors");
  const Shape first = g.value(xs[0]).shape();
  int channels = 0;
  for (Var v : xs) {
    const Shape& s = g.value(v).shape();
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      throw ShapeError("concat_channels: " + first.str() + " vs " + s.str());
    }
    channels += s.c;
  }
  Tensor<T> y({first.n, channels, first.h, first.w});
  const std::size_t plane = first.plane();
  for (int n = 0; n < first.n; ++n) {
    int offset = 0;
    for (Var v : xs) {
      const Tensor<T>& t = g.value(v);
      std::copy_n(t.plane(n, 0), t.c() * plane, y.plane(n, offset));
      offset += t.c();
    }
  }
  std::vector<Var> inputs(xs.begin(), xs.end());
  return g.record(OpKind::concat, std::move(y), inputs, [inputs, plane](BackwardContext<T>& ctx) {
    const Tensor<T>& go = ctx.grad_output();
    int offset = 0;
    for (Var v : inputs) {
      const int c = ctx.value(v).c();
      if (ctx.needs_grad(v)) {
        Tensor<T>& gi = ctx.grad(v);
        for (int n = 0; n < go.n(); ++n) {
          const T* src = go.plane(n, offset);
          T* dst = gi.plane(n, 0);
          for (std::size_t i = 0; i < c * plane; ++i) dst[i] += src[i];
        }
      }
      offset += c;
    }
  });
}

template <typename T>
Var add(Graph<T>& g, Var x, Var y) {
  const Tensor<T>& a = g.value(x);
  const Tensor<T>& b = g.value(y);
  require_dims(a.shape(), b.shape(), "add");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return g.record(OpKind::add, std::move(out), {x, y}, [x, y](BackwardContext<T>& ctx) {
    if (ctx.needs_grad(x)) accumulate(ctx.grad(x), ctx.grad_output());
    if (ctx.needs_grad(y)) accumulate(ctx.grad(y), ctx.grad_output());
  });
}

template <typename T>
Var scale_channels(Graph<T>& g, Var x, Var gates) {
  const Tensor<T>& xv = g.value(x);
  const Tensor<T>& gv = g.value(gates);
  const Shape want{xv.n(), xv.c(), 1, 1};
  if (gv.shape() != want) {
    throw ShapeError("scale_channels: gates " + gv.shape().str() + " for input " +
                     xv.shape().str() + ", expected " + want.str());
  }
  Tensor<T> y(xv.shape());
  const std::size_t plane = xv.shape().plane();
  for (int n = 0; n < xv.n(); ++n)
    for (int c = 0; c < xv.c(); ++c) {
      const T gate = gv(n, c, 0, 0);
      const T* src = xv.plane(n, c);
      T* dst = y.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) dst[i] = src[i] * gate;
    }
  return g.record(OpKind::scale_channels, std::move(y), {x, gates},
                  [x, gates, plane](BackwardContext<T>& ctx) {
                    const Tensor<T>& go = ctx.grad_output();
                    const Tensor<T>& xs = ctx.value(x);
                    const Tensor<T>& gs = ctx.value(gates);
                    for (int n = 0; n < go.n(); ++n)
                      for (int c = 0; c < go.c(); ++c) {
                        const T* d = go.plane(n, c);
                        if (ctx.needs_grad(x)) {
                          T* gx = ctx.grad(x).plane(n, c);
                          const T gate = gs(n, c, 0, 0);
                          for (std::size_t i = 0; i < plane; ++i) gx[i] += d[i] * gate;
                        }
                        if (ctx.needs_grad(gates)) {
                          const T* xi = xs.plane(n, c);
                          T acc = 0;
                          for (std::size_t i = 0; i < plane; ++i) acc += d[i] * xi[i];
                          ctx.grad(gates)(n, c, 0, 0) += acc;
                        }
                      }
                  });
}

template <typename T>
Var weighted_sum(Graph<T>& g, Var x, const Tensor<T>& weights) {
  const Tensor<T>& xv = g.value(x);
  require_dims(xv.shape(), weights.shape(), "weighted_sum");
  double acc = 0;
  for (std::size_t i = 0; i < xv.size(); ++i) acc += static_cast<double>(weights[i]) * xv[i];
  Tensor<T> out({1, 1, 1, 1}, static_cast<T>(acc));
  return g.record(OpKind::reduce, std::move(out), {x}, [x, weights](BackwardContext<T>& ctx) {
    const T go = ctx.grad_output()[0];
    Tensor<T>& gx = ctx.grad(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go * weights[i];
  });
}

template <typename T>
Var sum(Graph<T>& g, Var x) {
  return weighted_sum(g, x, Tensor<T>(g.value(x).shape(), T{1}));
}

template <typename T>
Var mean(Graph<T>& g, Var x) {
  const Shape& s = g.value(x).shape();
  return weighted_sum(g, x, Tensor<T>(s, static_cast<T>(1.0 / static_cast<double>(s.numel()))));
}

#define MAPNET_INSTANTIATE(T)                                                                    \
  template Var conv2d(Graph<T>&, Var, Var, Var, int, int);                                      \
  template Var pool2d(Graph<T>&, Var, PoolKind, const PoolSpec&);                                \
  template Var bilinear_resize(Graph<T>&, Var, int, int);                                        \
  template Var batch_norm(Graph<T>&, Var, Var, Var, Tensor<T>&, Tensor<T>&, Mode,                \
                          const BatchNormOptions&);                                              \
  template Var activation(Graph<T>&, Var, Activation);                                           \
  template Var dense(Graph<T>&, Var, Var, Var);                                                  \
  template Var concat_channels(Graph<T>&, std::span<const Var>);                                 \
  template Var add(Graph<T>&, Var, Var);                                                         \
  template Var scale_channels(Graph<T>&, Var, Var);                                              \
  template Var sum(Graph<T>&, Var);                                                              \
  template Var mean(Graph<T>&, Var);                                                             \
  template Var weighted_sum(Graph<T>&, Var, const Tensor<T>&);

MAPNET_INSTANTIATE(float)
MAPNET_INSTANTIATE(double)

#undef MAPNET_INSTANTIATE

}  // namespace mapnet::ops
