#include "mapnet/loss.hpp"

#include <cmath>

#include "mapnet/kernels.hpp"

namespace mapnet {

double bce_with_logits(double z, double y) {
  return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

template <typename T>
Var bce_loss(Graph<T>& g, Var logits, const Tensor<T>& labels) {
  const Tensor<T>& z = g.value(logits);
  if (z.shape() != labels.shape()) {
    throw ShapeError("bce_loss: logits " + z.shape().str() + " vs labels " + labels.shape().str());
  }
  if (z.c() != 1) throw ShapeError("bce_loss expects single-channel logits, got " + z.shape().str());
  double total = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const T y = labels[i];
    if (y != T{0} && y != T{1}) {
      throw DataError("bce_loss labels must be 0 or 1, found " + std::to_string(y) + " at element " +
                      std::to_string(i));
    }
    total += bce_with_logits(static_cast<double>(z[i]), static_cast<double>(y));
  }
  const double count = static_cast<double>(z.size());
  Tensor<T> out({1, 1, 1, 1}, static_cast<T>(total / count));
  return g.record(OpKind::loss, std::move(out), {logits}, [logits, labels, count](BackwardContext<T>& ctx) {
    const T scale = ctx.grad_output()[0] / static_cast<T>(count);
    const Tensor<T>& zv = ctx.value(logits);
    Tensor<T>& gz = ctx.grad(logits);
    for (std::size_t i = 0; i < gz.size(); ++i) {
      gz[i] += (kernels::sigmoid_scalar(zv[i]) - labels[i]) * scale;
    }
  });
}

template Var bce_loss(Graph<float>&, Var, const Tensor<float>&);
template Var bce_loss(Graph<double>&, Var, const Tensor<double>&);

}  // namespace mapnet
