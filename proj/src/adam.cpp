#include "mapnet/adam.hpp"

#include <cmath>

#include "mapnet/errors.hpp"

namespace mapnet {

template <typename T>
AdamState<T> AdamState<T>::zeros_like(const TensorMap<T>& params, double lr) {
  AdamState s;
  s.lr = lr;
  for (const auto& [key, p] : params) {
    s.m.emplace(key, Tensor<T>(p.shape()));
    s.v.emplace(key, Tensor<T>(p.shape()));
  }
  return s;
}

template <typename T>
void adam_step(TensorMap<T>& params, const TensorMap<T>& grads, AdamState<T>& state) {
  for (const auto& [key, p] : params) {
    auto it = grads.find(key);
    if (it == grads.end()) throw UsageError("adam_step: no gradient for parameter '" + key + "'");
    if (it->second.shape() != p.shape()) {
      throw ShapeError("adam_step: gradient of '" + key + "' has shape " + it->second.shape().str() +
                       ", parameter " + p.shape().str());
    }
  }
  state.t += 1;
  const double b1 = state.beta1, b2 = state.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (auto& [key, p] : params) {
    const Tensor<T>& g = grads.at(key);
    auto& m = state.m.try_emplace(key, p.shape()).first->second;
    auto& v = state.v.try_emplace(key, p.shape()).first->second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      const double mi = b1 * m[i] + (1.0 - b1) * gi;
      const double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double mhat = mi / c1;
      const double vhat = vi / c2;
      p[i] = static_cast<T>(p[i] - state.lr * mhat / (std::sqrt(vhat) + state.eps));
    }
  }
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step(TensorMap<float>&, const TensorMap<float>&, AdamState<float>&);
template void adam_step(TensorMap<double>&, const TensorMap<double>&, AdamState<double>&);

}  // namespace mapnet
