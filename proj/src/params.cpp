#include "mapnet/params.hpp"

#include <cmath>

namespace mapnet {

template <typename T>
Tensor<T>& ParamStore<T>::add_param(const std::string& key, Shape shape, Init init, Rng& rng) {
  if (params_.contains(key) || buffers_.contains(key)) {
    throw UsageError("duplicate parameter key '" + key + "'");
  }
  Tensor<T> t(shape);
  switch (init) {
    case Init::zeros:
      break;
    case Init::ones:
      t.fill(T{1});
      break;
    case Init::he_normal: {
      const double fan_in = static_cast<double>(shape.c) * shape.h * shape.w;
      const double stddev = std::sqrt(2.0 / fan_in);
      for (T& v : t.data()) v = static_cast<T>(rng.normal(0.0, stddev));
      break;
    }
  }
  return params_.emplace(key, std::move(t)).first->second;
}

template <typename T>
Tensor<T>& ParamStore<T>::add_buffer(const std::string& key, Shape shape, T fill) {
  if (params_.contains(key) || buffers_.contains(key)) {
    throw UsageError("duplicate buffer key '" + key + "'");
  }
  return buffers_.emplace(key, Tensor<T>(shape, fill)).first->second;
}

template <typename T>
Tensor<T>& ParamStore<T>::param(const std::string& key) {
  auto it = params_.find(key);
  if (it == params_.end()) throw UsageError("unknown parameter '" + key + "'");
  return it->second;
}

template <typename T>
const Tensor<T>& ParamStore<T>::param(const std::string& key) const {
  auto it = params_.find(key);
  if (it == params_.end()) throw UsageError("unknown parameter '" + key + "'");
  return it->second;
}

template <typename T>
Tensor<T>& ParamStore<T>::buffer(const std::string& key) {
  auto it = buffers_.find(key);
  if (it == buffers_.end()) throw UsageError("unknown buffer '" + key + "'");
  return it->second;
}

template <typename T>
const Tensor<T>& ParamStore<T>::buffer(const std::string& key) const {
  auto it = buffers_.find(key);
  if (it == buffers_.end()) throw UsageError("unknown buffer '" + key + "'");
  return it->second;
}

template <typename T>
std::size_t ParamStore<T>::count(std::string_view prefix) const {
  std::size_t total = 0;
  for (const auto& [key, t] : params_) {
    if (std::string_view(key).starts_with(prefix)) total += t.size();
  }
  return total;
}

template <typename T>
void ParamStore<T>::fill_matching(std::string_view fragment, T value) {
  for (auto& [key, t] : params_) {
    if (key.find(fragment) != std::string::npos) t.fill(value);
  }
}

template class ParamStore<float>;
template class ParamStore<double>;

}  // namespace mapnet
