#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>

#include "mapnet/rng.hpp"
#include "mapnet/sample.hpp"
#include "mapnet/tensor.hpp"

namespace mapnet::testing {

template <typename T>
Tensor<T> random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(s);
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

inline Shape random_shape(Rng& rng, int max_n, int max_c, int min_hw, int max_hw) {
  return {static_cast<int>(rng.uniform_int(1, max_n)), static_cast<int>(rng.uniform_int(1, max_c)),
          static_cast<int>(rng.uniform_int(min_hw, max_hw)), static_cast<int>(rng.uniform_int(min_hw, max_hw))};
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a[i]) - double(b[i])));
  return m;
}

template <typename T>
double max_abs(const Tensor<T>& a) {
  double m = 0;
  for (auto v : a.data()) m = std::max(m, std::abs(double(v)));
  return m;
}

// Fresh empty directory under the system temp dir, unique per name.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("mapnet_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Image whose first channel carries a bright disc; the mask marks the disc.
inline Sample toy_sample(const std::string& id, int h, int w, Rng& rng) {
  Sample s;
  s.id = id;
  s.image = random_tensor<float>({1, 3, h, w}, rng, 0.0, 0.3);
  s.mask = Tensor<float>({1, 1, h, w});
  const double cy = rng.uniform(0, h), cx = rng.uniform(0, w), r = rng.uniform(3, h / 3.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if ((y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r) {
        s.mask(0, 0, y, x) = 1.0f;
        s.image(0, 0, y, x) += 0.6f;
      }
    }
  }
  return s;
}

}  // namespace mapnet::testing
