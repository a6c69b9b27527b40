#pragma once

#include <utility>

#include "mapnet/rng.hpp"
#include "mapnet/tensor.hpp"

namespace mapnet {

// Clockwise quarter turns followed by optional horizontal (column) and
// vertical (row) mirroring.
struct AugmentDraw {
  int quarter_turns = 0;
  bool flip_h = false;
  bool flip_v = false;

  // Consumes three draws: uniform_int(0,3), bernoulli(0.5), bernoulli(0.5).
  static AugmentDraw sample(Rng& rng);
  [[nodiscard]] bool identity() const { return quarter_turns == 0 && !flip_h && !flip_v; }
};

// Applies the same geometric transform to every plane of t.
template <typename T>
Tensor<T> apply_augment(const Tensor<T>& t, const AugmentDraw& draw);

template <typename T>
std::pair<Tensor<T>, Tensor<T>> augment(const Tensor<T>& image, const Tensor<T>& mask,
                                        const AugmentDraw& draw);
template <typename T>
std::pair<Tensor<T>, Tensor<T>> augment(const Tensor<T>& image, const Tensor<T>& mask, Rng& rng) {
  return augment(image, mask, AugmentDraw::sample(rng));
}

}  // namespace mapnet
