#include "mapnet/augment.hpp"

#include "mapnet/errors.hpp"

namespace mapnet {

AugmentDraw AugmentDraw::sample(Rng& rng) {
  AugmentDraw d;
  d.quarter_turns = static_cast<int>(rng.uniform_int(0, 3));
  d.flip_h = rng.bernoulli(0.5);
  d.flip_v = rng.bernoulli(0.5);
  return d;
}

template <typename T>
Tensor<T> apply_augment(const Tensor<T>& t, const AugmentDraw& draw) {
  const int turns = ((draw.quarter_turns % 4) + 4) % 4;
  if (turns % 2 == 1 && t.h() != t.w()) {
    throw ConfigError("quarter-turn rotation needs square tiles, got " + t.shape().str());
  }
  Tensor<T> cur = t;
  for (int r = 0; r < turns; ++r) {
    Tensor<T> next(cur.shape());
    const int n = cur.h();
    for (int b = 0; b < cur.n(); ++b)
      for (int c = 0; c < cur.c(); ++c)
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) next(b, c, i, j) = cur(b, c, n - 1 - j, i);
    cur = std::move(next);
  }
  if (draw.flip_h || draw.flip_v) {
    Tensor<T> next(cur.shape());
    const int h = cur.h(), w = cur.w();
    for (int b = 0; b < cur.n(); ++b)
      for (int c = 0; c < cur.c(); ++c)
        for (int i = 0; i < h; ++i)
          for (int j = 0; j < w; ++j) {
            const int si = draw.flip_v ? h - 1 - i : i;
            const int sj = draw.flip_h ? w - 1 - j : j;
            next(b, c, i, j) = cur(b, c, si, sj);
          }
    cur = std::move(next);
  }
  return cur;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> augment(const Tensor<T>& image, const Tensor<T>& mask,
                                        const AugmentDraw& draw) {
  if (image.h() != mask.h() || image.w() != mask.w()) {
    throw ShapeError("augment: image " + image.shape().str() + " and mask " + mask.shape().str());
  }
  return {apply_augment(image, draw), apply_augment(mask, draw)};
}

template Tensor<float> apply_augment(const Tensor<float>&, const AugmentDraw&);
template Tensor<double> apply_augment(const Tensor<double>&, const AugmentDraw&);
template std::pair<Tensor<float>, Tensor<float>> augment(const Tensor<float>&, const Tensor<float>&,
                                                         const AugmentDraw&);
template std::pair<Tensor<double>, Tensor<double>> augment(const Tensor<double>&,
                                                           const Tensor<double>&, const AugmentDraw&);

}  // namespace mapnet
