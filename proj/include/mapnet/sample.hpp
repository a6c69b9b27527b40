#pragma once

#include <optional>
#include <string>

#include "mapnet/tensor.hpp"

namespace mapnet {

// Position of a tile inside the raster it was cut from.
struct TileOrigin {
  std::string parent;
  int row = 0;
  int col = 0;

  friend bool operator==(const TileOrigin&, const TileOrigin&) = default;
};

// Paired RGB image in [0,1] (1,3,h,w) and binary mask (1,1,h,w).
struct Sample {
  std::string id;
  Tensor<float> image;
  Tensor<float> mask;
  std::optional<TileOrigin> origin;

  [[nodiscard]] int height() const { return image.h(); }
  [[nodiscard]] int width() const { return image.w(); }
  [[nodiscard]] double foreground_fraction() const;
};

}  // namespace mapnet
