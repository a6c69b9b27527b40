#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "mapnet/sample.hpp"

namespace mapnet {

enum class ShapeKind { rectangle, rotated_rectangle, l_shape };

struct SceneSpec {
  std::uint64_t seed = 0;
  std::string id = "scene";
  int height = 256;
  int width = 256;
  int min_buildings = 4;
  int max_buildings = 12;
  int min_scale = 8;   // building side length range in pixels
  int max_scale = 40;
  // Relative weights for rectangle, rotated rectangle and L-shape.
  std::array<double, 3> shape_mix{1.0, 1.0, 1.0};
  // Background: coarse grid of uniform intensities in [bg_low, bg_high],
  // one cell per bg_cell pixels, bilinearly upsampled.
  double bg_low = 0.15;
  double bg_high = 0.45;
  int bg_cell = 32;
  // Buildings: per-building base intensity in [fg_low, fg_high] per channel.
  double fg_low = 0.55;
  double fg_high = 0.95;
  double noise = 0.04;  // amplitude of uniform per-pixel noise
  double min_fg_fraction = 0.05;
  double max_fg_fraction = 0.6;
  int max_retries = 50;

  // Throws ConfigError naming the field.
  void validate() const;
};

// Deterministic in spec. Values are quantized to multiples of 1/255 so a
// PPM round trip is exact. The foreground band is enforced by redrawing up
// to max_retries times (GenerationError afterwards); it is not applied when
// max_buildings is 0.
Sample generate_scene(const SceneSpec& spec);

}  // namespace mapnet
