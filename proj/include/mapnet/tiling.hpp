#pragma once

#include <array>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "mapnet/errors.hpp"
#include "mapnet/rng.hpp"
#include "mapnet/sample.hpp"

namespace mapnet {

// Tile start offsets along one axis: a regular grid from 0, plus one tile
// anchored to the far edge when the grid leaves a remainder.
std::vector<int> tile_offsets(int extent, int tile);

// Row-major grid tiles; ids are <parent>_r<row>_c<col> with pixel offsets.
std::vector<Sample> tile(const Sample& raster, int tile_h, int tile_w);

// Pastes tiles at their origins in list order (later wins). Every pixel of
// the height x width parent must be covered.
Sample stitch(const std::vector<Sample>& tiles, const std::string& parent, int height, int width);

// Partition sizes for n items: validation and test shares are rounded,
// train takes the remainder.
std::array<std::size_t, 3> split_sizes(std::size_t n, const std::array<double, 3>& ratios);

template <typename V>
struct Split {
  std::vector<V> train;
  std::vector<V> val;
  std::vector<V> test;
};

// Seeded shuffle, then consecutive slices of split_sizes(n). Needs n >= 3.
template <typename V>
Split<V> split(const std::vector<V>& items, const std::array<double, 3>& ratios, std::uint64_t seed) {
  if (items.size() < 3) {
    throw UsageError("split needs at least 3 samples, got " + std::to_string(items.size()));
  }
  const auto sizes = split_sizes(items.size(), ratios);
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  shuffle(order, rng);
  Split<V> out;
  std::size_t i = 0;
  for (; i < sizes[0]; ++i) out.train.push_back(items[order[i]]);
  for (; i < sizes[0] + sizes[1]; ++i) out.val.push_back(items[order[i]]);
  for (; i < order.size(); ++i) out.test.push_back(items[order[i]]);
  return out;
}

}  // namespace mapnet
