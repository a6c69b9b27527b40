#include "mapnet/tiling.hpp"

#include <cmath>

namespace mapnet {

std::vector<int> tile_offsets(int extent, int tile) {
  if (tile < 1) throw UsageError("tile size must be positive, got " + std::to_string(tile));
  if (tile > extent) {
    throw UsageError("tile size " + std::to_string(tile) + " exceeds raster extent " + std::to_string(extent));
  }
  std::vector<int> offs;
  for (int o = 0; o + tile <= extent; o += tile) offs.push_back(o);
  if (offs.back() + tile < extent) offs.push_back(extent - tile);
  return offs;
}

std::vector<Sample> tile(const Sample& raster, int tile_h, int tile_w) {
  const auto rows = tile_offsets(raster.height(), tile_h);
  const auto cols = tile_offsets(raster.width(), tile_w);
  const int ch = raster.image.c();
  std::vector<Sample> tiles;
  tiles.reserve(rows.size() * cols.size());
  for (int r : rows) {
    for (int c : cols) {
      Sample t;
      t.id = raster.id + "_r" + std::to_string(r) + "_c" + std::to_string(c);
      t.origin = TileOrigin{raster.id, r, c};
      t.image = Tensor<float>({1, ch, tile_h, tile_w});
      t.mask = Tensor<float>({1, 1, tile_h, tile_w});
      for (int y = 0; y < tile_h; ++y) {
        for (int k = 0; k < ch; ++k) {
          const float* src = &raster.image(0, k, r + y, c);
          std::copy(src, src + tile_w, &t.image(0, k, y, 0));
        }
        const float* msrc = &raster.mask(0, 0, r + y, c);
        std::copy(msrc, msrc + tile_w, &t.mask(0, 0, y, 0));
      }
      tiles.push_back(std::move(t));
    }
  }
  return tiles;
}

Sample stitch(const std::vector<Sample>& tiles, const std::string& parent, int height, int width) {
  if (tiles.empty()) throw CoverageError("stitch: no tiles for " + parent);
  const int ch = tiles.front().image.c();
  Sample out;
  out.id = parent;
  out.image = Tensor<float>({1, ch, height, width});
  out.mask = Tensor<float>({1, 1, height, width});
  std::vector<std::uint8_t> covered(static_cast<std::size_t>(height) * width, 0);
  for (const Sample& t : tiles) {
    if (!t.origin) throw UsageError("stitch: tile " + t.id + " has no origin");
    if (t.image.c() != ch) throw ShapeError("stitch: tile " + t.id + " channel count differs");
    const int r = t.origin->row, c = t.origin->col;
    if (r < 0 || c < 0 || r + t.height() > height || c + t.width() > width) {
      throw ShapeError("stitch: tile " + t.id + " falls outside the " + std::to_string(height) + "x" +
                       std::to_string(width) + " parent");
    }
    for (int y = 0; y < t.height(); ++y) {
      for (int k = 0; k < ch; ++k) {
        const float* src = &t.image(0, k, y, 0);
        std::copy(src, src + t.width(), &out.image(0, k, r + y, c));
      }
      const float* msrc = &t.mask(0, 0, y, 0);
      std::copy(msrc, msrc + t.width(), &out.mask(0, 0, r + y, c));
      std::fill_n(covered.begin() + static_cast<std::ptrdiff_t>(r + y) * width + c, t.width(), 1);
    }
  }
  for (std::size_t i = 0; i < covered.size(); ++i) {
    if (!covered[i]) {
      throw CoverageError("stitch: pixel (" + std::to_string(i / width) + ", " + std::to_string(i % width) +
                          ") of " + parent + " is not covered by any tile");
    }
  }
  return out;
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const std::array<double, 3>& ratios) {
  double total = 0;
  for (double r : ratios) {
    if (!(r > 0) || !std::isfinite(r)) throw ConfigError("split ratios must be positive");
    total += r;
  }
  const auto share = [&](double r) { return static_cast<std::size_t>(std::llround(n * r / total)); };
  std::size_t val = share(ratios[1]), test = share(ratios[2]);
  // Rounding both shares up can overrun n; trim test first, then val.
  while (val + test > n) (test > 0 ? test : val) -= 1;
  return {n - val - test, val, test};
}

}  // namespace mapnet
