#include "mapnet/scene.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "mapnet/errors.hpp"
#include "mapnet/rng.hpp"

namespace mapnet {

void SceneSpec::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("scene: " + msg); };
  if (height < 1 || width < 1) fail("height and width must be positive");
  if (min_buildings < 0 || max_buildings < min_buildings) fail("building count range must satisfy 0 <= min <= max");
  if (min_scale < 3) fail("min_scale must be at least 3 pixels, got " + std::to_string(min_scale));
  if (max_scale < min_scale) fail("max_scale must be at least min_scale");
  double mix = 0;
  for (double m : shape_mix) {
    if (m < 0) fail("shape_mix weights must be non-negative");
    mix += m;
  }
  if (!(mix > 0)) fail("shape_mix needs a positive weight");
  if (!(0 <= bg_low && bg_low <= bg_high && bg_high <= 1)) fail("background range must lie in [0,1]");
  if (!(0 <= fg_low && fg_low <= fg_high && fg_high <= 1)) fail("foreground range must lie in [0,1]");
  if (bg_cell < 1) fail("bg_cell must be positive");
  if (noise < 0) fail("noise must be non-negative");
  if (!(0 <= min_fg_fraction && min_fg_fraction <= max_fg_fraction && max_fg_fraction <= 1)) {
    fail("foreground band must satisfy 0 <= min <= max <= 1");
  }
  if (max_retries < 1) fail("max_retries must be positive");
}

namespace {

float quantize(double v) {
  v = std::clamp(v, 0.0, 1.0);
  return static_cast<float>(std::round(v * 255.0) / 255.0);
}

struct Building {
  ShapeKind kind;
  double cy, cx;     // centre
  double hy, hx;     // half extents
  double angle;      // rotated rectangle only
  int notch;         // L-shape: quadrant removed
  double ny, nx;     // L-shape: removed fraction of each half extent
  std::array<double, 3> colour;

  [[nodiscard]] bool contains(double y, double x) const {
    double dy = y - cy, dx = x - cx;
    if (kind == ShapeKind::rotated_rectangle) {
      const double c = std::cos(angle), s = std::sin(angle);
      const double ry = c * dy - s * dx;
      const double rx = s * dy + c * dx;
      dy = ry;
      dx = rx;
    }
    if (std::abs(dy) > hy || std::abs(dx) > hx) return false;
    if (kind != ShapeKind::l_shape) return true;
    // Remove a corner block: quadrant bit 0 picks bottom, bit 1 picks right.
    const double sy = (notch & 1) ? dy : -dy;
    const double sx = (notch & 2) ? dx : -dx;
    return !(sy > hy * (1.0 - 2.0 * ny) && sx > hx * (1.0 - 2.0 * nx));
  }
};

ShapeKind pick_shape(const std::array<double, 3>& mix, Rng& rng) {
  const double total = mix[0] + mix[1] + mix[2];
  double u = rng.uniform() * total;
  for (int k = 0; k < 2; ++k) {
    if (u < mix[k]) return static_cast<ShapeKind>(k);
    u -= mix[k];
  }
  return mix[2] > 0 ? ShapeKind::l_shape : (mix[1] > 0 ? ShapeKind::rotated_rectangle : ShapeKind::rectangle);
}

Sample draw_scene(const SceneSpec& spec, Rng& rng) {
  const int h = spec.height, w = spec.width;
  Sample s;
  s.id = spec.id;
  s.image = Tensor<float>({1, 3, h, w});
  s.mask = Tensor<float>({1, 1, h, w});

  // Coarse background grid with one extra node so the last cell interpolates.
  const int gh = h / spec.bg_cell + 2, gw = w / spec.bg_cell + 2;
  std::vector<double> grid(static_cast<std::size_t>(3) * gh * gw);
  for (double& g : grid) g = rng.uniform(spec.bg_low, spec.bg_high);
  std::vector<double> img(static_cast<std::size_t>(3) * h * w);
  for (int c = 0; c < 3; ++c) {
    const double* gc = grid.data() + static_cast<std::size_t>(c) * gh * gw;
    for (int y = 0; y < h; ++y) {
      const double fy = (y + 0.5) / spec.bg_cell;
      const int y0 = static_cast<int>(fy);
      const double ly = fy - y0;
      for (int x = 0; x < w; ++x) {
        const double fx = (x + 0.5) / spec.bg_cell;
        const int x0 = static_cast<int>(fx);
        const double lx = fx - x0;
        const double a = gc[y0 * gw + x0], b = gc[y0 * gw + x0 + 1];
        const double d = gc[(y0 + 1) * gw + x0], e = gc[(y0 + 1) * gw + x0 + 1];
        img[(static_cast<std::size_t>(c) * h + y) * w + x] =
            (1 - ly) * ((1 - lx) * a + lx * b) + ly * ((1 - lx) * d + lx * e);
      }
    }
  }

  const auto count = rng.uniform_int(spec.min_buildings, spec.max_buildings);
  for (std::int64_t k = 0; k < count; ++k) {
    Building b{};
    b.kind = pick_shape(spec.shape_mix, rng);
    b.hy = rng.uniform_int(spec.min_scale, spec.max_scale) / 2.0;
    b.hx = rng.uniform_int(spec.min_scale, spec.max_scale) / 2.0;
    b.cy = rng.uniform(0.0, h);
    b.cx = rng.uniform(0.0, w);
    b.angle = rng.uniform(0.0, std::numbers::pi);
    b.notch = static_cast<int>(rng.uniform_int(0, 3));
    b.ny = rng.uniform(0.25, 0.5);
    b.nx = rng.uniform(0.25, 0.5);
    for (double& c : b.colour) c = rng.uniform(spec.fg_low, spec.fg_high);
    const double reach = std::hypot(b.hy, b.hx) + 1;
    const int y_lo = std::max(0, static_cast<int>(std::floor(b.cy - reach)));
    const int y_hi = std::min(h - 1, static_cast<int>(std::ceil(b.cy + reach)));
    const int x_lo = std::max(0, static_cast<int>(std::floor(b.cx - reach)));
    const int x_hi = std::min(w - 1, static_cast<int>(std::ceil(b.cx + reach)));
    for (int y = y_lo; y <= y_hi; ++y) {
      for (int x = x_lo; x <= x_hi; ++x) {
        if (!b.contains(y + 0.5, x + 0.5)) continue;
        s.mask(0, 0, y, x) = 1.0f;
        for (int c = 0; c < 3; ++c) img[(static_cast<std::size_t>(c) * h + y) * w + x] = b.colour[c];
      }
    }
  }

  // Texture noise on every pixel, drawn in a fixed raster order.
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double n = spec.noise > 0 ? rng.uniform(-spec.noise, spec.noise) : 0.0;
    s.image[i] = quantize(img[i] + n);
  }
  return s;
}

}  // namespace

Sample generate_scene(const SceneSpec& spec) {
  spec.validate();
  double last = 0;
  for (int attempt = 0; attempt < spec.max_retries; ++attempt) {
    Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(attempt)));
    Sample s = draw_scene(spec, rng);
    if (spec.max_buildings == 0) return s;
    last = s.foreground_fraction();
    if (last >= spec.min_fg_fraction && last <= spec.max_fg_fraction) return s;
  }
  throw GenerationError("scene " + spec.id + ": foreground fraction stayed outside [" +
                        std::to_string(spec.min_fg_fraction) + ", " + std::to_string(spec.max_fg_fraction) +
                        "] after " + std::to_string(spec.max_retries) + " attempts (last " +
                        std::to_string(last) + ")");
}

}  // namespace mapnet
