#include "mapnet/rng.hpp"

#include <cmath>
#include <numbers>

namespace mapnet {

namespace {

std::uint64_t mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t Rng::next_u64() {
  state_ += 0x9E3779B97F4A7C15ULL;
  return mix(state_);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (hi <= lo) return lo;
  const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
  const std::uint64_t limit = range == 0 ? 0 : (~std::uint64_t{0} / range) * range;
  std::uint64_t r = next_u64();
  if (range == 0) return lo + static_cast<std::int64_t>(r);
  while (r >= limit) r = next_u64();
  return lo + static_cast<std::int64_t>(r % range);
}

double Rng::normal(double mean, double stddev) {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  return mean + stddev * z;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : label) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return mix(seed ^ mix(h + 0x9E3779B97F4A7C15ULL));
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return mix(seed ^ mix(index + 0x9E3779B97F4A7C15ULL));
}

}  // namespace mapnet
