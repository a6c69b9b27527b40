#include "mapnet/sample.hpp"

namespace mapnet {

double Sample::foreground_fraction() const {
  std::size_t fg = 0;
  for (float v : mask.data()) fg += v > 0.5f ? 1 : 0;
  return static_cast<double>(fg) / static_cast<double>(mask.size());
}

}  // namespace mapnet
