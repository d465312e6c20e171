#include "flowpatch/defense/detection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "flowpatch/kernels/stencil.hpp"

namespace flowpatch::defense {

GradientMap gradient_magnitude(const Image& image, DerivativeOrder order) {
  const kernels::Extent e{image.height(), image.width()};
  const std::vector<double> gray = to_grayscale(image);
  GradientMap out(image.height(), image.width());
  if (order == DerivativeOrder::first) {
    kernels::omp::forward_gradient_magnitude(e, gray, out.values());
  } else {
    kernels::omp::laplacian(e, gray, out.values());
    for (double& v : out.values()) v = std::abs(v);
  }
  return out;
}

GradientMap normalize_map(const GradientMap& map) {
  GradientMap out(map.height(), map.width());
  if (map.empty()) return out;
  const auto [lo, hi] = std::minmax_element(map.values().begin(), map.values().end());
  const double range = *hi - *lo;
  if (range == 0.0) return out;
  const double lo_value = *lo;
  for (std::size_t i = 0; i < map.size(); ++i) out[i] = (map[i] - lo_value) / range;
  return out;
}

PixelMask block_vote_mask(const GradientMap& normalized, int block_size, int overlap, double threshold) {
  PixelMask mask(normalized.height(), normalized.width());
  std::vector<std::uint8_t> bits(mask.pixels());
  kernels::omp::block_vote({normalized.height(), normalized.width()}, normalized.values(), block_size, overlap,
                           threshold, bits);
  for (std::size_t i = 0; i < bits.size(); ++i) mask.set(i, bits[i] != 0);
  return mask;
}

PixelMask ilp_reevaluate(const PixelMask& candidates, const GradientMap& normalized, double scale,
                         double threshold) {
  require_same_shape({candidates.height(), candidates.width(), 1}, normalized.shape(), "ilp_reevaluate");
  PixelMask out(candidates.height(), candidates.width());
  for (std::size_t i = 0; i < out.pixels(); ++i) {
    const double scaled = std::min(scale * normalized[i], std::numeric_limits<double>::infinity());
    out.set(i, candidates.test(i) && scaled > threshold);
  }
  return out;
}

}  // namespace flowpatch::defense
