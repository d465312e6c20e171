#pragma once

#include "flowpatch/core/raster.hpp"
#include "flowpatch/defense/config.hpp"

namespace flowpatch::defense {

struct DefenseResult {
  Image image;
  /// Final mask: the vote mask for LGS, the re-evaluated mask for ILP.
  PixelMask mask;
};

/// Full detect-and-remove pass. LGS votes on the normalized first-order map
/// and darkens; ILP votes on the normalized second-order map, re-evaluates
/// the candidates pixel-wise and inpaints them.
DefenseResult defend(const Image& image, const DefenseConfig& cfg);

/// Detection only: the mask `defend` would return.
PixelMask detect(const Image& image, const DefenseConfig& cfg);

}  // namespace flowpatch::defense
