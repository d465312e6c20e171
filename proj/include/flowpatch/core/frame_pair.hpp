#pragma once

#include <optional>
#include <string>
#include <vector>

#include "flowpatch/core/raster.hpp"

namespace flowpatch {

/// Two consecutive frames with optional ground truth. `valid` marks the
/// pixels where sparse ground truth is defined.
struct FramePair {
  std::string id;
  Image first;
  Image second;
  std::optional<FlowField> ground_truth;
  std::optional<PixelMask> valid;
};

using Dataset = std::vector<FramePair>;

}  // namespace flowpatch
