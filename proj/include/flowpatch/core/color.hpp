#pragma once

#include <optional>

#include "flowpatch/core/raster.hpp"

namespace flowpatch {

/// Middlebury color-wheel rendering. Hue encodes direction, saturation the
/// magnitude relative to `max_magnitude` (clamped to 1); zero flow is white.
/// Without an explicit maximum the largest magnitude in the field is used.
Image flow_to_color(const FlowField& flow, std::optional<double> max_magnitude = std::nullopt);

}  // namespace flowpatch
