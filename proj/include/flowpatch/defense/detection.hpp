#pragma once

#include "flowpatch/core/raster.hpp"

namespace flowpatch::defense {

enum class DerivativeOrder { first, second };

/// Derivative magnitude of the grayscale image: first order is the norm of
/// the forward-difference gradient, second order the absolute 5-point
/// Laplacian. Replicate boundaries.
GradientMap gradient_magnitude(const Image& image, DerivativeOrder order);

/// (G - min) / (max - min); a constant map normalizes to all zeros.
GradientMap normalize_map(const GradientMap& map);

/// Marks every pixel that lies in at least one K×K block (stride K-O,
/// border-clamped) whose mean normalized gradient is strictly above t.
/// Throws ConfigError if K exceeds a side of the map.
PixelMask block_vote_mask(const GradientMap& normalized, int block_size, int overlap, double threshold);

/// Keeps a candidate only where s·Ḡ > t.
PixelMask ilp_reevaluate(const PixelMask& candidates, const GradientMap& normalized, double scale, double threshold);

}  // namespace flowpatch::defense
