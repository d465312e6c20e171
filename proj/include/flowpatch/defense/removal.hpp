#pragma once

#include "flowpatch/core/raster.hpp"

namespace flowpatch::defense {

/// I · (1 - clip(b·Ḡ·M, 0, 1)), the same factor applied to every channel.
Image lgs_smooth(const Image& image, const GradientMap& normalized, const PixelMask& mask, double b_lgs);

/// Fast-marching inpainting of the masked pixels. Pixels are filled in order
/// of increasing distance from the mask boundary (ties broken row-major),
/// each as a normalized weighted mean of already known pixels within
/// `radius`, weighted by direction, inverse squared distance and level-set
/// proximity. Unmasked pixels are returned untouched.
/// Throws DomainError if the mask covers every pixel.
Image telea_inpaint(const Image& image, const PixelMask& mask, int radius);

}  // namespace flowpatch::defense
