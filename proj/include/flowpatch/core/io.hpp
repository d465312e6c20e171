#pragma once

#include <filesystem>

#include "flowpatch/core/raster.hpp"

namespace flowpatch {

/// Middlebury magic, stored as a little-endian float32.
inline constexpr float kFloMagic = 202021.25f;

/// Reads a Middlebury .flo file. Throws FormatError on a bad magic or
/// nonsensical dimensions and IoError on a missing or truncated file.
FlowField read_flo(const std::filesystem::path& path);
void write_flo(const FlowField& flow, const std::filesystem::path& path);

/// Binary P6 PPM with maxval 255. Bytes map to [0,1] by v/255.
Image read_ppm(const std::filesystem::path& path);
/// Writes a 3-channel image, quantizing by round(v*255) clamped to [0,255].
void write_ppm(const Image& image, const std::filesystem::path& path);

/// Mask as a black/white PPM; reading treats any nonzero red byte as set.
void write_mask_ppm(const PixelMask& mask, const std::filesystem::path& path);
PixelMask read_mask_ppm(const std::filesystem::path& path);

/// Replicates a 1-channel image to 3 channels; 3-channel images pass through.
Image to_rgb(const Image& image);

/// Rounds every value to the nearest multiple of 1/255 (what a PPM round trip keeps).
Image quantize_8bit(const Image& image);

}  // namespace flowpatch
