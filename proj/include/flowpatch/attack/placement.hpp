#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "flowpatch/core/raster.hpp"
#include "flowpatch/diff/stage.hpp"

namespace flowpatch::attack {

/// Where and how a patch lands: the patch pivot maps to `center` (row, col in
/// image pixels), rotated by `rotation` degrees and scaled by `scale`.
struct PatchPose {
  double row = 0.0;
  double col = 0.0;
  double rotation = 0.0;
  double scale = 1.0;
};

/// Precomputed bilinear resampling of a patch into an image: for each covered
/// image pixel, up to four weighted patch taps (valid patch pixels only,
/// weights renormalized to sum 1).
struct PlacementPlan {
  struct Sample {
    std::uint32_t pixel = 0;
    std::uint8_t taps = 0;
    std::array<std::uint32_t, 4> source{};
    std::array<double, 4> weight{};
  };

  int height = 0;
  int width = 0;
  int side = 0;
  PixelMask footprint;
  std::vector<Sample> samples;
};

/// Throws PlacementError if any footprint pixel falls outside the image and
/// ConfigError for a non-positive scale.
PlacementPlan plan_placement(int height, int width, int side, const PatchPose& pose);

/// Frame with the footprint pixels replaced by resampled patch values.
Image composite(const Image& frame, const Image& patch_values, const PlacementPlan& plan);
/// Transpose of `composite` with respect to the patch values.
Raster composite_adjoint(const Raster& image_cotangent, const PlacementPlan& plan);

struct Placement {
  Image first;
  Image second;
  PixelMask footprint;
};

/// Static patch: the same pose in both frames. Frames must be RGB.
Placement place_patch(const Image& first, const Image& second, const Image& patch_values, const PatchPose& pose);

/// Patch values -> stacked attacked pair, for fixed frames and plan. Linear.
class PlacementStage final : public diff::Stage {
 public:
  PlacementStage(Image first, Image second, PlacementPlan plan);
  std::string name() const override { return "placement"; }
  Raster forward(const Raster& input, diff::StageContext& ctx) const override;
  Raster backward(const diff::StageContext& ctx, const Raster& cotangent) const override;

 private:
  Image first_, second_;
  PlacementPlan plan_;
};

}  // namespace flowpatch::attack
