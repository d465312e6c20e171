#pragma once

#include "flowpatch/diff/stage.hpp"

namespace flowpatch::diff {

/// x -> k x
class ScaleStage final : public Stage {
 public:
  explicit ScaleStage(double factor) : factor_(factor) {}
  std::string name() const override { return "scale"; }
  Raster forward(const Raster& input, StageContext& ctx) const override;
  Raster backward(const StageContext& ctx, const Raster& cotangent) const override;

 private:
  double factor_;
};

/// x -> tanh(x)
class TanhStage final : public Stage {
 public:
  std::string name() const override { return "tanh"; }
  Raster forward(const Raster& input, StageContext& ctx) const override;
  Raster backward(const StageContext& ctx, const Raster& cotangent) const override;
};

/// x -> clip(x, 0, 1). Backward passes the cotangent where the pre-clip value
/// lies in [0,1] and zeroes it elsewhere, which is the true derivative away
/// from the two kinks.
class ClipStage final : public Stage {
 public:
  std::string name() const override { return "clip"; }
  Raster forward(const Raster& input, StageContext& ctx) const override;
  Raster backward(const StageContext& ctx, const Raster& cotangent) const override;
};

/// Per-channel signed 5-point Laplacian with replicate boundary. Linear.
class LaplacianStage final : public Stage {
 public:
  std::string name() const override { return "laplacian"; }
  Raster forward(const Raster& input, StageContext& ctx) const override;
  Raster backward(const StageContext& ctx, const Raster& cotangent) const override;
};

/// Per-channel 4-neighbour mean with replicate boundary. Linear.
class NeighborAverageStage final : public Stage {
 public:
  std::string name() const override { return "neighbor_average"; }
  Raster forward(const Raster& input, StageContext& ctx) const override;
  Raster backward(const StageContext& ctx, const Raster& cotangent) const override;
};

/// Applies a per-plane kernel to every channel of a raster.
template <typename Kernel>
Raster map_planes(const Raster& input, Kernel kernel) {
  Raster out(input.height(), input.width(), input.channels());
  std::vector<double> result(input.shape().pixels());
  for (int ch = 0; ch < input.channels(); ++ch) {
    const std::vector<double> plane = input.plane(ch);
    kernel(std::span<const double>(plane), std::span<double>(result));
    out.set_plane(ch, result);
  }
  return out;
}

}  // namespace flowpatch::diff
