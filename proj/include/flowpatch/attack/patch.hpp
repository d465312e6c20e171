#pragma once

#include <string>
#include <string_view>

#include "flowpatch/core/raster.hpp"
#include "flowpatch/core/rng.hpp"
#include "flowpatch/diff/stage.hpp"

namespace flowpatch::attack {

/// clip: the parameter is the patch itself, clamped after each step.
/// cov:  the parameter is w with P = (tanh(w) + 1) / 2.
enum class BoxMode { clip, cov };

std::string to_string(BoxMode box);
BoxMode parse_box_mode(std::string_view text);

/// Pixels of a side×side raster strictly closer than side/2 to the pivot
/// (floor(side/2), floor(side/2)).
PixelMask circular_mask(int side);

/// Square RGB patch with a circular validity mask.
class Patch {
 public:
  Patch(Raster parameter, BoxMode box);

  /// Encodes values in [0,1]; for cov they are first pulled into
  /// [1e-6, 1 - 1e-6] so that w stays finite.
  static Patch from_values(const Image& values, BoxMode box);
  /// Uniform random values in [0,1].
  static Patch random(int side, BoxMode box, Rng& rng);

  int side() const { return parameter_.height(); }
  BoxMode box() const { return box_; }
  const Raster& parameter() const { return parameter_; }
  Raster& parameter() { return parameter_; }
  const PixelMask& validity() const { return validity_; }

  /// Materialized values, always in [0,1].
  Image values() const;

 private:
  Raster parameter_;
  BoxMode box_;
  PixelMask validity_;
};

/// Black/white checkerboard with square cells of `cell` pixels, top-left
/// cell black. Throws ConfigError unless side >= 2 and 1 <= cell <= side/2.
Patch manual_patch(int side, int cell = 1);

/// w -> (tanh(w) + 1) / 2
class CovStage final : public diff::Stage {
 public:
  std::string name() const override { return "cov"; }
  Raster forward(const Raster& input, diff::StageContext& ctx) const override;
  Raster backward(const diff::StageContext& ctx, const Raster& cotangent) const override;
};

}  // namespace flowpatch::attack
