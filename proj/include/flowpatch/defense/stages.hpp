#pragma once

// Defense steps as tape stages. Derivative maps and normalization carry their
// true gradients; voting, the ILP threshold and inpainting are BPDA stages
// whose reverse passes follow fixed surrogate rules:
//   block vote       identity (the mask is treated as dM = 1)
//   ILP threshold    identity
//   Telea inpaint    cotangent kept at untouched pixels, zeroed at filled ones
// The LGS clip uses diff::ClipStage.

#include "flowpatch/defense/config.hpp"
#include "flowpatch/defense/detection.hpp"
#include "flowpatch/diff/stage.hpp"

namespace flowpatch::defense {

/// Image (1 or 3 channels) -> single-channel derivative magnitude. Subgradient
/// 0 wherever the magnitude is 0.
class GradientMagnitudeStage final : public diff::Stage {
 public:
  explicit GradientMagnitudeStage(DerivativeOrder order) : order_(order) {}
  std::string name() const override;
  Raster forward(const Raster& input, diff::StageContext& ctx) const override;
  Raster backward(const diff::StageContext& ctx, const Raster& cotangent) const override;

 private:
  DerivativeOrder order_;
};

/// Min-max normalization, differentiated through the arg-min and arg-max
/// pixels. A constant map has zero output and zero gradient.
class NormalizeStage final : public diff::Stage {
 public:
  std::string name() const override { return "normalize"; }
  Raster forward(const Raster& input, diff::StageContext& ctx) const override;
  Raster backward(const diff::StageContext& ctx, const Raster& cotangent) const override;
};

/// Normalized map -> 0/1 mask raster.
class BlockVoteStage final : public diff::Stage {
 public:
  BlockVoteStage(int block_size, int overlap, double threshold)
      : block_size_(block_size), overlap_(overlap), threshold_(threshold) {}
  std::string name() const override { return "block_vote"; }
  diff::GradientKind gradient_kind() const override { return diff::GradientKind::bpda_surrogate; }
  Raster forward(const Raster& input, diff::StageContext& ctx) const override;
  Raster backward(const diff::StageContext& ctx, const Raster& cotangent) const override;

 private:
  int block_size_, overlap_;
  double threshold_;
};

/// Candidate mask raster -> re-evaluated mask raster, against a fixed
/// normalized second-order map.
class IlpThresholdStage final : public diff::Stage {
 public:
  IlpThresholdStage(GradientMap normalized, double scale, double threshold)
      : normalized_(std::move(normalized)), scale_(scale), threshold_(threshold) {}
  std::string name() const override { return "ilp_threshold"; }
  diff::GradientKind gradient_kind() const override { return diff::GradientKind::bpda_surrogate; }
  Raster forward(const Raster& input, diff::StageContext& ctx) const override;
  Raster backward(const diff::StageContext& ctx, const Raster& cotangent) const override;

 private:
  GradientMap normalized_;
  double scale_, threshold_;
};

/// Inpaints a fixed mask.
class TeleaInpaintStage final : public diff::Stage {
 public:
  TeleaInpaintStage(PixelMask mask, int radius) : mask_(std::move(mask)), radius_(radius) {}
  std::string name() const override { return "telea_inpaint"; }
  diff::GradientKind gradient_kind() const override { return diff::GradientKind::bpda_surrogate; }
  Raster forward(const Raster& input, diff::StageContext& ctx) const override;
  Raster backward(const diff::StageContext& ctx, const Raster& cotangent) const override;

 private:
  PixelMask mask_;
  int radius_;
};

/// The whole defense on one image. Forward equals defend(); backward chains
/// the sub-stage rules. For ILP that collapses to g·(1 - M_ILP); for LGS the
/// darkening factor is differentiated through clip, the (identity) mask and
/// the exact normalized map.
class DefenseStage final : public diff::Stage {
 public:
  explicit DefenseStage(DefenseConfig cfg);
  std::string name() const override;
  diff::GradientKind gradient_kind() const override { return diff::GradientKind::bpda_surrogate; }
  Raster forward(const Raster& input, diff::StageContext& ctx) const override;
  Raster backward(const diff::StageContext& ctx, const Raster& cotangent) const override;

  const DefenseConfig& config() const { return cfg_; }
  /// Final mask of a recorded forward pass.
  static PixelMask mask(const diff::StageContext& ctx);

 private:
  Raster forward_lgs(const Image& image, diff::StageContext& ctx) const;
  Raster forward_ilp(const Image& image, diff::StageContext& ctx) const;

  DefenseConfig cfg_;
};

/// DefenseStage applied independently to both halves of a stacked frame pair.
class PairDefenseStage final : public diff::Stage {
 public:
  explicit PairDefenseStage(DefenseConfig cfg) : single_(std::move(cfg)) {}
  std::string name() const override { return "pair_" + single_.name(); }
  diff::GradientKind gradient_kind() const override { return diff::GradientKind::bpda_surrogate; }
  Raster forward(const Raster& input, diff::StageContext& ctx) const override;
  Raster backward(const diff::StageContext& ctx, const Raster& cotangent) const override;

 private:
  DefenseStage single_;
};

}  // namespace flowpatch::defense
