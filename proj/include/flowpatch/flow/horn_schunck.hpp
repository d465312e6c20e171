#pragma once

#include "flowpatch/diff/stage.hpp"
#include "flowpatch/flow/estimator.hpp"

namespace flowpatch::flow {

struct HornSchunckConfig {
  double alpha = 15.0;
  int iterations = 200;
  /// Grayscale is multiplied by this before differentiation, so alpha is
  /// expressed on the usual 0-255 intensity scale.
  double intensity_scale = 255.0;

  /// Throws ConfigError unless alpha > 0, iterations >= 1 and scale > 0.
  void validate() const;
};

/// Unrolled Jacobi Horn–Schunck: central differences averaged over both
/// frames, It = I2 - I1, zero initial flow, replicate boundaries.
FlowField horn_schunck(const Image& first, const Image& second, const HornSchunckConfig& cfg = {});

class HornSchunck final : public FlowEstimator {
 public:
  explicit HornSchunck(HornSchunckConfig cfg = {});
  std::string name() const override { return "horn_schunck"; }
  FlowField estimate(const Image& first, const Image& second) const override;
  void append_stages(diff::StageTape& tape) const override;
  const HornSchunckConfig& config() const { return cfg_; }

 private:
  HornSchunckConfig cfg_;
};

/// Stacked pair -> 5-channel solver state [Ix, Iy, It, u=0, v=0]. Linear.
class HsDerivativesStage final : public diff::Stage {
 public:
  explicit HsDerivativesStage(double intensity_scale) : scale_(intensity_scale) {}
  std::string name() const override { return "hs_derivatives"; }
  Raster forward(const Raster& input, diff::StageContext& ctx) const override;
  Raster backward(const diff::StageContext& ctx, const Raster& cotangent) const override;

 private:
  double scale_;
};

/// One Jacobi sweep over the 5-channel state.
class HsIterationStage final : public diff::Stage {
 public:
  explicit HsIterationStage(double alpha) : alpha2_(alpha * alpha) {}
  std::string name() const override { return "hs_iteration"; }
  Raster forward(const Raster& input, diff::StageContext& ctx) const override;
  Raster backward(const diff::StageContext& ctx, const Raster& cotangent) const override;

 private:
  double alpha2_;
};

/// 5-channel state -> (u, v).
class HsExtractFlowStage final : public diff::Stage {
 public:
  std::string name() const override { return "hs_extract_flow"; }
  Raster forward(const Raster& input, diff::StageContext& ctx) const override;
  Raster backward(const diff::StageContext& ctx, const Raster& cotangent) const override;
};

}  // namespace flowpatch::flow
