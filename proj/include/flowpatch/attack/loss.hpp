#pragma once

#include <string>
#include <string_view>

#include "flowpatch/core/raster.hpp"
#include "flowpatch/defense/detection.hpp"
#include "flowpatch/diff/stage.hpp"

namespace flowpatch::attack {

/// Flows with a norm below this contribute zero similarity.
inline constexpr double kAcsEpsilon = 1e-9;

/// Mean cosine similarity between `reference` and `attacked` over the pixels
/// outside `exclude`. Guarded pixels count in the mean with similarity 0.
/// Throws DomainError if `exclude` covers every pixel.
double acs_loss(const FlowField& reference, const FlowField& attacked, const PixelMask& exclude);

/// Attacked flow -> 1×1×1 ACS, for a fixed reference flow and exclusion mask.
class AcsLossStage final : public diff::Stage {
 public:
  AcsLossStage(FlowField reference, PixelMask exclude);
  std::string name() const override { return "acs_loss"; }
  Raster forward(const Raster& input, diff::StageContext& ctx) const override;
  Raster backward(const diff::StageContext& ctx, const Raster& cotangent) const override;

 private:
  FlowField reference_;
  PixelMask exclude_;
  double count_;
};

/// Sum over valid patch pixels and channels of the per-channel derivative
/// magnitude, with the defense stencils (forward-difference gradient norm or
/// absolute 5-point Laplacian, replicate boundary).
double patch_penalty(const Image& values, const PixelMask& validity, defense::DerivativeOrder order);

/// Patch values -> 1×1×1 penalty. Subgradient 0 where a magnitude is 0.
class PenaltyStage final : public diff::Stage {
 public:
  PenaltyStage(PixelMask validity, defense::DerivativeOrder order)
      : validity_(std::move(validity)), order_(order) {}
  std::string name() const override { return "patch_penalty"; }
  Raster forward(const Raster& input, diff::StageContext& ctx) const override;
  Raster backward(const diff::StageContext& ctx, const Raster& cotangent) const override;

 private:
  PixelMask validity_;
  defense::DerivativeOrder order_;
};

/// vanilla: plain ACS. lgs / ilp: ACS plus alpha times the first / second
/// order patch penalty.
enum class Awareness { vanilla, lgs, ilp };

std::string to_string(Awareness awareness);
Awareness parse_awareness(std::string_view text);

struct LossTerms {
  double acs = 0.0;
  double penalty = 0.0;
  double total = 0.0;
};

LossTerms attack_loss(const FlowField& reference, const FlowField& attacked, const PixelMask& exclude,
                      const Image& patch_values, const PixelMask& validity, Awareness awareness, double alpha);

/// Penalty order used by an awareness mode; vanilla has none.
defense::DerivativeOrder penalty_order(Awareness awareness);

}  // namespace flowpatch::attack
