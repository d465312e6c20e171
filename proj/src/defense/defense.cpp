#include "flowpatch/defense/defense.hpp"

#include "flowpatch/defense/detection.hpp"
#include "flowpatch/defense/removal.hpp"

namespace flowpatch::defense {
namespace {

struct Detection {
  GradientMap normalized;
  PixelMask mask;
};

Detection run_detection(const Image& image, const DefenseConfig& cfg) {
  const auto order = cfg.kind == DefenseKind::lgs ? DerivativeOrder::first : DerivativeOrder::second;
  GradientMap gbar = normalize_map(gradient_magnitude(image, order));
  PixelMask mask = block_vote_mask(gbar, cfg.block_size, cfg.overlap, cfg.threshold);
  if (cfg.kind == DefenseKind::ilp) mask = ilp_reevaluate(mask, gbar, cfg.s_ilp, cfg.t_ilp);
  return {std::move(gbar), std::move(mask)};
}

}  // namespace

PixelMask detect(const Image& image, const DefenseConfig& cfg) {
  cfg.validate();
  return run_detection(image, cfg).mask;
}

DefenseResult defend(const Image& image, const DefenseConfig& cfg) {
  cfg.validate();
  Detection det = run_detection(image, cfg);
  if (cfg.kind == DefenseKind::lgs) {
    return {lgs_smooth(image, det.normalized, det.mask, cfg.b_lgs), std::move(det.mask)};
  }
  return {telea_inpaint(image, det.mask, cfg.r_telea), std::move(det.mask)};
}

}  // namespace flowpatch::defense
