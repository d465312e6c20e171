#include "flowpatch/attack/placement.hpp"

#include <cmath>
#include <numbers>

#include "flowpatch/attack/patch.hpp"
#include "flowpatch/core/error.hpp"

namespace flowpatch::attack {

PlacementPlan plan_placement(int height, int width, int side, const PatchPose& pose) {
  if (!(pose.scale > 0.0)) throw ConfigError("patch scale must be positive");
  if (side < 1) throw ConfigError("patch side must be positive");

  PlacementPlan plan;
  plan.height = height;
  plan.width = width;
  plan.side = side;
  plan.footprint = PixelMask(height, width);

  const PixelMask valid = circular_mask(side);
  const double pivot = side / 2;
  const double radius = side / 2.0;
  const double theta = pose.rotation * std::numbers::pi / 180.0;
  const double cs = std::cos(theta), sn = std::sin(theta);
  const double reach = pose.scale * radius;

  const int r0 = static_cast<int>(std::floor(pose.row - reach)) - 1;
  const int r1 = static_cast<int>(std::ceil(pose.row + reach)) + 1;
  const int c0 = static_cast<int>(std::floor(pose.col - reach)) - 1;
  const int c1 = static_cast<int>(std::ceil(pose.col + reach)) + 1;

  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      // Inverse pose: image offset -> patch coordinates.
      const double dr = (r - pose.row) / pose.scale, dc = (c - pose.col) / pose.scale;
      const double pr = pivot + cs * dr - sn * dc;
      const double pc = pivot + sn * dr + cs * dc;
      if (std::hypot(pr - pivot, pc - pivot) >= radius) continue;
      if (r < 0 || r >= height || c < 0 || c >= width) {
        throw PlacementError("patch footprint leaves the " + std::to_string(height) + "x" + std::to_string(width) +
                             " frame at pixel (" + std::to_string(r) + "," + std::to_string(c) + ")");
      }

      PlacementPlan::Sample s;
      s.pixel = static_cast<std::uint32_t>(r * width + c);
      const int fr = static_cast<int>(std::floor(pr)), fc = static_cast<int>(std::floor(pc));
      const double ar = pr - fr, ac = pc - fc;
      const int tr[4] = {fr, fr, fr + 1, fr + 1};
      const int tc[4] = {fc, fc + 1, fc, fc + 1};
      const double tw[4] = {(1 - ar) * (1 - ac), (1 - ar) * ac, ar * (1 - ac), ar * ac};
      double total = 0.0;
      for (int k = 0; k < 4; ++k) {
        if (tw[k] == 0.0 || tr[k] < 0 || tr[k] >= side || tc[k] < 0 || tc[k] >= side) continue;
        if (!valid(tr[k], tc[k])) continue;
        s.source[s.taps] = static_cast<std::uint32_t>(tr[k] * side + tc[k]);
        s.weight[s.taps] = tw[k];
        total += tw[k];
        ++s.taps;
      }
      if (s.taps == 0) continue;
      for (int k = 0; k < s.taps; ++k) s.weight[k] /= total;
      plan.footprint.set(r, c);
      plan.samples.push_back(s);
    }
  }
  return plan;
}

Image composite(const Image& frame, const Image& patch_values, const PlacementPlan& plan) {
  require_same_shape(frame.shape(), {plan.height, plan.width, 3}, "composite frame");
  require_same_shape(patch_values.shape(), {plan.side, plan.side, 3}, "composite patch");
  Image out = frame;
  for (const auto& s : plan.samples) {
    for (int ch = 0; ch < 3; ++ch) {
      double v = 0.0;
      for (int k = 0; k < s.taps; ++k) v += s.weight[k] * patch_values[s.source[k] * 3 + ch];
      out[s.pixel * 3 + ch] = v;
    }
  }
  return out;
}

Raster composite_adjoint(const Raster& image_cotangent, const PlacementPlan& plan) {
  require_same_shape(image_cotangent.shape(), {plan.height, plan.width, 3}, "composite cotangent");
  Raster grad(plan.side, plan.side, 3);
  for (const auto& s : plan.samples) {
    for (int ch = 0; ch < 3; ++ch) {
      const double g = image_cotangent[s.pixel * 3 + ch];
      for (int k = 0; k < s.taps; ++k) grad[s.source[k] * 3 + ch] += s.weight[k] * g;
    }
  }
  return grad;
}

Placement place_patch(const Image& first, const Image& second, const Image& patch_values, const PatchPose& pose) {
  require_same_shape(first.shape(), second.shape(), "place_patch frames");
  PlacementPlan plan = plan_placement(first.height(), first.width(), patch_values.height(), pose);
  return {composite(first, patch_values, plan), composite(second, patch_values, plan), std::move(plan.footprint)};
}

PlacementStage::PlacementStage(Image first, Image second, PlacementPlan plan)
    : first_(std::move(first)), second_(std::move(second)), plan_(std::move(plan)) {
  require_same_shape(first_.shape(), second_.shape(), "placement frames");
}

Raster PlacementStage::forward(const Raster& input, diff::StageContext&) const {
  const Image patch(input);
  return stack_pair(composite(first_, patch, plan_), composite(second_, patch, plan_));
}

Raster PlacementStage::backward(const diff::StageContext&, const Raster& cotangent) const {
  const auto [a, b] = unstack_pair(cotangent);
  Raster grad = composite_adjoint(a, plan_);
  const Raster other = composite_adjoint(b, plan_);
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += other[i];
  return grad;
}

}  // namespace flowpatch::attack
