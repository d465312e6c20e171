#include "flowpatch/defense/stages.hpp"

#include <algorithm>
#include <cmath>

#include "flowpatch/core/error.hpp"
#include "flowpatch/defense/removal.hpp"
#include "flowpatch/diff/basic_stages.hpp"
#include "flowpatch/kernels/stencil.hpp"

namespace flowpatch::defense {
namespace {

Raster single_channel(int height, int width, std::vector<double> values) {
  return Raster({height, width, 1}, std::move(values));
}

// Spreads a grayscale cotangent back onto the image channels.
Raster grayscale_adjoint(const Shape& image_shape, std::span<const double> gray_cot) {
  Raster out(image_shape.height, image_shape.width, image_shape.channels);
  if (image_shape.channels == 1) {
    std::copy(gray_cot.begin(), gray_cot.end(), out.values().begin());
    return out;
  }
  for (std::size_t i = 0; i < gray_cot.size(); ++i) {
    out[3 * i] = kLumaR * gray_cot[i];
    out[3 * i + 1] = kLumaG * gray_cot[i];
    out[3 * i + 2] = kLumaB * gray_cot[i];
  }
  return out;
}

}  // namespace

std::string GradientMagnitudeStage::name() const {
  return order_ == DerivativeOrder::first ? "gradient_magnitude" : "laplacian_magnitude";
}

Raster GradientMagnitudeStage::forward(const Raster& input, diff::StageContext& ctx) const {
  Image image(input);
  ctx.saved = {single_channel(input.height(), input.width(), to_grayscale(input))};
  return gradient_magnitude(image, order_);
}

Raster GradientMagnitudeStage::backward(const diff::StageContext& ctx, const Raster& cotangent) const {
  const Raster& gray = ctx.saved.at(0);
  const kernels::Extent e{gray.height(), gray.width()};
  std::vector<double> gray_cot(e.pixels());
  if (order_ == DerivativeOrder::first) {
    kernels::omp::forward_gradient_magnitude_adjoint(e, gray.values(), cotangent.values(), gray_cot);
  } else {
    std::vector<double> lap(e.pixels());
    kernels::omp::laplacian(e, gray.values(), lap);
    for (std::size_t i = 0; i < lap.size(); ++i) {
      const double sign = lap[i] > 0.0 ? 1.0 : (lap[i] < 0.0 ? -1.0 : 0.0);
      lap[i] = sign * cotangent[i];
    }
    kernels::omp::laplacian(e, lap, gray_cot);
  }
  return grayscale_adjoint(ctx.input_shape, gray_cot);
}

Raster NormalizeStage::forward(const Raster& input, diff::StageContext& ctx) const {
  GradientMap out = normalize_map(GradientMap(input));
  ctx.saved = {input, out};
  return out;
}

Raster NormalizeStage::backward(const diff::StageContext& ctx, const Raster& cotangent) const {
  const Raster& x = ctx.saved.at(0);
  const Raster& y = ctx.saved.at(1);
  Raster grad(x.height(), x.width(), 1);
  if (x.empty()) return grad;
  const auto [lo, hi] = std::minmax_element(x.values().begin(), x.values().end());
  const double range = *hi - *lo;
  if (range == 0.0) return grad;
  const auto lo_index = static_cast<std::size_t>(lo - x.values().begin());
  const auto hi_index = static_cast<std::size_t>(hi - x.values().begin());
  double to_lo = 0.0, to_hi = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    grad[i] = cotangent[i] / range;
    to_lo += cotangent[i] * (y[i] - 1.0);
    to_hi -= cotangent[i] * y[i];
  }
  grad[lo_index] += to_lo / range;
  grad[hi_index] += to_hi / range;
  return grad;
}

Raster BlockVoteStage::forward(const Raster& input, diff::StageContext&) const {
  return block_vote_mask(GradientMap(input), block_size_, overlap_, threshold_).to_raster();
}

Raster BlockVoteStage::backward(const diff::StageContext&, const Raster& cotangent) const { return cotangent; }

Raster IlpThresholdStage::forward(const Raster& input, diff::StageContext&) const {
  return ilp_reevaluate(PixelMask::from_raster(input), normalized_, scale_, threshold_).to_raster();
}

Raster IlpThresholdStage::backward(const diff::StageContext&, const Raster& cotangent) const { return cotangent; }

Raster TeleaInpaintStage::forward(const Raster& input, diff::StageContext&) const {
  return telea_inpaint(Image(input), mask_, radius_);
}

Raster TeleaInpaintStage::backward(const diff::StageContext&, const Raster& cotangent) const {
  require_same_shape({mask_.height(), mask_.width(), cotangent.channels()}, cotangent.shape(), "telea backward");
  Raster out = cotangent;
  const int C = cotangent.channels();
  for (std::size_t p = 0; p < mask_.pixels(); ++p) {
    if (!mask_.test(p)) continue;
    for (int ch = 0; ch < C; ++ch) out[p * C + ch] = 0.0;
  }
  return out;
}

DefenseStage::DefenseStage(DefenseConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

std::string DefenseStage::name() const { return "defense_" + to_string(cfg_.kind); }

PixelMask DefenseStage::mask(const diff::StageContext& ctx) {
  if (ctx.saved.empty()) throw StateError("defense stage context holds no forward pass");
  return PixelMask::from_raster(ctx.saved.front());
}

Raster DefenseStage::forward(const Raster& input, diff::StageContext& ctx) const {
  Image image(input);
  ctx.children.assign(cfg_.kind == DefenseKind::lgs ? 4 : 5, {});
  return cfg_.kind == DefenseKind::lgs ? forward_lgs(image, ctx) : forward_ilp(image, ctx);
}

// saved = {mask, image, normalized map, clipped factor}
Raster DefenseStage::forward_lgs(const Image& image, diff::StageContext& ctx) const {
  auto& ch = ctx.children;
  const GradientMagnitudeStage magnitude(DerivativeOrder::first);
  const NormalizeStage normalize;
  const BlockVoteStage vote(cfg_.block_size, cfg_.overlap, cfg_.threshold);
  const diff::ClipStage clip;

  ch[0].input_shape = image.shape();
  const Raster g = magnitude.forward(image, ch[0]);
  ch[1].input_shape = g.shape();
  Raster gbar = normalize.forward(g, ch[1]);
  ch[2].input_shape = gbar.shape();
  Raster m = vote.forward(gbar, ch[2]);

  Raster z(gbar.height(), gbar.width(), 1);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = cfg_.b_lgs * gbar[i] * m[i];
  ch[3].input_shape = z.shape();
  Raster y = clip.forward(z, ch[3]);

  Raster out = image;
  const int C = image.channels();
  for (std::size_t p = 0; p < y.size(); ++p) {
    for (int c = 0; c < C; ++c) out[p * C + c] *= 1.0 - y[p];
  }
  ctx.saved = {std::move(m), image, std::move(gbar), std::move(y)};
  return out;
}

// saved = {final mask}
Raster DefenseStage::forward_ilp(const Image& image, diff::StageContext& ctx) const {
  auto& ch = ctx.children;
  const GradientMagnitudeStage magnitude(DerivativeOrder::second);
  const NormalizeStage normalize;
  const BlockVoteStage vote(cfg_.block_size, cfg_.overlap, cfg_.threshold);

  ch[0].input_shape = image.shape();
  const Raster g = magnitude.forward(image, ch[0]);
  ch[1].input_shape = g.shape();
  const Raster gbar = normalize.forward(g, ch[1]);
  ch[2].input_shape = gbar.shape();
  const Raster candidates = vote.forward(gbar, ch[2]);

  const IlpThresholdStage reevaluate(GradientMap(gbar), cfg_.s_ilp, cfg_.t_ilp);
  ch[3].input_shape = candidates.shape();
  Raster m = reevaluate.forward(candidates, ch[3]);

  const TeleaInpaintStage inpaint(PixelMask::from_raster(m), cfg_.r_telea);
  ch[4].input_shape = image.shape();
  Raster out = inpaint.forward(image, ch[4]);
  ctx.saved = {std::move(m)};
  return out;
}

Raster DefenseStage::backward(const diff::StageContext& ctx, const Raster& cotangent) const {
  require_same_shape(cotangent.shape(), ctx.input_shape, "defense backward");
  const Raster& m = ctx.saved.at(0);
  const int C = cotangent.channels();

  if (cfg_.kind == DefenseKind::ilp) {
    // The inpainted values do not depend on the image in the surrogate, so
    // the mask path contributes nothing.
    return TeleaInpaintStage(PixelMask::from_raster(m), cfg_.r_telea).backward(ctx.children.at(4), cotangent);
  }

  const Raster& image = ctx.saved.at(1);
  const Raster& gbar = ctx.saved.at(2);
  const Raster& y = ctx.saved.at(3);
  const auto& ch = ctx.children;

  Raster grad = cotangent;
  Raster gy(y.height(), y.width(), 1);
  for (std::size_t p = 0; p < y.size(); ++p) {
    double acc = 0.0;
    for (int c = 0; c < C; ++c) {
      grad[p * C + c] *= 1.0 - y[p];
      acc -= cotangent[p * C + c] * image[p * C + c];
    }
    gy[p] = acc;
  }
  const Raster gz = diff::ClipStage().backward(ch.at(3), gy);

  // z = b·Ḡ·M: the Ḡ factor directly, and through M via the identity vote.
  Raster via_mask(gz.height(), gz.width(), 1);
  Raster ggbar(gz.height(), gz.width(), 1);
  for (std::size_t p = 0; p < gz.size(); ++p) {
    ggbar[p] = cfg_.b_lgs * m[p] * gz[p];
    via_mask[p] = cfg_.b_lgs * gbar[p] * gz[p];
  }
  const Raster from_vote = BlockVoteStage(cfg_.block_size, cfg_.overlap, cfg_.threshold).backward(ch.at(2), via_mask);
  for (std::size_t p = 0; p < ggbar.size(); ++p) ggbar[p] += from_vote[p];

  const Raster gg = NormalizeStage().backward(ch.at(1), ggbar);
  const Raster gi = GradientMagnitudeStage(DerivativeOrder::first).backward(ch.at(0), gg);
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += gi[i];
  return grad;
}

Raster PairDefenseStage::forward(const Raster& input, diff::StageContext& ctx) const {
  auto [first, second] = unstack_pair(input);
  ctx.children.assign(2, {});
  ctx.children[0].input_shape = first.shape();
  ctx.children[1].input_shape = second.shape();
  const Raster a = single_.forward(first, ctx.children[0]);
  const Raster b = single_.forward(second, ctx.children[1]);
  return stack_pair(a, b);
}

Raster PairDefenseStage::backward(const diff::StageContext& ctx, const Raster& cotangent) const {
  auto [first, second] = unstack_pair(cotangent);
  return stack_pair(single_.backward(ctx.children.at(0), first), single_.backward(ctx.children.at(1), second));
}

}  // namespace flowpatch::defense
