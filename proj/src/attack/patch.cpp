#include "flowpatch/attack/patch.hpp"

#include <algorithm>
#include <cmath>

#include "flowpatch/core/error.hpp"

namespace flowpatch::attack {

std::string to_string(BoxMode box) { return box == BoxMode::clip ? "clip" : "cov"; }

BoxMode parse_box_mode(std::string_view text) {
  if (text == "clip") return BoxMode::clip;
  if (text == "cov") return BoxMode::cov;
  throw ConfigError("unknown box mode '" + std::string(text) + "' (expected clip or cov)");
}

PixelMask circular_mask(int side) {
  PixelMask mask(side, side);
  const double pivot = side / 2;
  const double radius = side / 2.0;
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      mask.set(r, c, std::hypot(r - pivot, c - pivot) < radius);
    }
  }
  return mask;
}

Patch::Patch(Raster parameter, BoxMode box) : parameter_(std::move(parameter)), box_(box) {
  if (parameter_.height() != parameter_.width() || parameter_.channels() != 3 || parameter_.height() < 1) {
    throw ShapeError("patch parameter must be a square RGB raster, got " + to_string(parameter_.shape()));
  }
  validity_ = circular_mask(parameter_.height());
}

Patch Patch::from_values(const Image& values, BoxMode box) {
  Raster param = values;
  if (box == BoxMode::clip) {
    for (double& v : param.values()) v = std::clamp(v, 0.0, 1.0);
  } else {
    for (double& v : param.values()) v = std::atanh(2.0 * std::clamp(v, 1e-6, 1.0 - 1e-6) - 1.0);
  }
  return Patch(std::move(param), box);
}

Patch Patch::random(int side, BoxMode box, Rng& rng) {
  Image values(side, side, 3);
  for (double& v : values.values()) v = rng.uniform();
  return from_values(values, box);
}

Image Patch::values() const {
  if (box_ == BoxMode::clip) return Image(parameter_);
  Raster out = parameter_;
  for (double& v : out.values()) v = 0.5 * (std::tanh(v) + 1.0);
  return Image(std::move(out));
}

Patch manual_patch(int side, int cell) {
  if (side < 2 || cell < 1 || cell > side / 2) {
    throw ConfigError("manual patch needs side >= 2 and 1 <= cell <= side/2");
  }
  Image values(side, side, 3);
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const double v = ((r / cell + c / cell) % 2 == 0) ? 0.0 : 1.0;
      for (int ch = 0; ch < 3; ++ch) values.at(r, c, ch) = v;
    }
  }
  return Patch(values, BoxMode::clip);
}

Raster CovStage::forward(const Raster& input, diff::StageContext& ctx) const {
  Raster t = input;
  for (double& v : t.values()) v = std::tanh(v);
  ctx.saved = {t};
  Raster out = t;
  for (double& v : out.values()) v = 0.5 * (v + 1.0);
  return out;
}

Raster CovStage::backward(const diff::StageContext& ctx, const Raster& cotangent) const {
  const Raster& t = ctx.saved.at(0);
  Raster out = cotangent;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= 0.5 * (1.0 - t[i] * t[i]);
  return out;
}

}  // namespace flowpatch::attack
