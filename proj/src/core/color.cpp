#include "flowpatch/core/color.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

namespace flowpatch {
namespace {

using Rgb = std::array<double, 3>;

// Segment lengths of the Baker et al. wheel: RY, YG, GC, CB, BM, MR.
std::vector<Rgb> make_color_wheel() {
  constexpr int kRY = 15, kYG = 6, kGC = 4, kCB = 11, kBM = 13, kMR = 6;
  std::vector<Rgb> wheel;
  wheel.reserve(kRY + kYG + kGC + kCB + kBM + kMR);
  for (int i = 0; i < kRY; ++i) wheel.push_back({255.0, 255.0 * i / kRY, 0.0});
  for (int i = 0; i < kYG; ++i) wheel.push_back({255.0 - 255.0 * i / kYG, 255.0, 0.0});
  for (int i = 0; i < kGC; ++i) wheel.push_back({0.0, 255.0, 255.0 * i / kGC});
  for (int i = 0; i < kCB; ++i) wheel.push_back({0.0, 255.0 - 255.0 * i / kCB, 255.0});
  for (int i = 0; i < kBM; ++i) wheel.push_back({255.0 * i / kBM, 0.0, 255.0});
  for (int i = 0; i < kMR; ++i) wheel.push_back({255.0, 0.0, 255.0 - 255.0 * i / kMR});
  return wheel;
}

}  // namespace

Image flow_to_color(const FlowField& flow, std::optional<double> max_magnitude) {
  static const std::vector<Rgb> wheel = make_color_wheel();
  const int ncols = static_cast<int>(wheel.size());

  double scale = 0.0;
  if (max_magnitude && *max_magnitude > 0.0) {
    scale = *max_magnitude;
  } else {
    for (int r = 0; r < flow.height(); ++r) {
      for (int c = 0; c < flow.width(); ++c) scale = std::max(scale, std::hypot(flow.u(r, c), flow.v(r, c)));
    }
    if (scale == 0.0) scale = 1.0;
  }

  Image out(flow.height(), flow.width(), 3);
  for (int r = 0; r < flow.height(); ++r) {
    for (int c = 0; c < flow.width(); ++c) {
      const double fu = flow.u(r, c) / scale;
      const double fv = flow.v(r, c) / scale;
      const double rad = std::min(1.0, std::hypot(fu, fv));
      const double angle = std::atan2(-fv, -fu) / std::numbers::pi;
      const double fk = (angle + 1.0) / 2.0 * (ncols - 1);
      const int k0 = static_cast<int>(std::floor(fk)) % ncols;
      const int k1 = (k0 + 1) % ncols;
      const double f = fk - std::floor(fk);
      for (int ch = 0; ch < 3; ++ch) {
        const double col = ((1.0 - f) * wheel[k0][ch] + f * wheel[k1][ch]) / 255.0;
        out.at(r, c, ch) = std::clamp(1.0 - rad * (1.0 - col), 0.0, 1.0);
      }
    }
  }
  return out;
}

}  // namespace flowpatch
