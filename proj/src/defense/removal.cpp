#include "flowpatch/defense/removal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <queue>
#include <utility>
#include <vector>

#include "flowpatch/core/error.hpp"

namespace flowpatch::defense {

Image lgs_smooth(const Image& image, const GradientMap& normalized, const PixelMask& mask, double b_lgs) {
  require_same_shape({image.height(), image.width(), 1}, normalized.shape(), "lgs_smooth map");
  require_same_shape({image.height(), image.width(), 1}, {mask.height(), mask.width(), 1}, "lgs_smooth mask");
  Image out = image;
  const int channels = image.channels();
  for (std::size_t p = 0; p < mask.pixels(); ++p) {
    if (!mask.test(p)) continue;
    const double factor = 1.0 - std::clamp(b_lgs * normalized[p], 0.0, 1.0);
    for (int ch = 0; ch < channels; ++ch) out[p * channels + ch] *= factor;
  }
  return out;
}

namespace {

enum class Flag : std::uint8_t { known, band, inside };

constexpr double kFar = 1.0e6;

// Fast-marching state over one image; T is the arrival time from the mask
// boundary. Out-of-range neighbours behave like unreached INSIDE pixels.
class FastMarching {
 public:
  FastMarching(int height, int width, const PixelMask& mask)
      : h_(height), w_(width), flags_(mask.pixels(), Flag::known), time_(mask.pixels(), 0.0) {
    for (std::size_t i = 0; i < mask.pixels(); ++i) {
      if (mask.test(i)) {
        flags_[i] = Flag::inside;
        time_[i] = kFar;
      }
    }
  }

  bool in_range(int r, int c) const { return r >= 0 && r < h_ && c >= 0 && c < w_; }
  std::size_t at(int r, int c) const { return static_cast<std::size_t>(r) * w_ + c; }
  bool reached(int r, int c) const { return in_range(r, c) && flags_[at(r, c)] != Flag::inside; }
  double time(int r, int c) const { return in_range(r, c) ? time_[at(r, c)] : kFar; }

  Flag& flag(std::size_t i) { return flags_[i]; }
  double& time(std::size_t i) { return time_[i]; }

  // Upwind solution of |grad T| = 1 from two orthogonal neighbours.
  double solve(int r1, int c1, int r2, int c2) const {
    const double a = time(r1, c1), b = time(r2, c2);
    const bool ka = reached(r1, c1), kb = reached(r2, c2);
    if (ka && kb) {
      if (std::abs(a - b) >= 1.0) return 1.0 + std::min(a, b);
      return (a + b + std::sqrt(2.0 - (a - b) * (a - b))) * 0.5;
    }
    if (ka) return 1.0 + a;
    if (kb) return 1.0 + b;
    return 1.0 + std::min(a, b);
  }

  double arrival(int r, int c) const {
    return std::min(std::min(solve(r - 1, c, r, c - 1), solve(r + 1, c, r, c - 1)),
                    std::min(solve(r - 1, c, r, c + 1), solve(r + 1, c, r, c + 1)));
  }

  // One-sided or central difference of T over reached neighbours.
  double time_gradient(int r, int c, int dr, int dc) const {
    const bool fwd = reached(r + dr, c + dc), bwd = reached(r - dr, c - dc);
    if (fwd && bwd) return (time(r + dr, c + dc) - time(r - dr, c - dc)) * 0.5;
    if (fwd) return time(r + dr, c + dc) - time(r, c);
    if (bwd) return time(r, c) - time(r - dr, c - dc);
    return 0.0;
  }

 private:
  int h_, w_;
  std::vector<Flag> flags_;
  std::vector<double> time_;
};

}  // namespace

Image telea_inpaint(const Image& image, const PixelMask& mask, int radius) {
  require_same_shape({image.height(), image.width(), 1}, {mask.height(), mask.width(), 1}, "telea_inpaint");
  if (radius < 1) throw ConfigError("Telea radius must be at least 1");
  if (mask.none()) return image;
  if (mask.all()) throw DomainError("Telea inpainting needs at least one known pixel");

  const int H = image.height(), W = image.width(), C = image.channels();
  Image out = image;
  FastMarching fm(H, W, mask);

  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> band;
  constexpr int kDr[4] = {-1, 0, 0, 1};
  constexpr int kDc[4] = {0, -1, 1, 0};

  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      if (mask(r, c)) continue;
      for (int k = 0; k < 4; ++k) {
        const int nr = r + kDr[k], nc = c + kDc[k];
        if (fm.in_range(nr, nc) && mask(nr, nc)) {
          fm.flag(fm.at(r, c)) = Flag::band;
          band.emplace(0.0, fm.at(r, c));
          break;
        }
      }
    }
  }

  std::vector<double> acc(C);
  while (!band.empty()) {
    const auto [t, idx] = band.top();
    band.pop();
    if (fm.flag(idx) == Flag::known) continue;
    fm.flag(idx) = Flag::known;
    const int r = static_cast<int>(idx / W), c = static_cast<int>(idx % W);

    for (int k = 0; k < 4; ++k) {
      const int pr = r + kDr[k], pc = c + kDc[k];
      if (!fm.in_range(pr, pc) || fm.flag(fm.at(pr, pc)) != Flag::inside) continue;
      const std::size_t p = fm.at(pr, pc);
      fm.time(p) = fm.arrival(pr, pc);

      const double grad_r = fm.time_gradient(pr, pc, 1, 0);
      const double grad_c = fm.time_gradient(pr, pc, 0, 1);
      std::fill(acc.begin(), acc.end(), 0.0);
      double weight_sum = 0.0;
      for (int qr = pr - radius; qr <= pr + radius; ++qr) {
        for (int qc = pc - radius; qc <= pc + radius; ++qc) {
          const int dr = pr - qr, dc = pc - qc;
          const int dist2 = dr * dr + dc * dc;
          if (dist2 == 0 || dist2 > radius * radius || !fm.reached(qr, qc)) continue;
          const double len = std::sqrt(static_cast<double>(dist2));
          double direction = (dr * grad_r + dc * grad_c) / len;
          if (std::abs(direction) <= 0.01) direction = 1.0e-6;
          const double level = 1.0 / (1.0 + std::abs(fm.time(qr, qc) - fm.time(p)));
          const double w = std::abs(direction) * level / dist2;
          const std::size_t q = fm.at(qr, qc);
          for (int ch = 0; ch < C; ++ch) acc[ch] += w * out[q * C + ch];
          weight_sum += w;
        }
      }
      for (int ch = 0; ch < C; ++ch) out[p * C + ch] = acc[ch] / weight_sum;

      fm.flag(p) = Flag::band;
      band.emplace(fm.time(p), p);
    }
  }
  return out;
}

}  // namespace flowpatch::defense
