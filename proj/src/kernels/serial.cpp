// Reference kernels: direct loops, clamped indexing, scatter-form adjoints.

#include <algorithm>
#include <cmath>

#include "flowpatch/kernels/stencil.hpp"

namespace flowpatch::kernels::serial {
namespace {

int clamp_index(int i, int n) { return std::clamp(i, 0, n - 1); }

}  // namespace

void forward_gradient_magnitude(Extent e, std::span<const double> in, std::span<double> out) {
  const int H = e.height, W = e.width;
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      const double here = in[r * W + c];
      const double dx = in[r * W + clamp_index(c + 1, W)] - here;
      const double dy = in[clamp_index(r + 1, H) * W + c] - here;
      out[r * W + c] = std::sqrt(dx * dx + dy * dy);
    }
  }
}

void forward_gradient_magnitude_adjoint(Extent e, std::span<const double> in, std::span<const double> cot,
                                        std::span<double> out) {
  const int H = e.height, W = e.width;
  std::fill(out.begin(), out.end(), 0.0);
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      const int i = r * W + c;
      const int right = r * W + clamp_index(c + 1, W);
      const int below = clamp_index(r + 1, H) * W + c;
      const double dx = in[right] - in[i];
      const double dy = in[below] - in[i];
      const double mag = std::sqrt(dx * dx + dy * dy);
      if (mag == 0.0) continue;
      const double gx = cot[i] * dx / mag;
      const double gy = cot[i] * dy / mag;
      out[right] += gx;
      out[i] -= gx;
      out[below] += gy;
      out[i] -= gy;
    }
  }
}

void laplacian(Extent e, std::span<const double> in, std::span<double> out) {
  const int H = e.height, W = e.width;
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      const double sum = in[clamp_index(r - 1, H) * W + c] + in[clamp_index(r + 1, H) * W + c] +
                         in[r * W + clamp_index(c - 1, W)] + in[r * W + clamp_index(c + 1, W)];
      out[r * W + c] = sum - 4.0 * in[r * W + c];
    }
  }
}

void neighbor_average(Extent e, std::span<const double> in, std::span<double> out) {
  const int H = e.height, W = e.width;
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      const double sum = in[clamp_index(r - 1, H) * W + c] + in[clamp_index(r + 1, H) * W + c] +
                         in[r * W + clamp_index(c - 1, W)] + in[r * W + clamp_index(c + 1, W)];
      out[r * W + c] = sum * 0.25;
    }
  }
}

void central_difference_x(Extent e, std::span<const double> in, std::span<double> out) {
  const int H = e.height, W = e.width;
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      out[r * W + c] = (in[r * W + clamp_index(c + 1, W)] - in[r * W + clamp_index(c - 1, W)]) * 0.5;
    }
  }
}

void central_difference_y(Extent e, std::span<const double> in, std::span<double> out) {
  const int H = e.height, W = e.width;
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      out[r * W + c] = (in[clamp_index(r + 1, H) * W + c] - in[clamp_index(r - 1, H) * W + c]) * 0.5;
    }
  }
}

void central_difference_x_adjoint(Extent e, std::span<const double> cot, std::span<double> out) {
  const int H = e.height, W = e.width;
  std::fill(out.begin(), out.end(), 0.0);
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      const double g = cot[r * W + c] * 0.5;
      out[r * W + clamp_index(c + 1, W)] += g;
      out[r * W + clamp_index(c - 1, W)] -= g;
    }
  }
}

void central_difference_y_adjoint(Extent e, std::span<const double> cot, std::span<double> out) {
  const int H = e.height, W = e.width;
  std::fill(out.begin(), out.end(), 0.0);
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      const double g = cot[r * W + c] * 0.5;
      out[clamp_index(r + 1, H) * W + c] += g;
      out[clamp_index(r - 1, H) * W + c] -= g;
    }
  }
}

void hs_jacobi_step(Extent e, double alpha2, std::span<const double> state, std::span<double> next) {
  const int H = e.height, W = e.width;
  auto at = [&](int r, int c, int k) { return state[(static_cast<std::size_t>(r) * W + c) * kHsChannels + k]; };
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      const int up = clamp_index(r - 1, H), down = clamp_index(r + 1, H);
      const int left = clamp_index(c - 1, W), right = clamp_index(c + 1, W);
      const double ubar = (at(up, c, 3) + at(down, c, 3) + at(r, left, 3) + at(r, right, 3)) * 0.25;
      const double vbar = (at(up, c, 4) + at(down, c, 4) + at(r, left, 4) + at(r, right, 4)) * 0.25;
      const double ix = at(r, c, 0), iy = at(r, c, 1), it = at(r, c, 2);
      const double denom = alpha2 + ix * ix + iy * iy;
      const double common = (ix * ubar + iy * vbar + it) / denom;
      double* o = &next[(static_cast<std::size_t>(r) * W + c) * kHsChannels];
      o[0] = ix;
      o[1] = iy;
      o[2] = it;
      o[3] = ubar - ix * common;
      o[4] = vbar - iy * common;
    }
  }
}

void hs_jacobi_step_adjoint(Extent e, double alpha2, std::span<const double> state, std::span<const double> cot,
                            std::span<double> grad) {
  const int H = e.height, W = e.width;
  auto idx = [&](int r, int c) { return (static_cast<std::size_t>(r) * W + c) * kHsChannels; };
  std::fill(grad.begin(), grad.end(), 0.0);
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      const int up = clamp_index(r - 1, H), down = clamp_index(r + 1, H);
      const int left = clamp_index(c - 1, W), right = clamp_index(c + 1, W);
      const double ubar =
          (state[idx(up, c) + 3] + state[idx(down, c) + 3] + state[idx(r, left) + 3] + state[idx(r, right) + 3]) *
          0.25;
      const double vbar =
          (state[idx(up, c) + 4] + state[idx(down, c) + 4] + state[idx(r, left) + 4] + state[idx(r, right) + 4]) *
          0.25;
      const std::size_t p = idx(r, c);
      const double ix = state[p], iy = state[p + 1], it = state[p + 2];
      const double denom = alpha2 + ix * ix + iy * iy;
      const double common = (ix * ubar + iy * vbar + it) / denom;

      const double gu = cot[p + 3], gv = cot[p + 4];
      const double g_common = -(gu * ix + gv * iy);
      const double g_num = g_common / denom;
      const double g_denom = -g_common * common / denom;
      grad[p] += cot[p] - gu * common + g_num * ubar + g_denom * 2.0 * ix;
      grad[p + 1] += cot[p + 1] - gv * common + g_num * vbar + g_denom * 2.0 * iy;
      grad[p + 2] += cot[p + 2] + g_num;

      const double g_ubar = (gu + g_num * ix) * 0.25;
      const double g_vbar = (gv + g_num * iy) * 0.25;
      for (std::size_t q : {idx(up, c), idx(down, c), idx(r, left), idx(r, right)}) {
        grad[q + 3] += g_ubar;
        grad[q + 4] += g_vbar;
      }
    }
  }
}

void block_vote(Extent e, std::span<const double> gbar, int block, int overlap, double threshold,
                std::span<std::uint8_t> mask) {
  const int W = e.width;
  const std::vector<int> rows = block_origins(e.height, block, overlap);
  const std::vector<int> cols = block_origins(e.width, block, overlap);
  std::fill(mask.begin(), mask.end(), std::uint8_t{0});
  const double area = static_cast<double>(block) * block;
  for (int r0 : rows) {
    for (int c0 : cols) {
      double sum = 0.0;
      for (int r = r0; r < r0 + block; ++r) {
        for (int c = c0; c < c0 + block; ++c) sum += gbar[r * W + c];
      }
      if (sum / area <= threshold) continue;
      for (int r = r0; r < r0 + block; ++r) {
        for (int c = c0; c < c0 + block; ++c) mask[r * W + c] = 1;
      }
    }
  }
}

}  // namespace flowpatch::kernels::serial
