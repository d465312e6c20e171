// OpenMP kernels. Row-parallel; per-pixel arithmetic mirrors the serial
// reference so forward results are bit-identical. Adjoints are written in
// gather form so no two threads write the same output element.

#include <algorithm>
#include <cmath>
#include <vector>

#include "flowpatch/kernels/stencil.hpp"

namespace flowpatch::kernels::omp {
namespace {

inline int clamp_index(int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

}  // namespace

void forward_gradient_magnitude(Extent e, std::span<const double> in, std::span<double> out) {
  const int H = e.height, W = e.width;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < H; ++r) {
    const double* row = in.data() + static_cast<std::size_t>(r) * W;
    const double* below = in.data() + static_cast<std::size_t>(clamp_index(r + 1, H)) * W;
    double* o = out.data() + static_cast<std::size_t>(r) * W;
    for (int c = 0; c < W; ++c) {
      const double here = row[c];
      const double dx = row[c + 1 < W ? c + 1 : W - 1] - here;
      const double dy = below[c] - here;
      o[c] = std::sqrt(dx * dx + dy * dy);
    }
  }
}

void forward_gradient_magnitude_adjoint(Extent e, std::span<const double> in, std::span<const double> cot,
                                        std::span<double> out) {
  const int H = e.height, W = e.width;
  std::vector<double> gx(e.pixels()), gy(e.pixels());
#pragma omp parallel for schedule(static)
  for (int r = 0; r < H; ++r) {
    const std::size_t base = static_cast<std::size_t>(r) * W;
    const std::size_t below = static_cast<std::size_t>(clamp_index(r + 1, H)) * W;
    for (int c = 0; c < W; ++c) {
      const double here = in[base + c];
      const double dx = in[base + clamp_index(c + 1, W)] - here;
      const double dy = in[below + c] - here;
      const double mag = std::sqrt(dx * dx + dy * dy);
      gx[base + c] = mag == 0.0 ? 0.0 : cot[base + c] * dx / mag;
      gy[base + c] = mag == 0.0 ? 0.0 : cot[base + c] * dy / mag;
    }
  }
#pragma omp parallel for schedule(static)
  for (int r = 0; r < H; ++r) {
    const std::size_t base = static_cast<std::size_t>(r) * W;
    for (int c = 0; c < W; ++c) {
      double acc = -gx[base + c] - gy[base + c];
      if (c == W - 1) acc += gx[base + c];
      if (r == H - 1) acc += gy[base + c];
      if (c >= 1) acc += gx[base + c - 1];
      if (r >= 1) acc += gy[base - W + c];
      out[base + c] = acc;
    }
  }
}

void laplacian(Extent e, std::span<const double> in, std::span<double> out) {
  const int H = e.height, W = e.width;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < H; ++r) {
    const double* up = in.data() + static_cast<std::size_t>(clamp_index(r - 1, H)) * W;
    const double* row = in.data() + static_cast<std::size_t>(r) * W;
    const double* down = in.data() + static_cast<std::size_t>(clamp_index(r + 1, H)) * W;
    double* o = out.data() + static_cast<std::size_t>(r) * W;
    for (int c = 0; c < W; ++c) {
      const double sum = up[c] + down[c] + row[clamp_index(c - 1, W)] + row[clamp_index(c + 1, W)];
      o[c] = sum - 4.0 * row[c];
    }
  }
}

void neighbor_average(Extent e, std::span<const double> in, std::span<double> out) {
  const int H = e.height, W = e.width;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < H; ++r) {
    const double* up = in.data() + static_cast<std::size_t>(clamp_index(r - 1, H)) * W;
    const double* row = in.data() + static_cast<std::size_t>(r) * W;
    const double* down = in.data() + static_cast<std::size_t>(clamp_index(r + 1, H)) * W;
    double* o = out.data() + static_cast<std::size_t>(r) * W;
    for (int c = 0; c < W; ++c) {
      const double sum = up[c] + down[c] + row[clamp_index(c - 1, W)] + row[clamp_index(c + 1, W)];
      o[c] = sum * 0.25;
    }
  }
}

void central_difference_x(Extent e, std::span<const double> in, std::span<double> out) {
  const int H = e.height, W = e.width;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < H; ++r) {
    const double* row = in.data() + static_cast<std::size_t>(r) * W;
    double* o = out.data() + static_cast<std::size_t>(r) * W;
    for (int c = 0; c < W; ++c) o[c] = (row[clamp_index(c + 1, W)] - row[clamp_index(c - 1, W)]) * 0.5;
  }
}

void central_difference_y(Extent e, std::span<const double> in, std::span<double> out) {
  const int H = e.height, W = e.width;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < H; ++r) {
    const double* up = in.data() + static_cast<std::size_t>(clamp_index(r - 1, H)) * W;
    const double* down = in.data() + static_cast<std::size_t>(clamp_index(r + 1, H)) * W;
    double* o = out.data() + static_cast<std::size_t>(r) * W;
    for (int c = 0; c < W; ++c) o[c] = (down[c] - up[c]) * 0.5;
  }
}

// Gather form of D^T for D(i) = (x[clamp(i+1)] - x[clamp(i-1)]) / 2 on a line
// of n samples; `at(k)` reads the cotangent at position k.
template <typename At>
inline double central_adjoint_at(int i, int n, At at) {
  double acc = 0.0;
  if (i >= 1) acc += at(i - 1);
  if (i == n - 1) acc += at(i);
  if (i + 1 <= n - 1) acc -= at(i + 1);
  if (i == 0) acc -= at(i);
  return acc * 0.5;
}

void central_difference_x_adjoint(Extent e, std::span<const double> cot, std::span<double> out) {
  const int H = e.height, W = e.width;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < H; ++r) {
    const double* row = cot.data() + static_cast<std::size_t>(r) * W;
    double* o = out.data() + static_cast<std::size_t>(r) * W;
    for (int c = 0; c < W; ++c) o[c] = central_adjoint_at(c, W, [row](int k) { return row[k]; });
  }
}

void central_difference_y_adjoint(Extent e, std::span<const double> cot, std::span<double> out) {
  const int H = e.height, W = e.width;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < H; ++r) {
    double* o = out.data() + static_cast<std::size_t>(r) * W;
    for (int c = 0; c < W; ++c) {
      o[c] = central_adjoint_at(r, H, [&](int k) { return cot[static_cast<std::size_t>(k) * W + c]; });
    }
  }
}

void hs_jacobi_step(Extent e, double alpha2, std::span<const double> state, std::span<double> next) {
  const int H = e.height, W = e.width;
  constexpr int C = kHsChannels;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < H; ++r) {
    const double* up = state.data() + static_cast<std::size_t>(clamp_index(r - 1, H)) * W * C;
    const double* row = state.data() + static_cast<std::size_t>(r) * W * C;
    const double* down = state.data() + static_cast<std::size_t>(clamp_index(r + 1, H)) * W * C;
    double* o = next.data() + static_cast<std::size_t>(r) * W * C;
    for (int c = 0; c < W; ++c) {
      const int l = clamp_index(c - 1, W) * C, rt = clamp_index(c + 1, W) * C, p = c * C;
      const double ubar = (up[p + 3] + down[p + 3] + row[l + 3] + row[rt + 3]) * 0.25;
      const double vbar = (up[p + 4] + down[p + 4] + row[l + 4] + row[rt + 4]) * 0.25;
      const double ix = row[p], iy = row[p + 1], it = row[p + 2];
      const double denom = alpha2 + ix * ix + iy * iy;
      const double common = (ix * ubar + iy * vbar + it) / denom;
      o[p] = ix;
      o[p + 1] = iy;
      o[p + 2] = it;
      o[p + 3] = ubar - ix * common;
      o[p + 4] = vbar - iy * common;
    }
  }
}

void hs_jacobi_step_adjoint(Extent e, double alpha2, std::span<const double> state, std::span<const double> cot,
                            std::span<double> grad) {
  const int H = e.height, W = e.width;
  constexpr int C = kHsChannels;
  std::vector<double> g_ubar(e.pixels()), g_vbar(e.pixels());
#pragma omp parallel for schedule(static)
  for (int r = 0; r < H; ++r) {
    const double* up = state.data() + static_cast<std::size_t>(clamp_index(r - 1, H)) * W * C;
    const double* row = state.data() + static_cast<std::size_t>(r) * W * C;
    const double* down = state.data() + static_cast<std::size_t>(clamp_index(r + 1, H)) * W * C;
    for (int c = 0; c < W; ++c) {
      const int l = clamp_index(c - 1, W) * C, rt = clamp_index(c + 1, W) * C, p = c * C;
      const double ubar = (up[p + 3] + down[p + 3] + row[l + 3] + row[rt + 3]) * 0.25;
      const double vbar = (up[p + 4] + down[p + 4] + row[l + 4] + row[rt + 4]) * 0.25;
      const double ix = row[p], iy = row[p + 1], it = row[p + 2];
      const double denom = alpha2 + ix * ix + iy * iy;
      const double common = (ix * ubar + iy * vbar + it) / denom;

      const std::size_t q = (static_cast<std::size_t>(r) * W + c) * C;
      const double gu = cot[q + 3], gv = cot[q + 4];
      const double g_common = -(gu * ix + gv * iy);
      const double g_num = g_common / denom;
      const double g_denom = -g_common * common / denom;
      grad[q] = cot[q] - gu * common + g_num * ubar + g_denom * 2.0 * ix;
      grad[q + 1] = cot[q + 1] - gv * common + g_num * vbar + g_denom * 2.0 * iy;
      grad[q + 2] = cot[q + 2] + g_num;
      g_ubar[q / C] = (gu + g_num * ix) * 0.25;
      g_vbar[q / C] = (gv + g_num * iy) * 0.25;
    }
  }
  // The replicate-boundary neighbour mean is symmetric, so its transpose is a
  // plain neighbour sum of the pre-scaled cotangents.
#pragma omp parallel for schedule(static)
  for (int r = 0; r < H; ++r) {
    const std::size_t up = static_cast<std::size_t>(clamp_index(r - 1, H)) * W;
    const std::size_t row = static_cast<std::size_t>(r) * W;
    const std::size_t down = static_cast<std::size_t>(clamp_index(r + 1, H)) * W;
    for (int c = 0; c < W; ++c) {
      const int l = clamp_index(c - 1, W), rt = clamp_index(c + 1, W);
      const std::size_t q = (row + c) * C;
      grad[q + 3] = g_ubar[up + c] + g_ubar[down + c] + g_ubar[row + l] + g_ubar[row + rt];
      grad[q + 4] = g_vbar[up + c] + g_vbar[down + c] + g_vbar[row + l] + g_vbar[row + rt];
    }
  }
}

void block_vote(Extent e, std::span<const double> gbar, int block, int overlap, double threshold,
                std::span<std::uint8_t> mask) {
  const int H = e.height, W = e.width;
  const std::vector<int> rows = block_origins(H, block, overlap);
  const std::vector<int> cols = block_origins(W, block, overlap);
  const int nr = static_cast<int>(rows.size()), nc = static_cast<int>(cols.size());
  const double area = static_cast<double>(block) * block;

  std::vector<std::uint8_t> hot(static_cast<std::size_t>(nr) * nc, 0);
#pragma omp parallel for collapse(2) schedule(static)
  for (int br = 0; br < nr; ++br) {
    for (int bc = 0; bc < nc; ++bc) {
      double sum = 0.0;
      for (int r = rows[br]; r < rows[br] + block; ++r) {
        const double* line = gbar.data() + static_cast<std::size_t>(r) * W;
        for (int c = cols[bc]; c < cols[bc] + block; ++c) sum += line[c];
      }
      hot[static_cast<std::size_t>(br) * nc + bc] = sum / area > threshold ? 1 : 0;
    }
  }

#pragma omp parallel for schedule(static)
  for (int r = 0; r < H; ++r) {
    std::uint8_t* line = mask.data() + static_cast<std::size_t>(r) * W;
    std::fill(line, line + W, std::uint8_t{0});
    for (int br = 0; br < nr; ++br) {
      if (r < rows[br] || r >= rows[br] + block) continue;
      for (int bc = 0; bc < nc; ++bc) {
        if (hot[static_cast<std::size_t>(br) * nc + bc]) std::fill(line + cols[bc], line + cols[bc] + block, 1);
      }
    }
  }
}

}  // namespace flowpatch::kernels::omp
