#include "flowpatch/harness/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <vector>

#include "flowpatch/core/error.hpp"
#include "flowpatch/core/io.hpp"
#include "flowpatch/core/rng.hpp"

namespace flowpatch::harness {
namespace {

using Rgb = std::array<double, 3>;

struct Blob {
  double row, col, sigma;
  Rgb amplitude;
};

struct Scene {
  Rgb base;
  Rgb ramp_row, ramp_col;
  std::vector<Blob> background;
  // Object: soft-edged ellipse carrying its own blobs, centred at (row, col).
  double obj_row, obj_col, obj_radius_r, obj_radius_c;
  Rgb obj_base;
  std::vector<Blob> object;
  double bg_dr, bg_dc, obj_dr, obj_dc;
};

constexpr double kEdgeSoftness = 1.0;

Rgb tinted(Rng& rng, double amplitude) {
  Rgb out;
  for (double& a : out) a = amplitude * rng.uniform(0.7, 1.3);
  return out;
}

Blob random_blob(Rng& rng, double row_lo, double row_hi, double col_lo, double col_hi, double sigma_lo,
                 double sigma_hi, double amp_lo, double amp_hi) {
  Blob b;
  b.row = rng.uniform(row_lo, row_hi);
  b.col = rng.uniform(col_lo, col_hi);
  b.sigma = rng.uniform(sigma_lo, sigma_hi);
  const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
  b.amplitude = tinted(rng, sign * rng.uniform(amp_lo, amp_hi));
  return b;
}

Scene random_scene(Rng& rng, int H, int W) {
  Scene s;
  s.base = tinted(rng, rng.uniform(0.4, 0.6));
  for (int ch = 0; ch < 3; ++ch) {
    s.ramp_row[ch] = rng.uniform(-0.1, 0.1) / H;
    s.ramp_col[ch] = rng.uniform(-0.1, 0.1) / W;
  }
  for (int i = 0; i < 10; ++i) s.background.push_back(random_blob(rng, 0, H, 0, W, 6.0, 12.0, 0.05, 0.15));
  for (int i = 0; i < 4; ++i) s.background.push_back(random_blob(rng, 4, H - 4, 4, W - 4, 0.9, 1.3, 0.2, 0.3));

  s.obj_radius_r = rng.uniform(0.15, 0.25) * H;
  s.obj_radius_c = rng.uniform(0.1, 0.18) * W;
  s.obj_row = rng.uniform(0.3, 0.7) * H;
  s.obj_col = rng.uniform(0.2, 0.8) * W;
  s.obj_base = tinted(rng, rng.uniform(0.3, 0.7));
  for (int i = 0; i < 3; ++i) {
    s.object.push_back(random_blob(rng, -s.obj_radius_r * 0.6, s.obj_radius_r * 0.6, -s.obj_radius_c * 0.6,
                                   s.obj_radius_c * 0.6, 3.0, 6.0, 0.05, 0.15));
  }

  s.bg_dr = rng.uniform(-1.0, 1.0);
  s.bg_dc = rng.uniform(-1.5, 1.5);
  s.obj_dr = s.bg_dr + rng.uniform(-1.0, 1.0);
  s.obj_dc = s.bg_dc + rng.uniform(-1.5, 1.5);
  return s;
}

double blob_value(const Blob& b, double r, double c, int ch) {
  const double d2 = (r - b.row) * (r - b.row) + (c - b.col) * (c - b.col);
  return b.amplitude[ch] * std::exp(-d2 / (2.0 * b.sigma * b.sigma));
}

double object_alpha(const Scene& s, double r, double c) {
  const double nr = (r - s.obj_row) / s.obj_radius_r, nc = (c - s.obj_col) / s.obj_radius_c;
  const double dist = (std::sqrt(nr * nr + nc * nc) - 1.0) * std::min(s.obj_radius_r, s.obj_radius_c);
  return 1.0 / (1.0 + std::exp(dist / kEdgeSoftness));
}

// Scene at time t in {0, 1}: each layer is shifted by t times its motion.
Image render(const Scene& s, int H, int W, double t) {
  Image img(H, W, 3);
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      const double br = r - t * s.bg_dr, bc = c - t * s.bg_dc;
      const double orow = r - t * s.obj_dr, ocol = c - t * s.obj_dc;
      const double alpha = object_alpha(s, orow, ocol);
      for (int ch = 0; ch < 3; ++ch) {
        double bg = s.base[ch] + s.ramp_row[ch] * br + s.ramp_col[ch] * bc;
        for (const auto& b : s.background) bg += blob_value(b, br, bc, ch);
        double fg = s.obj_base[ch];
        for (const auto& b : s.object) fg += blob_value(b, orow - s.obj_row, ocol - s.obj_col, ch);
        img.at(r, c, ch) = std::clamp(alpha * fg + (1.0 - alpha) * bg, 0.0, 1.0);
      }
    }
  }
  return img;
}

FlowField ground_truth(const Scene& s, int H, int W) {
  FlowField flow(H, W);
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      const bool on_object = object_alpha(s, r, c) >= 0.5;
      flow.at(r, c, 0) = static_cast<float>(on_object ? s.obj_dc : s.bg_dc);
      flow.at(r, c, 1) = static_cast<float>(on_object ? s.obj_dr : s.bg_dr);
    }
  }
  return flow;
}

std::string pair_id(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d", i);
  return buf;
}

}  // namespace

Dataset synth_pairs(const SynthSpec& spec) {
  if (spec.count < 0 || spec.height < 8 || spec.width < 8) {
    throw ConfigError("synthetic dataset needs count >= 0 and frames of at least 8x8");
  }
  Rng rng(spec.seed);
  Dataset out;
  for (int i = 0; i < spec.count; ++i) {
    const Scene scene = random_scene(rng, spec.height, spec.width);
    FramePair pair;
    pair.id = pair_id(i);
    pair.first = quantize_8bit(render(scene, spec.height, spec.width, 0.0));
    pair.second = quantize_8bit(render(scene, spec.height, spec.width, 1.0));
    pair.ground_truth = ground_truth(scene, spec.height, spec.width);
    out.push_back(std::move(pair));
  }
  return out;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  for (const auto& pair : dataset) {
    write_ppm(to_rgb(pair.first), dir / (pair.id + "_1.ppm"));
    write_ppm(to_rgb(pair.second), dir / (pair.id + "_2.ppm"));
    if (pair.ground_truth) write_flo(*pair.ground_truth, dir / (pair.id + ".flo"));
    if (pair.valid) write_mask_ppm(*pair.valid, dir / (pair.id + "_valid.ppm"));
  }
}

Dataset synth_dataset(const SynthSpec& spec, const std::filesystem::path& dir) {
  Dataset data = synth_pairs(spec);
  write_dataset(data, dir);
  return data;
}

}  // namespace flowpatch::harness
