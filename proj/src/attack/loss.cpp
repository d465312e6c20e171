#include "flowpatch/attack/loss.hpp"

#include <cmath>

#include "flowpatch/core/error.hpp"
#include "flowpatch/kernels/stencil.hpp"

namespace flowpatch::attack {
namespace {

double excluded_count(const PixelMask& exclude) {
  const std::size_t kept = exclude.pixels() - exclude.count();
  if (kept == 0) throw DomainError("ACS is undefined when the patch mask covers every pixel");
  return static_cast<double>(kept);
}

double cosine(double fu, double fv, double au, double av) {
  const double nf = std::hypot(fu, fv), na = std::hypot(au, av);
  if (nf < kAcsEpsilon || na < kAcsEpsilon) return 0.0;
  return (fu * au + fv * av) / (nf * na);
}

// Per-channel derivative magnitude of one plane.
std::vector<double> magnitude(kernels::Extent e, std::span<const double> plane, defense::DerivativeOrder order) {
  std::vector<double> out(e.pixels());
  if (order == defense::DerivativeOrder::first) {
    kernels::omp::forward_gradient_magnitude(e, plane, out);
  } else {
    kernels::omp::laplacian(e, plane, out);
    for (double& v : out) v = std::abs(v);
  }
  return out;
}

}  // namespace

double acs_loss(const FlowField& reference, const FlowField& attacked, const PixelMask& exclude) {
  require_same_shape(reference.shape(), attacked.shape(), "acs_loss flows");
  require_same_shape({exclude.height(), exclude.width(), 2}, reference.shape(), "acs_loss mask");
  const double count = excluded_count(exclude);
  double sum = 0.0;
  for (std::size_t p = 0; p < exclude.pixels(); ++p) {
    if (exclude.test(p)) continue;
    sum += cosine(reference[2 * p], reference[2 * p + 1], attacked[2 * p], attacked[2 * p + 1]);
  }
  return sum / count;
}

AcsLossStage::AcsLossStage(FlowField reference, PixelMask exclude)
    : reference_(std::move(reference)), exclude_(std::move(exclude)), count_(excluded_count(exclude_)) {
  require_same_shape({exclude_.height(), exclude_.width(), 2}, reference_.shape(), "acs stage mask");
}

Raster AcsLossStage::forward(const Raster& input, diff::StageContext& ctx) const {
  require_same_shape(input.shape(), reference_.shape(), "acs stage input");
  ctx.saved = {input};
  return Raster(1, 1, 1, acs_loss(reference_, FlowField(input), exclude_));
}

Raster AcsLossStage::backward(const diff::StageContext& ctx, const Raster& cotangent) const {
  const Raster& a = ctx.saved.at(0);
  const double g = cotangent[0] / count_;
  Raster grad(a.height(), a.width(), 2);
  for (std::size_t p = 0; p < exclude_.pixels(); ++p) {
    if (exclude_.test(p)) continue;
    const double fu = reference_[2 * p], fv = reference_[2 * p + 1];
    const double au = a[2 * p], av = a[2 * p + 1];
    const double nf = std::hypot(fu, fv), na = std::hypot(au, av);
    if (nf < kAcsEpsilon || na < kAcsEpsilon) continue;
    const double cos = (fu * au + fv * av) / (nf * na);
    grad[2 * p] = g * (fu / (nf * na) - cos * au / (na * na));
    grad[2 * p + 1] = g * (fv / (nf * na) - cos * av / (na * na));
  }
  return grad;
}

double patch_penalty(const Image& values, const PixelMask& validity, defense::DerivativeOrder order) {
  require_same_shape({validity.height(), validity.width(), values.channels()}, values.shape(), "patch_penalty");
  const kernels::Extent e{values.height(), values.width()};
  double total = 0.0;
  for (int ch = 0; ch < values.channels(); ++ch) {
    const std::vector<double> plane = values.plane(ch);
    const std::vector<double> mag = magnitude(e, plane, order);
    for (std::size_t i = 0; i < mag.size(); ++i) {
      if (validity.test(i)) total += mag[i];
    }
  }
  return total;
}

Raster PenaltyStage::forward(const Raster& input, diff::StageContext& ctx) const {
  ctx.saved = {input};
  return Raster(1, 1, 1, patch_penalty(Image(input), validity_, order_));
}

Raster PenaltyStage::backward(const diff::StageContext& ctx, const Raster& cotangent) const {
  const Raster& x = ctx.saved.at(0);
  const kernels::Extent e{x.height(), x.width()};
  Raster grad(x.height(), x.width(), x.channels());
  std::vector<double> weight(e.pixels()), plane_grad(e.pixels());
  for (int ch = 0; ch < x.channels(); ++ch) {
    const std::vector<double> plane = x.plane(ch);
    for (std::size_t i = 0; i < weight.size(); ++i) weight[i] = validity_.test(i) ? cotangent[0] : 0.0;
    if (order_ == defense::DerivativeOrder::first) {
      kernels::omp::forward_gradient_magnitude_adjoint(e, plane, weight, plane_grad);
    } else {
      std::vector<double> lap(e.pixels());
      kernels::omp::laplacian(e, plane, lap);
      for (std::size_t i = 0; i < lap.size(); ++i) {
        const double sign = lap[i] > 0.0 ? 1.0 : (lap[i] < 0.0 ? -1.0 : 0.0);
        lap[i] = sign * weight[i];
      }
      kernels::omp::laplacian(e, lap, plane_grad);
    }
    grad.set_plane(ch, plane_grad);
  }
  return grad;
}

std::string to_string(Awareness awareness) {
  switch (awareness) {
    case Awareness::vanilla: return "vanilla";
    case Awareness::lgs: return "lgs";
    case Awareness::ilp: return "ilp";
  }
  return "?";
}

Awareness parse_awareness(std::string_view text) {
  if (text == "vanilla") return Awareness::vanilla;
  if (text == "lgs") return Awareness::lgs;
  if (text == "ilp") return Awareness::ilp;
  throw ConfigError("unknown awareness '" + std::string(text) + "' (expected vanilla, lgs or ilp)");
}

defense::DerivativeOrder penalty_order(Awareness awareness) {
  return awareness == Awareness::ilp ? defense::DerivativeOrder::second : defense::DerivativeOrder::first;
}

LossTerms attack_loss(const FlowField& reference, const FlowField& attacked, const PixelMask& exclude,
                      const Image& patch_values, const PixelMask& validity, Awareness awareness, double alpha) {
  LossTerms terms;
  terms.acs = acs_loss(reference, attacked, exclude);
  if (awareness != Awareness::vanilla) {
    terms.penalty = patch_penalty(patch_values, validity, penalty_order(awareness));
  }
  terms.total = terms.acs + alpha * terms.penalty;
  return terms;
}

}  // namespace flowpatch::attack
