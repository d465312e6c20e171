#pragma once

#include <cstdint>
#include <functional>

#include "flowpatch/diff/stage.hpp"
#include "flowpatch/diff/tape.hpp"

namespace flowpatch::diff {

struct GradCheckReport {
  /// max_i |vjp_i - fd_i| / max(1, |fd_i|)
  double max_relative_error = 0.0;
  std::size_t coordinates_checked = 0;
  bool passed = false;
};

struct GradCheckOptions {
  double step = 1e-4;
  double tolerance = 1e-4;
  /// Rasters larger than this are checked on a seeded random subset.
  std::size_t max_coordinates = 64;
  std::uint64_t seed = 0x5eed;
};

using ForwardFn = std::function<Raster(const Raster&)>;
/// Returns the cotangent of the input for the given output cotangent,
/// linearized at the most recent forward input.
using BackwardFn = std::function<Raster(const Raster&)>;

/// Compares a reverse pass against central differences of the scalar
/// <c, forward(x)> for a fixed random projection c.
GradCheckReport grad_check(const ForwardFn& forward, const BackwardFn& backward, const Raster& input,
                           const GradCheckOptions& options = {});

/// Precondition: stage.gradient_kind() == exact (throws std::invalid_argument otherwise).
GradCheckReport grad_check(const Stage& stage, const Raster& input, const GradCheckOptions& options = {});
GradCheckReport grad_check(const Stage& stage, const Raster& input, double step, double tolerance);

/// Checks a whole tape; every stage must be exact.
GradCheckReport grad_check(StageTape& tape, const Raster& input, const GradCheckOptions& options = {});

}  // namespace flowpatch::diff
