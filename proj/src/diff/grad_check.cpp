#include "flowpatch/diff/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "flowpatch/core/rng.hpp"

namespace flowpatch::diff {
namespace {

double project(const Raster& a, const Raster& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

std::vector<std::size_t> pick_coordinates(std::size_t n, std::size_t limit, Rng& rng) {
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (n <= limit) return all;
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < limit; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.next() % (n - i));
    std::swap(all[i], all[j]);
  }
  all.resize(limit);
  std::sort(all.begin(), all.end());
  return all;
}

void require_exact(const Stage& stage) {
  if (stage.gradient_kind() != GradientKind::exact) {
    throw std::invalid_argument("grad_check needs an exact-gradient stage, '" + stage.name() + "' is a surrogate");
  }
}

}  // namespace

GradCheckReport grad_check(const ForwardFn& forward, const BackwardFn& backward, const Raster& input,
                           const GradCheckOptions& options) {
  Rng rng(options.seed);
  const Raster output = forward(input);
  Raster projection(output.shape(), std::vector<double>(output.size()));
  for (double& v : projection.values()) v = rng.uniform(-1.0, 1.0);
  // Linearize at `input` last so the backward sees the right context.
  forward(input);
  const Raster vjp = backward(projection);

  GradCheckReport report;
  Raster probe = input;
  for (std::size_t i : pick_coordinates(input.size(), options.max_coordinates, rng)) {
    const double original = probe[i];
    probe[i] = original + options.step;
    const double plus = project(projection, forward(probe));
    probe[i] = original - options.step;
    const double minus = project(projection, forward(probe));
    probe[i] = original;
    const double fd = (plus - minus) / (2.0 * options.step);
    const double err = std::abs(vjp[i] - fd) / std::max(1.0, std::abs(fd));
    report.max_relative_error = std::max(report.max_relative_error, err);
    ++report.coordinates_checked;
  }
  report.passed = report.max_relative_error <= options.tolerance;
  return report;
}

GradCheckReport grad_check(const Stage& stage, const Raster& input, const GradCheckOptions& options) {
  require_exact(stage);
  StageContext ctx;
  auto forward = [&](const Raster& x) {
    ctx = StageContext{x.shape(), {}, {}};
    return stage.forward(x, ctx);
  };
  auto backward = [&](const Raster& g) { return stage.backward(ctx, g); };
  return grad_check(forward, backward, input, options);
}

GradCheckReport grad_check(const Stage& stage, const Raster& input, double step, double tolerance) {
  GradCheckOptions options;
  options.step = step;
  options.tolerance = tolerance;
  return grad_check(stage, input, options);
}

GradCheckReport grad_check(StageTape& tape, const Raster& input, const GradCheckOptions& options) {
  for (const auto& stage : tape.stages()) require_exact(*stage);
  auto forward = [&](const Raster& x) { return tape.run_forward(x); };
  auto backward = [&](const Raster& g) { return tape.run_backward(g); };
  return grad_check(forward, backward, input, options);
}

}  // namespace flowpatch::diff
