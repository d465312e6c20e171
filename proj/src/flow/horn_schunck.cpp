#include "flowpatch/flow/horn_schunck.hpp"

#include <memory>

#include "flowpatch/core/error.hpp"
#include "flowpatch/kernels/stencil.hpp"

namespace flowpatch::flow {

using kernels::kHsChannels;

void HornSchunckConfig::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("Horn-Schunck alpha must be positive");
  if (iterations < 1) throw ConfigError("Horn-Schunck needs at least one iteration");
  if (!(intensity_scale > 0.0)) throw ConfigError("Horn-Schunck intensity scale must be positive");
}

HornSchunck::HornSchunck(HornSchunckConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void HornSchunck::append_stages(diff::StageTape& tape) const {
  tape.push(std::make_shared<HsDerivativesStage>(cfg_.intensity_scale));
  // One shared stage object: stages are stateless, contexts live in the tape.
  const auto step = std::make_shared<HsIterationStage>(cfg_.alpha);
  for (int i = 0; i < cfg_.iterations; ++i) tape.push(step);
  tape.push(std::make_shared<HsExtractFlowStage>());
}

FlowField HornSchunck::estimate(const Image& first, const Image& second) const {
  require_same_shape(first.shape(), second.shape(), "horn_schunck frames");
  return FlowField(estimator_tape(*this).run_inference(stack_pair(first, second)));
}

FlowField horn_schunck(const Image& first, const Image& second, const HornSchunckConfig& cfg) {
  return HornSchunck(cfg).estimate(first, second);
}

Raster HsDerivativesStage::forward(const Raster& input, diff::StageContext&) const {
  if (input.channels() != 2 && input.channels() != 6) {
    throw ShapeError("Horn-Schunck expects a stacked grayscale or RGB pair, got " + to_string(input.shape()));
  }
  const auto [a, b] = unstack_pair(input);
  const kernels::Extent e{input.height(), input.width()};
  std::vector<double> g1 = to_grayscale(a), g2 = to_grayscale(b);
  for (double& v : g1) v *= scale_;
  for (double& v : g2) v *= scale_;

  std::vector<double> dx1(e.pixels()), dx2(e.pixels()), dy1(e.pixels()), dy2(e.pixels());
  kernels::omp::central_difference_x(e, g1, dx1);
  kernels::omp::central_difference_x(e, g2, dx2);
  kernels::omp::central_difference_y(e, g1, dy1);
  kernels::omp::central_difference_y(e, g2, dy2);

  Raster state(e.height, e.width, kHsChannels);
  for (std::size_t i = 0; i < e.pixels(); ++i) {
    state[i * kHsChannels] = 0.5 * (dx1[i] + dx2[i]);
    state[i * kHsChannels + 1] = 0.5 * (dy1[i] + dy2[i]);
    state[i * kHsChannels + 2] = g2[i] - g1[i];
  }
  return state;
}

Raster HsDerivativesStage::backward(const diff::StageContext& ctx, const Raster& cotangent) const {
  const kernels::Extent e{cotangent.height(), cotangent.width()};
  const std::vector<double> g_ix = cotangent.plane(0), g_iy = cotangent.plane(1), g_it = cotangent.plane(2);
  std::vector<double> from_x(e.pixels()), from_y(e.pixels());
  kernels::omp::central_difference_x_adjoint(e, g_ix, from_x);
  kernels::omp::central_difference_y_adjoint(e, g_iy, from_y);

  const int C = ctx.input_shape.channels / 2;
  Raster grad(e.height, e.width, 2 * C);
  const double luma[3] = {kLumaR, kLumaG, kLumaB};
  for (std::size_t i = 0; i < e.pixels(); ++i) {
    const double shared = 0.5 * (from_x[i] + from_y[i]);
    const double gray1 = scale_ * (shared - g_it[i]);
    const double gray2 = scale_ * (shared + g_it[i]);
    for (int c = 0; c < C; ++c) {
      const double w = C == 1 ? 1.0 : luma[c];
      grad[i * 2 * C + c] = w * gray1;
      grad[i * 2 * C + C + c] = w * gray2;
    }
  }
  return grad;
}

Raster HsIterationStage::forward(const Raster& input, diff::StageContext& ctx) const {
  if (input.channels() != kHsChannels) throw ShapeError("Horn-Schunck iteration expects 5-channel state");
  Raster next(input.height(), input.width(), kHsChannels);
  kernels::omp::hs_jacobi_step({input.height(), input.width()}, alpha2_, input.values(), next.values());
  ctx.saved = {input};
  return next;
}

Raster HsIterationStage::backward(const diff::StageContext& ctx, const Raster& cotangent) const {
  const Raster& state = ctx.saved.at(0);
  Raster grad(state.height(), state.width(), kHsChannels);
  kernels::omp::hs_jacobi_step_adjoint({state.height(), state.width()}, alpha2_, state.values(),
                                       cotangent.values(), grad.values());
  return grad;
}

Raster HsExtractFlowStage::forward(const Raster& input, diff::StageContext&) const {
  if (input.channels() != kHsChannels) throw ShapeError("flow extraction expects 5-channel state");
  Raster flow(input.height(), input.width(), 2);
  for (std::size_t i = 0; i < input.shape().pixels(); ++i) {
    flow[2 * i] = input[i * kHsChannels + 3];
    flow[2 * i + 1] = input[i * kHsChannels + 4];
  }
  return flow;
}

Raster HsExtractFlowStage::backward(const diff::StageContext& ctx, const Raster& cotangent) const {
  Raster grad(ctx.input_shape.height, ctx.input_shape.width, kHsChannels);
  for (std::size_t i = 0; i < grad.shape().pixels(); ++i) {
    grad[i * kHsChannels + 3] = cotangent[2 * i];
    grad[i * kHsChannels + 4] = cotangent[2 * i + 1];
  }
  return grad;
}

}  // namespace flowpatch::flow
