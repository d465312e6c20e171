#include "flowpatch/diff/basic_stages.hpp"

#include <algorithm>
#include <cmath>

#include "flowpatch/kernels/stencil.hpp"

namespace flowpatch::diff {

Raster ScaleStage::forward(const Raster& input, StageContext&) const {
  Raster out = input;
  for (double& v : out.values()) v *= factor_;
  return out;
}

Raster ScaleStage::backward(const StageContext&, const Raster& cotangent) const {
  Raster out = cotangent;
  for (double& v : out.values()) v *= factor_;
  return out;
}

Raster TanhStage::forward(const Raster& input, StageContext& ctx) const {
  Raster out = input;
  for (double& v : out.values()) v = std::tanh(v);
  ctx.saved = {out};
  return out;
}

Raster TanhStage::backward(const StageContext& ctx, const Raster& cotangent) const {
  const Raster& y = ctx.saved.at(0);
  Raster out = cotangent;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= 1.0 - y[i] * y[i];
  return out;
}

Raster ClipStage::forward(const Raster& input, StageContext& ctx) const {
  ctx.saved = {input};
  Raster out = input;
  for (double& v : out.values()) v = std::clamp(v, 0.0, 1.0);
  return out;
}

Raster ClipStage::backward(const StageContext& ctx, const Raster& cotangent) const {
  const Raster& x = ctx.saved.at(0);
  Raster out = cotangent;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (x[i] < 0.0 || x[i] > 1.0) out[i] = 0.0;
  }
  return out;
}

Raster LaplacianStage::forward(const Raster& input, StageContext&) const {
  const kernels::Extent e{input.height(), input.width()};
  return map_planes(input, [e](auto in, auto out) { kernels::omp::laplacian(e, in, out); });
}

Raster LaplacianStage::backward(const StageContext&, const Raster& cotangent) const {
  const kernels::Extent e{cotangent.height(), cotangent.width()};
  return map_planes(cotangent, [e](auto in, auto out) { kernels::omp::laplacian(e, in, out); });
}

Raster NeighborAverageStage::forward(const Raster& input, StageContext&) const {
  const kernels::Extent e{input.height(), input.width()};
  return map_planes(input, [e](auto in, auto out) { kernels::omp::neighbor_average(e, in, out); });
}

Raster NeighborAverageStage::backward(const StageContext&, const Raster& cotangent) const {
  const kernels::Extent e{cotangent.height(), cotangent.width()};
  return map_planes(cotangent, [e](auto in, auto out) { kernels::omp::neighbor_average(e, in, out); });
}

}  // namespace flowpatch::diff
