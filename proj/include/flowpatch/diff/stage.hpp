#pragma once

#include <memory>
#include <string>
#include <vector>

#include "flowpatch/core/raster.hpp"

namespace flowpatch::diff {

enum class GradientKind {
  exact,           // backward is the true vector-Jacobian product
  bpda_surrogate,  // backward is a documented approximation; forward is exact
};

/// Whatever a stage needs to keep from forward for its reverse pass.
struct StageContext {
  Shape input_shape;
  std::vector<Raster> saved;
  /// Contexts of sub-stages, for composite stages.
  std::vector<StageContext> children;
};

/// One named pipeline step with a reverse pass. Stages are stateless and may
/// be shared between tapes and threads; per-evaluation state lives in the
/// StageContext the tape owns.
class Stage {
 public:
  virtual ~Stage() = default;

  virtual std::string name() const = 0;
  virtual GradientKind gradient_kind() const { return GradientKind::exact; }

  /// Throws ShapeError if `input` is not a shape this stage accepts.
  virtual Raster forward(const Raster& input, StageContext& ctx) const = 0;
  /// Cotangent with respect to the forward input; same shape as that input.
  virtual Raster backward(const StageContext& ctx, const Raster& cotangent) const = 0;
};

using StagePtr = std::shared_ptr<const Stage>;

}  // namespace flowpatch::diff
